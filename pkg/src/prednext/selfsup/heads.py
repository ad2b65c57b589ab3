"""Projection/prediction MLPs, momentum targets and the negative queue."""

from __future__ import annotations

import copy

import torch
import torch.nn as nn

from ..errors import ConfigError
from .losses import l2_normalize


class MLPHead(nn.Module):
    """Two-layer MLP with batch norm: Linear-BN-ReLU-Linear[-BN].

    Accepts ``[N, D]`` or ``[B, T, D]``; sequences are flattened so every
    timestep is projected by the same head.
    """

    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int, out_bn: bool = False):
        super().__init__()
        self.in_dim, self.out_dim = in_dim, out_dim
        layers = [
            nn.Linear(in_dim, hidden_dim, bias=False),
            nn.BatchNorm1d(hidden_dim),
            nn.ReLU(inplace=True),
            nn.Linear(hidden_dim, out_dim, bias=not out_bn),
        ]
        if out_bn:
            layers.append(nn.BatchNorm1d(out_dim, affine=False))
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 3:
            b, t, d = x.shape
            return self.net(x.reshape(b * t, d)).reshape(b, t, -1)
        return self.net(x)


ProjectionHead = MLPHead


class PredictorHead(MLPHead):
    """Bottleneck predictor mapping the projection space onto itself."""

    def __init__(self, dim: int, hidden_dim: int = 512):
        super().__init__(dim, hidden_dim, dim)


class MomentumTarget(nn.Module):
    """Gradient-free shadow of a set of online modules, updated by EMA."""

    def __init__(self, online: nn.Module):
        super().__init__()
        self.shadow = copy.deepcopy(online)
        for p in self.shadow.parameters():
            p.requires_grad_(False)

    def forward(self, *args, **kwargs):
        return self.shadow(*args, **kwargs)


@torch.no_grad()
def momentum_update(target: MomentumTarget, online: nn.Module, m_ema: float) -> MomentumTarget:
    """``theta_target <- m * theta_target + (1 - m) * theta_online`` for every parameter."""
    if not 0 <= m_ema <= 1:
        raise ValueError(f"momentum must lie in [0, 1], got {m_ema}")
    t_params = list(target.shadow.parameters())
    o_params = list(online.parameters())
    if len(t_params) != len(o_params) or any(a.shape != b.shape for a, b in zip(t_params, o_params)):
        raise ConfigError("momentum target does not mirror the online parameters")
    for pt, po in zip(t_params, o_params):
        pt.copy_(pt * m_ema + po * (1 - m_ema))
    return target


class NegativeQueue(nn.Module):
    """FIFO ring buffer of L2-normalised feature vectors."""

    def __init__(self, size: int, dim: int):
        super().__init__()
        self.size, self.dim = size, dim
        self.register_buffer("buffer", torch.zeros(size, dim))
        self.register_buffer("cursor", torch.zeros((), dtype=torch.long))
        self.register_buffer("count", torch.zeros((), dtype=torch.long))

    def fill_random(self, generator: torch.Generator | None = None):
        self.buffer.copy_(l2_normalize(torch.randn(self.size, self.dim, generator=generator)))
        self.count.fill_(self.size)
        self.cursor.zero_()

    def __len__(self):
        return int(self.count)

    def vectors(self) -> torch.Tensor:
        """Stored vectors, oldest first."""
        n, c = int(self.count), int(self.cursor)
        if n < self.size:
            return self.buffer[:n]
        return torch.cat([self.buffer[c:], self.buffer[:c]])

    @torch.no_grad()
    def push(self, batch: torch.Tensor) -> "NegativeQueue":
        if batch.dim() != 2 or batch.shape[1] != self.dim:
            raise ValueError(f"expected [B, {self.dim}] vectors, got {tuple(batch.shape)}")
        b = batch.shape[0]
        if b > self.size:
            raise ValueError(f"cannot push {b} vectors into a queue of size {self.size}")
        idx = (int(self.cursor) + torch.arange(b)) % self.size
        self.buffer[idx] = l2_normalize(batch.detach()).to(self.buffer.dtype)
        self.cursor.fill_((int(self.cursor) + b) % self.size)
        self.count.fill_(min(self.size, int(self.count) + b))
        return self


def queue_push(queue: NegativeQueue, batch: torch.Tensor) -> NegativeQueue:
    return queue.push(batch)
