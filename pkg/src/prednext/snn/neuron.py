"""Leaky integrate-and-fire dynamics with surrogate gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from ..errors import ConfigError

RESET_MODES = ("hard_to_zero", "soft_subtract")
SURROGATES = ("atan", "sigmoid", "triangular")


@dataclass
class LIFConfig:
    threshold: float = 1.0
    decay_tau: float = 2.0
    reset_mode: str = "hard_to_zero"
    surrogate: str = "atan"
    surrogate_width: float = 2.0
    # Replace the Heaviside forward by the smooth primitive of the surrogate.
    # Only meant for finite-difference gradient checks.
    smooth_forward: bool = False

    def __post_init__(self):
        if not self.threshold > 0:
            raise ConfigError(f"lif.threshold must be > 0, got {self.threshold}")
        if not self.decay_tau > 1:
            raise ConfigError(f"lif.decay_tau must be > 1, got {self.decay_tau}")
        if not self.surrogate_width > 0:
            raise ConfigError(f"lif.surrogate_width must be > 0, got {self.surrogate_width}")
        if self.reset_mode not in RESET_MODES:
            raise ConfigError(f"lif.reset_mode must be one of {RESET_MODES}, got {self.reset_mode!r}")
        if self.surrogate not in SURROGATES:
            raise ConfigError(f"lif.surrogate must be one of {SURROGATES}, got {self.surrogate!r}")


def surrogate_grad(x: torch.Tensor, cfg: LIFConfig) -> torch.Tensor:
    """Pseudo-derivative of the spike function at ``x = v - threshold``.

    ``atan``:       (a/2) / (1 + (pi*a*x/2)^2), the derivative of arctan(pi*a*x/2)/pi + 1/2
    ``sigmoid``:    a * s * (1 - s) with s = sigmoid(a*x)
    ``triangular``: max(0, 1 - |x|/a) / a (compact support, zero outside |x| < a)
    """
    a = cfg.surrogate_width
    if cfg.surrogate == "atan":
        return (a / 2) / (1 + (math.pi * a / 2 * x) ** 2)
    if cfg.surrogate == "sigmoid":
        s = torch.sigmoid(a * x)
        return a * s * (1 - s)
    return torch.clamp(1 - x.abs() / a, min=0) / a


def surrogate_primitive(x: torch.Tensor, cfg: LIFConfig) -> torch.Tensor:
    """Smooth step whose exact derivative is :func:`surrogate_grad`."""
    a = cfg.surrogate_width
    if cfg.surrogate == "atan":
        return torch.atan(math.pi * a / 2 * x) / math.pi + 0.5
    if cfg.surrogate == "sigmoid":
        return torch.sigmoid(a * x)
    u = torch.clamp(x / a, -1.0, 1.0)
    return torch.where(u < 0, 0.5 * (1 + u) ** 2, 1 - 0.5 * (1 - u) ** 2)


class _SpikeFn(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, cfg):
        ctx.save_for_backward(x)
        ctx.cfg = cfg
        return (x >= 0).to(x.dtype)

    @staticmethod
    def backward(ctx, grad_out):
        (x,) = ctx.saved_tensors
        return grad_out * surrogate_grad(x, ctx.cfg), None


def spike_fn(x: torch.Tensor, cfg: LIFConfig) -> torch.Tensor:
    if cfg.smooth_forward:
        return surrogate_primitive(x, cfg)
    return _SpikeFn.apply(x, cfg)


def lif_step(v: torch.Tensor, x: torch.Tensor, cfg: LIFConfig) -> tuple[torch.Tensor, torch.Tensor]:
    """Advance membrane potential ``v`` by one step of input current ``x``.

    Returns ``(new_v, spikes)``. The potential first leaks toward the input,
    ``v + (x - v) / tau``; units at or above threshold emit a spike and reset.
    """
    if v.shape != x.shape:
        raise ValueError(f"state shape {tuple(v.shape)} does not match input shape {tuple(x.shape)}")
    h = v + (x - v) / cfg.decay_tau
    s = spike_fn(h - cfg.threshold, cfg)
    if cfg.reset_mode == "hard_to_zero":
        v_new = h * (1 - s)
    else:
        v_new = h - s * cfg.threshold
    return v_new, s


class LIFNode(nn.Module):
    """Multi-step LIF layer over inputs shaped ``[T, ...]``.

    The membrane starts from zero on every call, so no state crosses clips.
    The final potential and spikes are kept in ``v`` and ``spike`` for
    inspection.
    """

    def __init__(self, cfg: LIFConfig):
        super().__init__()
        self.cfg = cfg
        self.v: torch.Tensor | None = None
        self.spike: torch.Tensor | None = None

    def forward(self, x_seq: torch.Tensor) -> torch.Tensor:
        v = torch.zeros_like(x_seq[0])
        out = []
        for x in x_seq:
            v, s = lif_step(v, x, self.cfg)
            out.append(s)
        self.v, self.spike = v.detach(), out[-1].detach()
        return torch.stack(out)

    def extra_repr(self):
        c = self.cfg
        return f"threshold={c.threshold}, tau={c.decay_tau}, reset={c.reset_mode}, surrogate={c.surrogate}"
