"""The five baseline objectives wired on top of a spiking encoder.

Every method projects each timestep with its projection head and averages
the projected sequence over time before applying its loss. The projected
per-timestep sequences are returned as well, for the temporal prediction
heads.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from ..errors import ConfigError
from ..snn.encoder import SpikingEncoder, TemporalFeatureSequence
from .heads import MLPHead, MomentumTarget, NegativeQueue, PredictorHead, momentum_update
from .losses import barlow_twins_loss, cosine_pred_loss, info_nce_loss, l2_normalize

METHODS = ("simclr", "moco", "byol", "simsiam", "barlowtwins")

# Projection output dims, predictor hidden dims, temperatures and momenta
# used by the original full-scale runs.
METHOD_DEFAULTS = {
    "simclr": dict(proj_dim=256, temperature=0.5),
    "moco": dict(proj_dim=256, temperature=0.5, momentum=0.99, queue_size=4096),
    "byol": dict(proj_dim=2048, pred_hidden=512, momentum=0.99),
    "barlowtwins": dict(proj_dim=1024, lambda_bt=5e-3),
    "simsiam": dict(proj_dim=2048, pred_hidden=512),
}


@dataclass
class MethodConfig:
    name: str = "simsiam"
    proj_dim: int | None = None
    proj_hidden: int | None = None
    pred_hidden: int | None = None
    temperature: float | None = None
    momentum: float | None = None
    queue_size: int | None = None
    lambda_bt: float | None = None

    def __post_init__(self):
        if self.name not in METHODS:
            raise ConfigError(f"method.name must be one of {METHODS}, got {self.name!r}")
        base = dict(proj_dim=256, pred_hidden=512, temperature=0.5, momentum=0.99, queue_size=4096, lambda_bt=5e-3)
        base.update(METHOD_DEFAULTS[self.name])
        for key, value in base.items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        if self.proj_hidden is None:
            self.proj_hidden = self.proj_dim
        if self.temperature <= 0:
            raise ConfigError("method.temperature must be > 0")
        if not 0 <= self.momentum < 1:
            raise ConfigError("method.momentum must lie in [0, 1)")
        if min(self.proj_dim, self.proj_hidden, self.pred_hidden, self.queue_size) <= 0:
            raise ConfigError("method dimensions and queue size must be positive")


@dataclass
class SSLOutput:
    loss: torch.Tensor
    z_i: TemporalFeatureSequence
    z_j: TemporalFeatureSequence


class EncoderProjector(nn.Module):
    """Encoder followed by per-timestep projection (the target-network body)."""

    def __init__(self, encoder: SpikingEncoder, projection: MLPHead):
        super().__init__()
        self.encoder, self.projection = encoder, projection

    def forward(self, clip):
        return TemporalFeatureSequence.from_steps(self.projection(self.encoder(clip).per_step))


class SSLMethod(nn.Module):
    uses_target = False

    def __init__(self, cfg: MethodConfig, feature_dim: int):
        super().__init__()
        self.cfg = cfg
        self.stop_grad = True
        self.projection = MLPHead(feature_dim, cfg.proj_hidden, cfg.proj_dim, out_bn=cfg.name == "simsiam")

    def project(self, feats: TemporalFeatureSequence) -> TemporalFeatureSequence:
        return TemporalFeatureSequence.from_steps(self.projection(feats.per_step))

    def attach(self, encoder: SpikingEncoder, generator: torch.Generator | None = None):
        """Build target-side state that needs the encoder. No-op for weight-shared methods."""

    def forward(self, f_i, f_j, x_i=None, x_j=None, compute_loss=True) -> SSLOutput:
        z_i, z_j = self.project(f_i), self.project(f_j)
        loss = self.loss(z_i, z_j, x_i, x_j) if compute_loss else z_i.aggregate.new_zeros(())
        return SSLOutput(loss, z_i, z_j)

    def loss(self, z_i, z_j, x_i, x_j) -> torch.Tensor:
        raise NotImplementedError

    @torch.no_grad()
    def after_step(self, encoder: SpikingEncoder):
        """Momentum/queue bookkeeping, called once after each optimizer step."""


class SimCLR(SSLMethod):
    def loss(self, z_i, z_j, x_i, x_j):
        return info_nce_loss(z_i.aggregate, z_j.aggregate, tau=self.cfg.temperature)


class BarlowTwins(SSLMethod):
    def loss(self, z_i, z_j, x_i, x_j):
        return barlow_twins_loss(z_i.aggregate, z_j.aggregate, self.cfg.lambda_bt)


class SimSiam(SSLMethod):
    def __init__(self, cfg, feature_dim):
        super().__init__(cfg, feature_dim)
        self.predictor = PredictorHead(cfg.proj_dim, cfg.pred_hidden)

    def loss(self, z_i, z_j, x_i, x_j):
        a, b = z_i.aggregate, z_j.aggregate
        return 0.5 * cosine_pred_loss(self.predictor(a), b, self.stop_grad) + 0.5 * cosine_pred_loss(
            self.predictor(b), a, self.stop_grad
        )


class _MomentumMethod(SSLMethod):
    uses_target = True

    def attach(self, encoder, generator=None):
        self.target = MomentumTarget(EncoderProjector(encoder, self.projection))

    def target_features(self, clip) -> torch.Tensor:
        if not hasattr(self, "target"):
            raise ConfigError(f"{self.cfg.name} needs attach(encoder) before use")
        with torch.no_grad():
            return self.target(clip).aggregate

    @torch.no_grad()
    def after_step(self, encoder):
        momentum_update(self.target, EncoderProjector(encoder, self.projection), self.cfg.momentum)


class MoCo(_MomentumMethod):
    def attach(self, encoder, generator=None):
        super().attach(encoder)
        self.queue = NegativeQueue(self.cfg.queue_size, self.cfg.proj_dim)
        self.queue.fill_random(generator)
        self._pending = None

    def loss(self, z_i, z_j, x_i, x_j):
        if x_j is None:
            raise ValueError("moco needs the raw clip of view j for its key encoder")
        k = self.target_features(x_j)
        negatives = self.queue.vectors().to(k.dtype)
        loss = info_nce_loss(z_i.aggregate, k, negatives, tau=self.cfg.temperature)
        self._pending = l2_normalize(k)
        return loss

    @torch.no_grad()
    def after_step(self, encoder):
        super().after_step(encoder)
        if self._pending is not None:
            n = min(len(self._pending), self.queue.size)
            self.queue.push(self._pending[:n])
            self._pending = None


class BYOL(_MomentumMethod):
    def __init__(self, cfg, feature_dim):
        super().__init__(cfg, feature_dim)
        self.predictor = PredictorHead(cfg.proj_dim, cfg.pred_hidden)

    def loss(self, z_i, z_j, x_i, x_j):
        if x_i is None or x_j is None:
            raise ValueError("byol needs both raw clips for its target network")
        t_i, t_j = self.target_features(x_i), self.target_features(x_j)
        return 0.5 * cosine_pred_loss(self.predictor(z_i.aggregate), t_j) + 0.5 * cosine_pred_loss(
            self.predictor(z_j.aggregate), t_i
        )


_REGISTRY = {"simclr": SimCLR, "moco": MoCo, "byol": BYOL, "simsiam": SimSiam, "barlowtwins": BarlowTwins}


def build_method(cfg: MethodConfig, encoder: SpikingEncoder, generator: torch.Generator | None = None) -> SSLMethod:
    try:
        cls = _REGISTRY[cfg.name]
    except KeyError:
        raise ConfigError(f"unknown self-supervised method {cfg.name!r}") from None
    method = cls(cfg, encoder.feature_dim)
    method.attach(encoder, generator)
    return method


def ssl_forward(method: SSLMethod, feats_i, feats_j, x_i=None, x_j=None):
    """Return ``(loss, z_i per-step, z_j per-step)`` for a pair of encoded views."""
    out = method(feats_i, feats_j, x_i, x_j)
    return out.loss, out.z_i.per_step, out.z_j.per_step
