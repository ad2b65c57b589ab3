"""SEW residual spiking encoder producing one feature vector per timestep."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from ..errors import ConfigError
from .neuron import LIFConfig, LIFNode

CONNECT_FUNCTIONS = ("add", "and", "iand")


@dataclass
class EncoderConfig:
    widths: list[int] = field(default_factory=lambda: [16, 32, 64, 128])
    blocks: list[int] = field(default_factory=lambda: [1, 1, 1, 1])
    in_channels: int = 3
    sew_connect: str = "add"
    feature_dim: int = 128
    stem_stride: int = 2

    def __post_init__(self):
        if not self.widths or any(int(w) <= 0 for w in self.widths):
            raise ConfigError(f"encoder.widths must be positive, got {self.widths}")
        if len(self.blocks) != len(self.widths) or any(int(b) <= 0 for b in self.blocks):
            raise ConfigError("encoder.blocks must give a positive block count for every stage")
        if self.in_channels <= 0 or self.stem_stride <= 0:
            raise ConfigError("encoder.in_channels and encoder.stem_stride must be positive")
        if self.sew_connect not in CONNECT_FUNCTIONS:
            raise ConfigError(f"encoder.sew_connect must be one of {CONNECT_FUNCTIONS}")
        if self.feature_dim != self.widths[-1]:
            raise ConfigError(
                f"encoder.feature_dim ({self.feature_dim}) must equal the last width ({self.widths[-1]})"
            )


@dataclass
class TemporalFeatureSequence:
    """Per-timestep features ``[B, T, D]`` and their time average ``[B, D]``."""

    per_step: torch.Tensor
    aggregate: torch.Tensor

    @classmethod
    def from_steps(cls, per_step: torch.Tensor) -> "TemporalFeatureSequence":
        return cls(per_step, per_step.mean(dim=1))


@dataclass
class EncoderState:
    """Final membrane potential and spikes of every LIF layer after a clip."""

    potentials: dict[str, torch.Tensor]
    spikes: dict[str, torch.Tensor]


def sew_connect(residual: torch.Tensor, shortcut: torch.Tensor, mode: str) -> torch.Tensor:
    if residual.shape != shortcut.shape:
        raise ConfigError(
            f"residual branch {tuple(residual.shape)} and shortcut {tuple(shortcut.shape)} differ"
        )
    if mode == "add":
        return residual + shortcut
    if mode == "and":
        return residual * shortcut
    if mode == "iand":
        return (1 - residual) * shortcut
    raise ConfigError(f"unknown connect function {mode!r}")


class TimestepBatchNorm(nn.Module):
    """Batch norm whose batch statistics are taken separately at each timestep.

    Input is ``[T, B, C, ...]``. The affine parameters are shared over time;
    running statistics track the average of the per-timestep batch moments.
    """

    def __init__(self, num_features: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.weight = nn.Parameter(torch.ones(num_features))
        self.bias = nn.Parameter(torch.zeros(num_features))
        self.register_buffer("running_mean", torch.zeros(num_features))
        self.register_buffer("running_var", torch.ones(num_features))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        shape = (1, 1, -1) + (1,) * (x.dim() - 3)
        if self.training:
            dims = (1,) + tuple(range(3, x.dim()))
            mean = x.mean(dim=dims, keepdim=True)
            var = x.var(dim=dims, unbiased=False, keepdim=True)
            n = x.numel() // (x.shape[0] * x.shape[2])
            with torch.no_grad():
                m = mean.reshape(x.shape[0], -1).mean(0)
                v = var.reshape(x.shape[0], -1).mean(0) * n / max(n - 1, 1)
                self.running_mean.mul_(1 - self.momentum).add_(self.momentum * m)
                self.running_var.mul_(1 - self.momentum).add_(self.momentum * v)
        else:
            mean = self.running_mean.reshape(shape)
            var = self.running_var.reshape(shape)
        x_hat = (x - mean) / torch.sqrt(var + self.eps)
        return x_hat * self.weight.reshape(shape) + self.bias.reshape(shape)


class SeqConv(nn.Module):
    """2-D convolution applied independently to every timestep of ``[T, B, C, H, W]``."""

    def __init__(self, cin, cout, kernel, stride=1):
        super().__init__()
        self.conv = nn.Conv2d(cin, cout, kernel, stride=stride, padding=kernel // 2, bias=False)

    def forward(self, x):
        t, b = x.shape[:2]
        y = self.conv(x.flatten(0, 1))
        return y.reshape(t, b, *y.shape[1:])


class ConvBNLIF(nn.Sequential):
    def __init__(self, cin, cout, kernel, stride, lif: LIFConfig):
        super().__init__(SeqConv(cin, cout, kernel, stride), TimestepBatchNorm(cout), LIFNode(lif))


class SEWBlock(nn.Module):
    """Spike-element-wise residual block.

    ``downsample=None`` adds a 1x1 conv-BN-LIF shortcut whenever the shapes
    require one; ``downsample=False`` forces the identity shortcut.
    """

    def __init__(self, cin, cout, stride, lif: LIFConfig, connect="add", downsample=None):
        super().__init__()
        self.connect = connect
        self.residual = nn.Sequential(ConvBNLIF(cin, cout, 3, stride, lif), ConvBNLIF(cout, cout, 3, 1, lif))
        needs = stride != 1 or cin != cout
        if downsample is None:
            downsample = needs
        if needs and not downsample:
            raise ConfigError(f"identity shortcut cannot map {cin} channels at stride {stride} to {cout}")
        self.shortcut = ConvBNLIF(cin, cout, 1, stride, lif) if downsample else nn.Identity()

    def forward(self, x):
        return sew_connect(self.residual(x), self.shortcut(x), self.connect)


class SpikingEncoder(nn.Module):
    def __init__(self, cfg: EncoderConfig, lif: LIFConfig):
        super().__init__()
        self.cfg, self.lif = cfg, lif
        self.stem = ConvBNLIF(cfg.in_channels, cfg.widths[0], 3, cfg.stem_stride, lif)
        layers, cin = [], cfg.widths[0]
        for i, (w, n) in enumerate(zip(cfg.widths, cfg.blocks)):
            for j in range(n):
                stride = 2 if (i > 0 and j == 0) else 1
                layers.append(SEWBlock(cin, w, stride, lif, cfg.sew_connect))
                cin = w
        self.stages = nn.Sequential(*layers)

    @property
    def feature_dim(self) -> int:
        return self.cfg.feature_dim

    def forward(self, clip: torch.Tensor) -> TemporalFeatureSequence:
        """Encode ``clip`` of shape ``[B, T, C, H, W]``."""
        if clip.dim() != 5:
            raise ValueError(f"expected a [B, T, C, H, W] clip, got shape {tuple(clip.shape)}")
        if clip.shape[1] == 0:
            raise ValueError("clip must contain at least one timestep")
        x = clip.transpose(0, 1)
        x = self.stages(self.stem(x))
        per_step = x.mean(dim=(3, 4)).transpose(0, 1)
        return TemporalFeatureSequence.from_steps(per_step)

    def state(self) -> EncoderState:
        pots, spikes = {}, {}
        for name, mod in self.named_modules():
            if isinstance(mod, LIFNode) and mod.v is not None:
                pots[name], spikes[name] = mod.v, mod.spike
        return EncoderState(pots, spikes)


def encode_clip(clip: torch.Tensor, encoder: SpikingEncoder) -> TemporalFeatureSequence:
    return encoder(clip)
