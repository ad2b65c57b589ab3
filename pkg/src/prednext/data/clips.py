"""Clip sampling and two-view augmentation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torchvision.transforms.v2 import functional as TF

from ..errors import ConfigError
from .seeding import numpy_stream
from .video import Video


class VideoTooShort(Exception):
    """The video cannot host the requested clip and its successor; resample."""


@dataclass
class ClipSpec:
    frames: int = 16
    stride: int = 2
    resolution: tuple[int, int] = (128, 128)
    next_clip_offset: int = 0

    def __post_init__(self):
        self.resolution = tuple(int(r) for r in self.resolution)
        if self.frames < 1 or self.stride < 1 or min(self.resolution) < 1:
            raise ConfigError("clip frames, stride and resolution must be positive")
        if self.next_clip_offset < 0:
            raise ConfigError("clip.next_clip_offset must be non-negative")

    @property
    def span(self) -> int:
        """Source frames covered by one clip, first to last sampled frame."""
        return (self.frames - 1) * self.stride + 1

    @property
    def next_start(self) -> int:
        """Offset of the following clip's first frame relative to the current one."""
        return self.frames * self.stride + self.next_clip_offset

    @property
    def required_length(self) -> int:
        return self.next_start + self.span


@dataclass
class AugmentParams:
    crop_scale: tuple[float, float] = (0.2, 0.766)
    crop_ratio: tuple[float, float] = (0.75, 1.3333)
    flip_p: float = 0.5
    brightness: float = 0.6
    contrast: float = 0.6
    saturation: float = 0.6
    hue: float = 0.1
    grayscale_p: float = 0.2

    def __post_init__(self):
        self.crop_scale = tuple(float(s) for s in self.crop_scale)
        self.crop_ratio = tuple(float(r) for r in self.crop_ratio)
        lo, hi = self.crop_scale
        if not (0 < lo <= hi <= 1):
            raise ConfigError(f"augment.crop_scale must lie within (0, 1], got {self.crop_scale}")
        if not (0 < self.crop_ratio[0] <= self.crop_ratio[1]):
            raise ConfigError("augment.crop_ratio must be a positive increasing pair")
        for p in (self.flip_p, self.grayscale_p):
            if not 0 <= p <= 1:
                raise ConfigError("augment probabilities must lie in [0, 1]")
        if min(self.brightness, self.contrast, self.saturation) < 0 or not 0 <= self.hue <= 0.5:
            raise ConfigError("augment jitter strengths must be non-negative (hue at most 0.5)")

    @classmethod
    def identity(cls) -> "AugmentParams":
        return cls((1.0, 1.0), (1.0, 1.0), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass
class ViewTransform:
    """One concrete draw of augmentation parameters, shared by every frame of a view."""

    crop: tuple[int, int, int, int]  # top, left, height, width
    flip: bool = False
    jitter: dict = field(default_factory=dict)
    jitter_order: tuple[str, ...] = ()
    grayscale: bool = False


def sample_crop(h, w, scale, ratio, rng: np.random.Generator):
    """Random-resized-crop box, as in the usual Inception-style crop sampler."""
    area = h * w
    log_ratio = (math.log(ratio[0]), math.log(ratio[1]))
    for _ in range(10):
        target = area * rng.uniform(*scale)
        aspect = math.exp(rng.uniform(*log_ratio))
        cw = int(round(math.sqrt(target * aspect)))
        ch = int(round(math.sqrt(target / aspect)))
        if 0 < cw <= w and 0 < ch <= h:
            top = int(rng.integers(0, h - ch + 1))
            left = int(rng.integers(0, w - cw + 1))
            return top, left, ch, cw
    in_ratio = w / h
    if in_ratio < ratio[0]:
        cw, ch = w, int(round(w / ratio[0]))
    elif in_ratio > ratio[1]:
        ch, cw = h, int(round(h * ratio[1]))
    else:
        cw, ch = w, h
    return (h - ch) // 2, (w - cw) // 2, ch, cw


def sample_view_transform(h, w, aug: AugmentParams, rng: np.random.Generator) -> ViewTransform:
    crop = sample_crop(h, w, aug.crop_scale, aug.crop_ratio, rng)
    flip = bool(rng.random() < aug.flip_p)
    jitter = {}
    for name in ("brightness", "contrast", "saturation"):
        s = getattr(aug, name)
        if s > 0:
            jitter[name] = float(rng.uniform(max(0.0, 1 - s), 1 + s))
    if aug.hue > 0:
        jitter["hue"] = float(rng.uniform(-aug.hue, aug.hue))
    order = tuple(np.array(list(jitter), dtype=object)[rng.permutation(len(jitter))]) if jitter else ()
    gray = bool(rng.random() < aug.grayscale_p)
    return ViewTransform(crop, flip, jitter, order, gray)


_JITTER_OPS = {
    "brightness": TF.adjust_brightness,
    "contrast": TF.adjust_contrast,
    "saturation": TF.adjust_saturation,
    "hue": TF.adjust_hue,
}


def apply_view_transform(frames: torch.Tensor, tf: ViewTransform, size) -> torch.Tensor:
    """Apply one view transform to float frames ``[T, C, H, W]`` in [0, 1]."""
    h, w = frames.shape[-2:]
    top, left, ch, cw = tf.crop
    if (top, left, ch, cw) == (0, 0, h, w) and tuple(size) == (h, w):
        x = frames
    else:
        x = TF.resized_crop(frames, top, left, ch, cw, list(size), antialias=True)
    if tf.flip:
        x = TF.horizontal_flip(x)
    for name in tf.jitter_order:
        x = _JITTER_OPS[name](x, tf.jitter[name])
    if tf.grayscale:
        x = TF.rgb_to_grayscale(x, num_output_channels=3)
    return x.clamp(0, 1) if x is not frames else x


def frames_to_tensor(frames: np.ndarray) -> torch.Tensor:
    """uint8 ``[T, H, W, C]`` -> float32 ``[T, C, H, W]`` in [0, 1]."""
    return torch.from_numpy(np.ascontiguousarray(frames)).permute(0, 3, 1, 2).float() / 255.0


@dataclass
class ClipPair:
    view_i: torch.Tensor
    view_j: torch.Tensor
    next_view_i: torch.Tensor
    next_view_j: torch.Tensor
    video_id: str
    start: int
    label: int | None = None


@dataclass
class ClipRngs:
    data: np.random.Generator
    view_i: np.random.Generator
    view_j: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "ClipRngs":
        return cls(numpy_stream(seed, "data"), numpy_stream(seed, "aug.view_i"), numpy_stream(seed, "aug.view_j"))


def clip_indices(start: int, spec: ClipSpec) -> np.ndarray:
    return start + spec.stride * np.arange(spec.frames)


def sample_clip_pair(video: Video, spec: ClipSpec, aug: AugmentParams, seed: int | ClipRngs) -> ClipPair:
    """Sample a clip and its successor from ``video`` and augment both into two views.

    Each view draws its own augmentation; the same draw is used for every
    frame of that view's current and following clip.
    """
    rngs = ClipRngs.from_seed(seed) if isinstance(seed, (int, np.integer)) else seed
    n = len(video)
    if n < spec.required_length:
        raise VideoTooShort(f"{video.video_id}: {n} frames < {spec.required_length} needed")
    start = int(rngs.data.integers(0, n - spec.required_length + 1))
    cur = frames_to_tensor(video.frames[clip_indices(start, spec)])
    nxt = frames_to_tensor(video.frames[clip_indices(start + spec.next_start, spec)])
    h, w = cur.shape[-2:]
    views = []
    for rng in (rngs.view_i, rngs.view_j):
        tf = sample_view_transform(h, w, aug, rng)
        views.append((apply_view_transform(cur, tf, spec.resolution), apply_view_transform(nxt, tf, spec.resolution)))
    (vi, ni), (vj, nj) = views
    return ClipPair(vi, vj, ni, nj, video.video_id, start, video.label)


def uniform_clip_starts(length: int, spec: ClipSpec, n_clips: int = 3) -> list[int]:
    """Evenly spaced start frames for ``n_clips`` evaluation clips."""
    if length < spec.span:
        raise VideoTooShort(f"{length} frames < clip span {spec.span}")
    return [int(round(s)) for s in np.linspace(0, length - spec.span, n_clips)]


def eval_clips(video: Video, spec: ClipSpec, n_clips: int = 3) -> torch.Tensor:
    """Un-augmented clips ``[n_clips, T, C, H, W]``, full frame resized to the clip resolution."""
    full = ViewTransform((0, 0, *video.frames.shape[1:3]))
    out = []
    for s in uniform_clip_starts(len(video), spec, n_clips):
        out.append(apply_view_transform(frames_to_tensor(video.frames[clip_indices(s, spec)]), full, spec.resolution))
    return torch.stack(out)
