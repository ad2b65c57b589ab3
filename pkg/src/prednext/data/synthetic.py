"""Synthetic videos whose class is carried only by motion.

Each video shows a few soft-edged dots drifting over a faint static texture.
Dot positions are uniformly random, so a single frame says nothing about the
class; the class fixes the common drift direction (``2*pi*k / n_classes``),
with wrap-around at the borders. Dot colour is fixed: a per-video colour would
be the easiest feature for an instance-level objective to latch onto and
would drown the motion signal at this scale. Speed, dot size and the texture
vary per video.
"""

from __future__ import annotations

import numpy as np

from .video import InMemoryDataset, Video

DOT_COLOR = np.array([0.95, 0.9, 0.3])
N_DOTS = 5


def _background(rng, h, w):
    coarse = 0.3 + rng.uniform(-0.04, 0.04, size=(h // 4 + 1, w // 4 + 1, 1))
    return np.repeat(np.repeat(coarse, 4, axis=0), 4, axis=1)[:h, :w] * np.ones(3)


def render_video(label: int, n_classes: int, length: int, resolution, rng, start=None, speed=None) -> np.ndarray:
    """``[length, H, W, 3]`` uint8 frames; ``start`` is one ``(y, x)`` or an array of dot positions."""
    h, w = resolution
    bg = _background(rng, h, w)
    radius = rng.uniform(0.07, 0.09) * min(h, w)
    speed = rng.uniform(0.07, 0.09) * min(h, w) if speed is None else speed
    angle = 2 * np.pi * label / n_classes
    vel = speed * np.array([np.sin(angle), np.cos(angle)])
    if start is None:
        pos = rng.uniform(0, 1, size=(N_DOTS, 2)) * (h, w)
    else:
        pos = np.atleast_2d(np.asarray(start, float))
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    frames = np.empty((length, h, w, 3), dtype=np.uint8)
    for t in range(length):
        alpha = np.zeros((h, w))
        for cy, cx in pos + t * vel:
            dy = (yy - cy + h / 2) % h - h / 2
            dx = (xx - cx + w / 2) % w - w / 2
            alpha = np.maximum(alpha, np.clip(radius + 0.5 - np.hypot(dy, dx), 0, 1))
        a = alpha[..., None]
        frames[t] = np.clip(np.round((bg * (1 - a) + DOT_COLOR * a) * 255), 0, 255).astype(np.uint8)
    return frames


def synth_dataset(n_classes: int, n_videos: int, length: int, resolution=(32, 32), seed: int = 0) -> InMemoryDataset:
    """Balanced dataset of ``n_videos`` drifting-dot videos (labels cycle through the classes)."""
    if n_classes < 2:
        raise ValueError("synthetic dataset needs at least two classes")
    rng = np.random.default_rng(seed)
    videos = []
    for i in range(n_videos):
        label = i % n_classes
        frames = render_video(label, n_classes, length, tuple(resolution), rng)
        videos.append(Video(f"synth_{i:05d}", frames, label))
    return InMemoryDataset(videos, n_classes)
