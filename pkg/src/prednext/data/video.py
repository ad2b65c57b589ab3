from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np


@dataclass
class Video:
    """A decoded video: ``frames`` is uint8 ``[L, H, W, 3]``."""

    video_id: str
    frames: np.ndarray
    label: int | None = None

    def __len__(self):
        return len(self.frames)


class VideoDataset(Protocol):
    def __len__(self) -> int: ...

    def __getitem__(self, i: int) -> Video: ...

    @property
    def video_ids(self) -> Sequence[str]: ...

    @property
    def labels(self) -> Sequence[int | None]: ...


class InMemoryDataset:
    def __init__(self, videos: list[Video], num_classes: int | None = None):
        self.videos = list(videos)
        known = [v.label for v in self.videos if v.label is not None]
        self.num_classes = num_classes if num_classes is not None else (max(known) + 1 if known else 0)

    def __len__(self):
        return len(self.videos)

    def __getitem__(self, i):
        return self.videos[i]

    def __iter__(self):
        return iter(self.videos)

    @property
    def video_ids(self):
        return [v.video_id for v in self.videos]

    @property
    def labels(self):
        return [v.label for v in self.videos]

    def subset(self, indices) -> "InMemoryDataset":
        return InMemoryDataset([self.videos[i] for i in indices], self.num_classes)


def stratified_split(labels, val_fraction: float, rng: np.random.Generator):
    """Split indices into (train, val) keeping class proportions."""
    labels = np.asarray([-1 if y is None else y for y in labels])
    train, val = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        n_val = int(round(len(idx) * val_fraction))
        val.extend(idx[:n_val].tolist())
        train.extend(idx[n_val:].tolist())
    return sorted(train), sorted(val)
