"""Deterministic pretraining batches. Labels never reach the training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch

from .clips import AugmentParams, ClipRngs, ClipSpec, VideoTooShort, sample_clip_pair
from .folders import VideoDecodeError

log = logging.getLogger(__name__)


@dataclass
class PretrainBatch:
    view_i: torch.Tensor
    view_j: torch.Tensor
    next_i: torch.Tensor
    next_j: torch.Tensor

    def __len__(self):
        return self.view_i.shape[0]


class PretrainLoader:
    """Shuffled two-view batches; ``drop_last`` keeps batch statistics well defined."""

    def __init__(self, dataset, spec: ClipSpec, aug: AugmentParams, batch_size: int, seed: int):
        if batch_size < 2:
            raise ValueError("pretraining batches need at least two videos")
        self.dataset, self.spec, self.aug = dataset, spec, aug
        self.batch_size = batch_size
        self.rngs = ClipRngs.from_seed(seed)
        self.skipped: dict[str, str] = {}

    def __len__(self):
        return len(self.dataset) // self.batch_size

    def __iter__(self):
        order = self.rngs.data.permutation(len(self.dataset))
        pairs = []
        for idx in order:
            try:
                video = self.dataset[int(idx)]
                pairs.append(sample_clip_pair(video, self.spec, self.aug, self.rngs))
            except (VideoTooShort, VideoDecodeError) as exc:
                self.skipped[str(idx)] = str(exc)
                log.debug("skipping video %s: %s", idx, exc)
                continue
            if len(pairs) == self.batch_size:
                yield collate(pairs)
                pairs = []


def collate(pairs) -> PretrainBatch:
    return PretrainBatch(
        torch.stack([p.view_i for p in pairs]),
        torch.stack([p.view_j for p in pairs]),
        torch.stack([p.next_view_i for p in pairs]),
        torch.stack([p.next_view_j for p in pairs]),
    )
