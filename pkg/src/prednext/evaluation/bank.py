"""Feature banks and their on-disk form (``.npy`` arrays plus a JSON sidecar)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..data.clips import eval_clips

BANK_FORMAT = "prednext-bank-v1"


@dataclass
class FeatureBank:
    features: np.ndarray  # [N, D] time- and clip-averaged
    labels: np.ndarray  # [N], -1 when unlabelled
    video_ids: list[str]
    per_step: np.ndarray | None = None  # [N, T, D] of the middle evaluation clip
    clip_features: np.ndarray | None = None  # [N, n_clips, D]

    def __post_init__(self):
        n = len(self.features)
        if len(self.labels) != n or len(self.video_ids) != n:
            raise ValueError("features, labels and ids must have the same length")
        for arr in (self.per_step, self.clip_features):
            if arr is not None and len(arr) != n:
                raise ValueError("per-step / per-clip features must have one row per video")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("feature bank contains non-finite values")

    def __len__(self):
        return len(self.features)


@torch.no_grad()
def extract_bank(encoder, dataset, spec, n_clips: int = 3, batch_size: int = 32, indices=None) -> FeatureBank:
    """Encode ``n_clips`` uniformly spaced clips per video with the encoder in eval mode."""
    was_training = encoder.training
    encoder.eval()
    indices = range(len(dataset)) if indices is None else indices
    videos = [dataset[i] for i in indices]
    dtype = next(encoder.parameters()).dtype
    clip_feats, steps = [], []
    for b in range(0, len(videos), batch_size):
        chunk = videos[b : b + batch_size]
        clips = torch.stack([eval_clips(v, spec, n_clips) for v in chunk]).to(dtype)
        k = clips.shape[1]
        out = encoder(clips.flatten(0, 1))
        clip_feats.append(out.aggregate.reshape(len(chunk), k, -1))
        steps.append(out.per_step.reshape(len(chunk), k, *out.per_step.shape[1:])[:, k // 2])
    encoder.train(was_training)
    cf = torch.cat(clip_feats).double().numpy()
    labels = np.array([-1 if v.label is None else v.label for v in videos], dtype=np.int64)
    return FeatureBank(
        features=cf.mean(axis=1),
        labels=labels,
        video_ids=[v.video_id for v in videos],
        per_step=torch.cat(steps).double().numpy(),
        clip_features=cf,
    )


def save_bank(bank: FeatureBank, stem) -> Path:
    """Write ``<stem>.features.npy`` (+ per-step/per-clip arrays) and ``<stem>.json``."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    files = {"features": f"{stem.name}.features.npy"}
    np.save(stem.parent / files["features"], np.asarray(bank.features, dtype="<f8"))
    for key in ("per_step", "clip_features"):
        arr = getattr(bank, key)
        if arr is not None:
            files[key] = f"{stem.name}.{key}.npy"
            np.save(stem.parent / files[key], np.asarray(arr, dtype="<f8"))
    meta = {
        "format": BANK_FORMAT,
        "files": files,
        "video_ids": list(bank.video_ids),
        "labels": [int(y) for y in bank.labels],
        "dims": {k: list(np.shape(getattr(bank, k))) for k in files},
    }
    sidecar = stem.parent / f"{stem.name}.json"
    sidecar.write_text(json.dumps(meta, indent=1), encoding="utf-8")
    return sidecar


def load_bank(stem) -> FeatureBank:
    stem = Path(stem)
    if stem.suffix == ".json":
        stem = stem.with_suffix("")
    meta = json.loads((stem.parent / f"{stem.name}.json").read_text(encoding="utf-8"))
    if meta.get("format") != BANK_FORMAT:
        raise ValueError(f"unsupported feature bank format {meta.get('format')!r}")
    arrays = {k: np.load(stem.parent / f) for k, f in meta["files"].items()}
    return FeatureBank(
        features=arrays["features"],
        labels=np.array(meta["labels"], dtype=np.int64),
        video_ids=meta["video_ids"],
        per_step=arrays.get("per_step"),
        clip_features=arrays.get("clip_features"),
    )


@torch.no_grad()
def calibrate_batchnorm(encoder, dataset, spec, n_videos: int = 128, batch_size: int = 32) -> None:
    """Re-estimate batch-norm running statistics from un-augmented clips.

    Needed before evaluating an encoder that never trained (its running
    statistics are still the identity), e.g. the random-encoder reference.
    """
    from ..snn.encoder import TimestepBatchNorm

    bns = [m for m in encoder.modules() if isinstance(m, (TimestepBatchNorm, torch.nn.BatchNorm1d, torch.nn.BatchNorm2d))]
    saved = [m.momentum for m in bns]
    for m in bns:
        m.running_mean.zero_()
        m.running_var.fill_(1)
    was_training = encoder.training
    encoder.train()
    dtype = next(encoder.parameters()).dtype
    n = min(n_videos, len(dataset))
    chunks = [range(b, min(b + batch_size, n)) for b in range(0, n, batch_size)]
    for k, chunk in enumerate(chunks):
        for m in bns:
            m.momentum = 1.0 / (k + 1)
        clips = torch.stack([eval_clips(dataset[i], spec, 1)[0] for i in chunk]).to(dtype)
        encoder(clips)
    for m, mom in zip(bns, saved):
        m.momentum = mom
    encoder.train(was_training)
