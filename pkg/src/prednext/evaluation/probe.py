"""Supervised read-outs: linear probe on frozen features, or end-to-end fine-tuning."""

from __future__ import annotations

import copy
import math

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.clips import clip_indices, eval_clips, frames_to_tensor, apply_view_transform, ViewTransform
from ..data.seeding import numpy_stream, torch_stream
from .bank import FeatureBank, extract_bank


def _topk(probs: torch.Tensor, labels: torch.Tensor) -> tuple[float, float]:
    k = min(5, probs.shape[1])
    top = probs.topk(k, dim=1).indices
    top1 = (top[:, 0] == labels).double().mean().item()
    top5 = (top == labels[:, None]).any(1).double().mean().item()
    return top1, top5


def linear_probe(train: FeatureBank, test: FeatureBank, epochs: int = 200, lr: float = 0.05, seed: int = 0):
    """Softmax regression on standardised per-clip features; test predictions average 3 clips."""
    n_classes = int(max(train.labels.max(), test.labels.max())) + 1
    x_tr = torch.from_numpy(train.clip_features).double()
    c = x_tr.shape[1]
    x_tr = x_tr.reshape(-1, x_tr.shape[-1])
    y_tr = torch.from_numpy(train.labels).repeat_interleave(c)
    mu, sd = x_tr.mean(0), x_tr.std(0).clamp_min(1e-6)
    gen = torch_stream(seed, "init")
    head = nn.Linear(x_tr.shape[1], n_classes).double()
    with torch.no_grad():
        head.weight.copy_(torch.randn(head.weight.shape, generator=gen, dtype=torch.float64) * 0.01)
        head.bias.zero_()
    opt = torch.optim.Adam(head.parameters(), lr=lr)
    x_n = (x_tr - mu) / sd
    for _ in range(epochs):
        opt.zero_grad()
        F.cross_entropy(head(x_n), y_tr).backward()
        opt.step()
    x_te = (torch.from_numpy(test.clip_features).double() - mu) / sd
    with torch.no_grad():
        probs = F.softmax(head(x_te), dim=-1).mean(1)
    return _topk(probs, torch.from_numpy(test.labels))


class _Classifier(nn.Module):
    def __init__(self, encoder, n_classes):
        super().__init__()
        self.encoder = encoder
        self.head = nn.Linear(encoder.feature_dim, n_classes)

    def forward(self, clip):
        return self.head(self.encoder(clip).aggregate)


def finetune(encoder, train_ds, test_ds, spec, epochs: int = 5, lr: float = 3e-4, batch_size: int = 16, seed: int = 0):
    """Train encoder + linear head end to end (AdamW, no weight decay, cosine schedule)."""
    n_classes = int(max(train_ds.labels + test_ds.labels)) + 1
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        model = _Classifier(copy.deepcopy(encoder), n_classes)
    dtype = next(encoder.parameters()).dtype
    model.to(dtype)
    opt = torch.optim.AdamW(model.parameters(), lr=lr, weight_decay=0.0)
    steps = max(1, epochs * (len(train_ds) // batch_size))
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lambda s: 0.5 * (1 + math.cos(math.pi * min(s, steps) / steps)))
    rng = numpy_stream(seed, "data")
    model.train()
    for _ in range(epochs):
        order = rng.permutation(len(train_ds))
        for b in range(0, len(order) - batch_size + 1, batch_size):
            clips, labels = [], []
            for i in order[b : b + batch_size]:
                v = train_ds[int(i)]
                start = int(rng.integers(0, len(v) - spec.span + 1))
                full = ViewTransform((0, 0, *v.frames.shape[1:3]))
                frames = frames_to_tensor(v.frames[clip_indices(start, spec)])
                clips.append(apply_view_transform(frames, full, spec.resolution))
                labels.append(v.label)
            opt.zero_grad()
            F.cross_entropy(model(torch.stack(clips).to(dtype)), torch.tensor(labels)).backward()
            opt.step()
            sched.step()
    model.eval()
    probs, labels = [], []
    with torch.no_grad():
        for v in test_ds:
            clips = eval_clips(v, spec).to(dtype)
            probs.append(F.softmax(model(clips), dim=-1).mean(0))
            labels.append(v.label)
    return _topk(torch.stack(probs), torch.tensor(labels))


def probe_eval(encoder, train_ds, test_ds, spec, mode: str = "linear", epochs: int | None = None, seed: int = 0):
    """Top-1 / top-5 of a linear probe (frozen encoder) or a fine-tuned classifier."""
    if mode == "linear":
        tr = extract_bank(encoder, train_ds, spec)
        te = extract_bank(encoder, test_ds, spec)
        return linear_probe(tr, te, epochs=epochs or 200, seed=seed)
    if mode == "finetune":
        return finetune(encoder, train_ds, test_ds, spec, epochs=epochs or 5, seed=seed)
    raise ValueError(f"unknown probe mode {mode!r}")
