"""Independent scalar re-implementations used as test oracles.

Everything here is plain Python loops over floats, written without reference
to the vectorised code paths it checks.
"""

from __future__ import annotations

import math
import random

import torch


def cos(a, b):
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    return sum(x * y for x, y in zip(a, b)) / (max(na, 1e-8) * max(nb, 1e-8))


def consistency_error(feats):
    """feats: list over videos of list over timesteps of vectors."""
    n, t = len(feats), len(feats[0])
    total = 0.0
    for video in feats:
        for a in range(t):
            for b in range(t):
                if a != b:
                    total += 1 - cos(video[a], video[b])
    return total / (n * t * (t - 1))


def knn(train_x, train_y, query_x, query_y, k):
    """Brute-force cosine k-NN with the documented tie-breaking; returns (top1, top5)."""
    n_classes = max(train_y) + 1
    hits1 = hits5 = 0
    for q, y in zip(query_x, query_y):
        sims = [(cos(q, x), i) for i, x in enumerate(train_x)]
        sims.sort(key=lambda s: (-s[0], s[1]))
        votes = [0] * n_classes
        sums = [0.0] * n_classes
        for s, i in sims[:k]:
            votes[train_y[i]] += 1
            sums[train_y[i]] += s
        ranking = sorted(range(n_classes), key=lambda c: (-votes[c], -sums[c], c))
        hits1 += ranking[0] == y
        hits5 += y in ranking[:5]
    return hits1 / len(query_x), hits5 / len(query_x)


def recall_at(query_x, query_y, gallery_x, gallery_y, ks):
    out = {}
    for k in ks:
        hits = 0
        for q, y in zip(query_x, query_y):
            sims = sorted(((cos(q, g), i) for i, g in enumerate(gallery_x)), key=lambda s: (-s[0], s[1]))
            hits += any(gallery_y[i] == y for _, i in sims[:k])
        out[k] = hits / len(query_x)
    return out


def conv2d(img, weight, stride=1):
    """img: [C][H][W] lists, weight: [O][C][k][k] with odd k; zero padding k // 2."""
    c_in, h, w = len(img), len(img[0]), len(img[0][0])
    k = len(weight[0][0])
    pad = k // 2
    ho, wo = (h + 2 * pad - k) // stride + 1, (w + 2 * pad - k) // stride + 1
    out = [[[0.0] * wo for _ in range(ho)] for _ in weight]
    for o, wk in enumerate(weight):
        for yo in range(ho):
            for xo in range(wo):
                acc = 0.0
                for c in range(c_in):
                    for dy in range(k):
                        for dx in range(k):
                            y, x = yo * stride + dy - pad, xo * stride + dx - pad
                            if 0 <= y < h and 0 <= x < w:
                                acc += wk[c][dy][dx] * img[c][y][x]
                out[o][yo][xo] = acc
    return out


def batchnorm_train(maps, gamma, beta, eps=1e-5):
    """maps: [B][C][H][W] at one timestep; statistics over batch and space per channel."""
    b, c = len(maps), len(maps[0])
    out = [[None] * c for _ in range(b)]
    for ch in range(c):
        vals = [v for n in range(b) for row in maps[n][ch] for v in row]
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / len(vals)
        for n in range(b):
            out[n][ch] = [[(v - mean) / math.sqrt(var + eps) * gamma[ch] + beta[ch] for v in row] for row in maps[n][ch]]
    return out


def lif_sequence(currents, threshold, tau):
    """currents: list over time of nested lists; hard reset to zero."""

    def step(v, x):
        if isinstance(v, list):
            pairs = [step(a, b) for a, b in zip(v, x)]
            return [p[0] for p in pairs], [p[1] for p in pairs]
        h = v + (x - v) / tau
        s = 1.0 if h >= threshold else 0.0
        return h * (1 - s), s

    def zeros(x):
        return [zeros(e) for e in x] if isinstance(x, list) else 0.0

    v = zeros(currents[0])
    spikes = []
    for x in currents:
        v, s = step(v, x)
        spikes.append(s)
    return spikes


def finite_difference_check(loss_fn, params, n_coords=100, h=1e-6, seed=0, floor=1e-6):
    """Compare autograd gradients with central differences on random coordinates.

    Returns the list of relative errors ``|a - n| / max(|a|, |n|, floor)``.
    """
    rng = random.Random(seed)
    params = [p for p in params if p.requires_grad]
    for p in params:
        p.grad = None
    loss_fn().backward()
    grads = [p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p) for p in params]
    sizes = [p.numel() for p in params]
    total = sum(sizes)
    picks = rng.sample(range(total), min(n_coords, total))
    errors = []
    with torch.no_grad():
        for flat in picks:
            k = 0
            while flat >= sizes[k]:
                flat -= sizes[k]
                k += 1
            p = params[k].view(-1)
            orig = p[flat].item()
            p[flat] = orig + h
            up = loss_fn().item()
            p[flat] = orig - h
            down = loss_fn().item()
            p[flat] = orig
            numeric = (up - down) / (2 * h)
            analytic = grads[k].view(-1)[flat].item()
            errors.append(abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor))
    return errors
