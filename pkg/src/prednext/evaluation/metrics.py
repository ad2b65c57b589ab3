"""Representation metrics over feature banks: consistency, k-NN, retrieval, collapse.

All similarities are cosine, computed in float64. Ties are broken
deterministically: neighbours by similarity then index, classes by vote
count, then summed similarity, then class id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bank import FeatureBank

EPS = 1e-8


def _normalize(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x / np.maximum(np.linalg.norm(x, axis=-1, keepdims=True), EPS)


def consistency_error(per_step_feats) -> tuple[float, float]:
    """Mean cosine distance between different timesteps of the same video.

    Returns ``(error, consistency)`` where ``consistency`` is the mean
    pairwise cosine similarity, i.e. ``1 - error``.
    """
    f = np.asarray(per_step_feats, dtype=np.float64)
    if f.ndim != 3:
        raise ValueError(f"expected [N, T, D] features, got shape {f.shape}")
    n, t, _ = f.shape
    if t < 2:
        raise ValueError("consistency needs at least two timesteps")
    u = _normalize(f)
    gram = u @ u.transpose(0, 2, 1)
    pair_sum = gram.sum(axis=(1, 2)) - np.trace(gram, axis1=1, axis2=2)
    mean_cos = float(pair_sum.sum() / (n * t * (t - 1)))
    return 1.0 - mean_cos, mean_cos


def _nearest(query, gallery, k):
    sim = _normalize(query) @ _normalize(gallery).T
    idx = np.empty((len(query), k), dtype=np.int64)
    cols = np.arange(sim.shape[1])
    for q in range(len(query)):
        order = np.lexsort((cols, -sim[q]))
        idx[q] = order[:k]
    return idx, np.take_along_axis(sim, idx, axis=1)


def rank_classes(neigh_labels, neigh_sims, n_classes: int) -> list[int]:
    votes = np.bincount(neigh_labels, minlength=n_classes)
    sims = np.bincount(neigh_labels, weights=neigh_sims, minlength=n_classes)
    return sorted(range(n_classes), key=lambda c: (-votes[c], -sims[c], c))


def knn_predict(train: FeatureBank, query_feats, k: int = 10) -> np.ndarray:
    """Class ranking per query, shape ``[Q, C]`` (best first)."""
    if not 1 <= k <= len(train):
        raise ValueError(f"k={k} must lie in [1, {len(train)}]")
    if np.any(train.labels < 0):
        raise ValueError("k-NN needs a fully labelled training bank")
    n_classes = int(train.labels.max()) + 1
    idx, sims = _nearest(query_feats, train.features, k)
    return np.array([rank_classes(train.labels[i], s, n_classes) for i, s in zip(idx, sims)])


def knn_eval(train_bank: FeatureBank, test_bank: FeatureBank, k: int = 10) -> tuple[float, float]:
    """Top-1 / top-5 accuracy of a cosine k-NN majority vote."""
    ranking = knn_predict(train_bank, test_bank.features, k)
    y = test_bank.labels[:, None]
    top1 = float(np.mean(ranking[:, :1] == y))
    top5 = float(np.mean(np.any(ranking[:, :5] == y, axis=1)))
    return top1, top5


@dataclass
class RetrievalResult:
    recall: dict[int, float]
    neighbours: list[dict]  # per query: id, label, ranked gallery ids


def retrieval_eval(query_bank: FeatureBank, gallery_bank: FeatureBank, ks=(1, 5, 10, 20)) -> RetrievalResult:
    """Recall@K: fraction of queries with a same-class item among the K nearest gallery videos."""
    ks = [int(k) for k in ks]
    if ks != sorted(ks) or not ks:
        raise ValueError("ks must be a non-empty ascending list")
    if ks[0] < 1 or ks[-1] > len(gallery_bank):
        raise ValueError(f"K must lie in [1, {len(gallery_bank)}], got {ks}")
    kmax = ks[-1]
    idx, _ = _nearest(query_bank.features, gallery_bank.features, kmax)
    hit = gallery_bank.labels[idx] == query_bank.labels[:, None]
    first_hit = np.where(hit.any(axis=1), hit.argmax(axis=1), kmax)
    recall = {k: float(np.mean(first_hit < k)) for k in ks}
    neighbours = [
        {
            "query": query_bank.video_ids[q],
            "label": int(query_bank.labels[q]),
            "retrieved": [gallery_bank.video_ids[i] for i in idx[q]],
            "retrieved_labels": [int(gallery_bank.labels[i]) for i in idx[q]],
        }
        for q in range(len(query_bank))
    ]
    return RetrievalResult(recall, neighbours)


def collapse_metric(bank_or_feats) -> float:
    """Mean per-dimension std of L2-normalised features; near zero means collapse."""
    feats = bank_or_feats.features if isinstance(bank_or_feats, FeatureBank) else bank_or_feats
    feats = np.asarray(feats, dtype=np.float64)
    if len(feats) < 2:
        raise ValueError("collapse metric needs at least two feature vectors")
    return float(_normalize(feats).std(axis=0).mean())
