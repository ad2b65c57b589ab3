"""Self-supervised loss functions. All are means over the batch."""

from __future__ import annotations

import torch
import torch.nn.functional as F

EPS = 1e-8


def l2_normalize(x: torch.Tensor, dim: int = -1) -> torch.Tensor:
    return x / x.norm(dim=dim, keepdim=True).clamp_min(EPS)


def cosine(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Row-wise cosine similarity over the last dimension, eps-stabilised."""
    return (l2_normalize(a) * l2_normalize(b)).sum(-1)


def info_nce_loss(z_i, z_j, negatives=None, tau: float = 0.5) -> torch.Tensor:
    """InfoNCE with the positive included in the denominator.

    Without ``negatives`` this is the symmetric NT-Xent loss: each of the 2B
    views is contrasted against its partner and the other 2B-2 in-batch
    views. With ``negatives`` (``[K, D]``, e.g. a queue) ``z_i`` are queries,
    ``z_j`` keys, and only the queue supplies negatives.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    if negatives is None:
        b = z_i.shape[0]
        if b < 2:
            raise ValueError("in-batch InfoNCE needs a batch of at least 2")
        z = l2_normalize(torch.cat([z_i, z_j]))
        sim = z @ z.T / tau
        sim = sim.masked_fill(torch.eye(2 * b, dtype=torch.bool, device=z.device), float("-inf"))
        target = torch.cat([torch.arange(b, 2 * b), torch.arange(b)]).to(z.device)
        return F.cross_entropy(sim, target)
    q, k = l2_normalize(z_i), l2_normalize(z_j)
    l_pos = (q * k).sum(-1, keepdim=True)
    l_neg = q @ l2_normalize(negatives).T
    logits = torch.cat([l_pos, l_neg], dim=1) / tau
    return F.cross_entropy(logits, torch.zeros(len(q), dtype=torch.long, device=q.device))


def cosine_pred_loss(p, z_target, stop_grad: bool = True) -> torch.Tensor:
    """``mean(1 - cos(p, z_target))``; the target is detached unless ``stop_grad=False``."""
    if stop_grad:
        z_target = z_target.detach()
    return (1 - cosine(p, z_target)).mean()


def barlow_twins_loss(z_i, z_j, lambda_bt: float = 5e-3) -> torch.Tensor:
    """Redundancy reduction on the cross-correlation of batch-standardised views."""
    b = z_i.shape[0]
    if b < 2:
        raise ValueError("Barlow Twins needs a batch of at least 2")

    def standardize(z):
        z = z - z.mean(0)
        return z / torch.sqrt((z**2).mean(0) + EPS)

    c = standardize(z_i).T @ standardize(z_j) / b
    diag = torch.diagonal(c)
    on = ((1 - diag) ** 2).sum()
    off = (c**2).sum() - (diag**2).sum()
    return on + lambda_bt * off
