"""Cross-view future prediction: step and clip prediction heads and losses.

Two heads sit on top of the per-timestep projected features ``z^t``:

* the step predictor maps ``z_i^t`` to the feature ``m`` steps later in the
  other view, ``z_j^{t+m}``;
* the clip predictor maps the time-averaged feature of the current clip to
  the time-averaged feature ``z_j^*`` of the clip that follows it.

Both losses are negative cosine similarities, symmetrised over the two
views. The per-step cosine is averaged over the ``T - m`` valid steps, so both
losses live in ``[-1, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import ConfigError
from .selfsup.heads import MLPHead
from .selfsup.losses import cosine, l2_normalize

COMPOSITIONS = ("averaged", "algorithm")
VIEW_MODES = {
    "cross": dict(cross_view=True, standalone=False),
    "same": dict(cross_view=False, standalone=False),
    "cross_only": dict(cross_view=True, standalone=True),
    "same_only": dict(cross_view=False, standalone=True),
}


@dataclass
class PredNextConfig:
    enabled: bool = True
    alpha: float = 0.5
    step_interval: int = 1
    hidden_dim: int = 512
    cross_view: bool = True
    # Train on the prediction loss alone, without the self-supervised term.
    standalone: bool = False
    include_step: bool = True
    include_clip: bool = True
    target_stop_grad: bool = True
    # "averaged": l_pred = (l_step + l_clip) / 2 with per-step means.
    # "algorithm": 0.25 * (sum_t Q_i + sum_t Q_j + M_i + M_j) with per-step sums.
    composition: str = "averaged"

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ConfigError(f"prednext.alpha must lie in [0, 1], got {self.alpha}")
        if self.step_interval < 1:
            raise ConfigError("prednext.step_interval must be a positive integer")
        if self.hidden_dim < 1:
            raise ConfigError("prednext.hidden_dim must be positive")
        if self.enabled and not (self.include_step or self.include_clip):
            raise ConfigError("prednext needs at least one of include_step / include_clip")
        if self.composition not in COMPOSITIONS:
            raise ConfigError(f"prednext.composition must be one of {COMPOSITIONS}")

    @property
    def effective_alpha(self) -> float:
        return 1.0 if self.standalone else self.alpha

    @property
    def view_mode(self) -> str:
        for name, flags in VIEW_MODES.items():
            if flags == dict(cross_view=self.cross_view, standalone=self.standalone):
                return name
        raise AssertionError("unreachable")


class StepPredictor(MLPHead):
    """Predicts the projected feature ``m`` timesteps ahead."""

    def __init__(self, dim: int, hidden_dim: int = 512):
        super().__init__(dim, hidden_dim, dim)


class ClipPredictor(MLPHead):
    """Predicts the aggregated feature of the following clip."""

    def __init__(self, dim: int, hidden_dim: int = 512):
        super().__init__(dim, hidden_dim, dim)


class PredictionHeads(nn.Module):
    def __init__(self, dim: int, cfg: PredNextConfig):
        super().__init__()
        self.step = StepPredictor(dim, cfg.hidden_dim)
        self.clip = ClipPredictor(dim, cfg.hidden_dim)


@dataclass
class LossBreakdown:
    l_ssl: torch.Tensor
    l_step: torch.Tensor
    l_clip: torch.Tensor
    l_pred: torch.Tensor
    l_forced: torch.Tensor
    total: torch.Tensor

    KEYS = ("l_ssl", "l_step", "l_clip", "l_pred", "l_forced", "total")

    def as_dict(self) -> dict[str, float]:
        return {k: float(getattr(self, k).detach()) for k in self.KEYS}


def _step_term(p_src, z_tgt, predictor, m, stop_grad):
    pred = predictor(p_src[:, :-m])
    target = z_tgt[:, m:]
    if stop_grad:
        target = target.detach()
    return -cosine(pred, target).mean()


def step_pred_loss(z_i, z_j, predictor, m: int = 1, cross_view: bool = True, stop_grad: bool = True):
    """Symmetric step-prediction loss on ``[B, T, D]`` projected sequences."""
    t = z_i.shape[1]
    if not 1 <= m <= t - 1:
        raise ValueError(f"step interval m={m} needs 1 <= m <= T-1 with T={t}")
    tgt_i, tgt_j = (z_j, z_i) if cross_view else (z_i, z_j)
    return 0.5 * _step_term(z_i, tgt_i, predictor, m, stop_grad) + 0.5 * _step_term(
        z_j, tgt_j, predictor, m, stop_grad
    )


def clip_pred_loss(agg_i, agg_j, next_i, next_j, predictor, cross_view: bool = True, stop_grad: bool = True):
    """Symmetric clip-prediction loss; ``next_*`` are aggregated features of the following clip."""
    if next_i is None or next_j is None:
        raise ValueError("clip prediction needs the aggregated features of the following clip")
    tgt_i, tgt_j = (next_j, next_i) if cross_view else (next_i, next_j)
    if stop_grad:
        tgt_i, tgt_j = tgt_i.detach(), tgt_j.detach()
    return -0.5 * cosine(predictor(agg_i), tgt_i).mean() - 0.5 * cosine(predictor(agg_j), tgt_j).mean()


def compose_total(l_ssl, l_step, l_clip, cfg: PredNextConfig, n_steps: int | None = None, l_forced=None, beta=0.0):
    """Combine the loss terms into a :class:`LossBreakdown`.

    Inactive terms are passed as ``None`` and reported as zero. ``n_steps``
    (``T - m``) is only needed for the ``algorithm`` composition, which sums
    rather than averages the per-step cosines.
    """
    ref = next(x for x in (l_ssl, l_step, l_clip, l_forced) if x is not None)
    zero = torch.zeros((), dtype=ref.dtype, device=ref.device)
    l_ssl = zero if l_ssl is None else l_ssl
    has_step, has_clip = l_step is not None, l_clip is not None
    l_step = zero if l_step is None else l_step
    l_clip = zero if l_clip is None else l_clip
    if cfg.composition == "algorithm":
        if has_step and n_steps is None:
            raise ValueError("the algorithm composition needs n_steps = T - m")
        l_pred = zero
        if has_step:
            l_pred = l_pred + 0.5 * n_steps * l_step
        if has_clip:
            l_pred = l_pred + 0.5 * l_clip
    elif has_step and has_clip:
        l_pred = 0.5 * l_step + 0.5 * l_clip
    elif has_step:
        l_pred = l_step
    elif has_clip:
        l_pred = l_clip
    else:
        l_pred = zero
    if cfg.enabled and (has_step or has_clip):
        alpha = cfg.effective_alpha
        total = l_pred if alpha == 1 else (l_ssl if alpha == 0 else (1 - alpha) * l_ssl + alpha * l_pred)
    else:
        total = l_ssl
    if l_forced is not None:
        total = total + beta * l_forced
    else:
        l_forced = zero
    return LossBreakdown(l_ssl, l_step, l_clip, l_pred, l_forced, total)


def pairwise_cosine_distance(f: torch.Tensor) -> torch.Tensor:
    """Mean of ``1 - cos(f^t, f^s)`` over all samples and ordered pairs ``t != s``."""
    b, t, _ = f.shape
    if t < 2:
        raise ValueError("temporal consistency needs at least two timesteps")
    u = l2_normalize(f)
    gram = u @ u.transpose(1, 2)
    off = gram.sum(dim=(1, 2)) - torch.diagonal(gram, dim1=1, dim2=2).sum(-1)
    return (1 - off / (t * (t - 1))).mean()


def forced_consistency_loss(f: torch.Tensor, beta: float = 1.0) -> torch.Tensor:
    """Penalty ``beta * E[1 - cos(f^t, f^s)]`` to be added to the self-supervised loss."""
    return beta * pairwise_cosine_distance(f)
