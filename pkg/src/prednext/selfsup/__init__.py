from .heads import MLPHead, MomentumTarget, NegativeQueue, PredictorHead, ProjectionHead, momentum_update, queue_push
from .losses import barlow_twins_loss, cosine, cosine_pred_loss, info_nce_loss, l2_normalize
from .methods import METHODS, MethodConfig, SSLMethod, SSLOutput, build_method, ssl_forward

__all__ = [
    "METHODS",
    "MLPHead",
    "MethodConfig",
    "MomentumTarget",
    "NegativeQueue",
    "PredictorHead",
    "ProjectionHead",
    "SSLMethod",
    "SSLOutput",
    "barlow_twins_loss",
    "build_method",
    "cosine",
    "cosine_pred_loss",
    "info_nce_loss",
    "l2_normalize",
    "momentum_update",
    "queue_push",
    "ssl_forward",
]
