from .bank import FeatureBank, extract_bank, load_bank, save_bank
from .metrics import collapse_metric, consistency_error, knn_eval, knn_predict, retrieval_eval, RetrievalResult
from .probe import finetune, linear_probe, probe_eval
from .report import CurveWriter, EvalReport, build_report, read_curves

__all__ = [
    "CurveWriter",
    "EvalReport",
    "FeatureBank",
    "RetrievalResult",
    "build_report",
    "collapse_metric",
    "consistency_error",
    "extract_bank",
    "finetune",
    "knn_eval",
    "knn_predict",
    "linear_probe",
    "load_bank",
    "probe_eval",
    "read_curves",
    "retrieval_eval",
    "save_bank",
]
