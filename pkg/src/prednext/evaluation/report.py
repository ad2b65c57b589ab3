from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .bank import FeatureBank
from .metrics import collapse_metric, consistency_error, knn_eval, retrieval_eval

CURVE_FIELDS = ("epoch", "consistency_error", "consistency", "knn_top1", "knn_top5")


@dataclass
class EvalReport:
    consistency_error: float
    consistency: float
    knn_top1: float
    knn_top5: float
    recall_at: dict[int, float] = field(default_factory=dict)
    collapse_std: float = 0.0
    probe_top1: float | None = None
    probe_top5: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["recall_at"] = {str(k): v for k, v in self.recall_at.items()}
        return d

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True), encoding="utf-8")

    @classmethod
    def read_json(cls, path) -> "EvalReport":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        d["recall_at"] = {int(k): v for k, v in d["recall_at"].items()}
        return cls(**d)


def build_report(train_bank: FeatureBank, test_bank: FeatureBank, knn_k: int = 10, recall_ks=(1, 5, 10, 20)):
    """All bank-level metrics; returns ``(EvalReport, RetrievalResult)``.

    The test bank doubles as retrieval queries and the train bank as gallery.
    """
    err, cons = consistency_error(test_bank.per_step)
    top1, top5 = knn_eval(train_bank, test_bank, k=min(knn_k, len(train_bank)))
    ks = [k for k in recall_ks if k <= len(train_bank)]
    retrieval = retrieval_eval(test_bank, train_bank, ks)
    report = EvalReport(err, cons, top1, top5, retrieval.recall, collapse_metric(test_bank))
    return report, retrieval


class CurveWriter:
    """Appends one row per epoch to ``curves.csv``."""

    def __init__(self, path):
        self.path = Path(path)
        with open(self.path, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerow(CURVE_FIELDS)

    def append(self, epoch: int, report: EvalReport) -> None:
        with open(self.path, "a", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerow(
                [epoch, repr(report.consistency_error), repr(report.consistency), repr(report.knn_top1), repr(report.knn_top5)]
            )


def read_curves(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [{k: (int(v) if k == "epoch" else float(v)) for k, v in row.items()} for row in csv.DictReader(fh)]
