"""Pretrain SimSiam with and without next-step prediction on the synthetic set.

Both runs share one seed, so any difference comes from the prediction branch.
Takes a few minutes on one CPU core:

    python demos/desk_comparison.py [out_dir]
"""

import json
import sys
from pathlib import Path

from prednext.config import load_config
from prednext.training import build_datasets, pretrain

out = Path(sys.argv[1] if len(sys.argv) > 1 else "runs/demo")
base = load_config("synthetic-desk")
datasets = build_datasets(base)  # render once, reuse for both runs

runs = {
    "simsiam": base,
    "simsiam+prednext": load_config("synthetic-desk", {"prednext": {"enabled": True}}),
}
for name, cfg in runs.items():
    run_dir = pretrain(cfg, out / name, datasets=datasets)
    report = json.loads((run_dir / "eval_report.json").read_text())
    print(
        f"{name:18s} knn@1 {report['knn_top1']:.3f}  "
        f"consistency error {report['consistency_error']:.4f}  "
        f"R@1 {report['recall_at']['1']:.3f}"
    )

# per-timestep features of the validation bank are what the consistency
# numbers above are computed from; export them for your own plots with
#   prednext export-features --checkpoint runs/demo/simsiam/checkpoint.ckpt --out feats
