"""Command-line driver: ``prednext {pretrain,eval,sweep,export-features,make-synth}``.

Exit codes: 0 success, 1 sweep finished with failed sub-runs, 2 invalid
config, 3 incompatible checkpoint, 4 I/O failure, 5 non-finite loss.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import yaml

from .config import ExperimentConfig, deep_merge, load_config, set_path
from .data.folders import export_frame_folders
from .data.synthetic import synth_dataset
from .errors import CheckpointError, ConfigError
from .evaluation.bank import extract_bank, save_bank
from .evaluation.probe import probe_eval
from .evaluation.report import build_report

EXIT_OK, EXIT_SWEEP_FAILED, EXIT_CONFIG, EXIT_CHECKPOINT, EXIT_IO, EXIT_NAN = 0, 1, 2, 3, 4, 5

SWEEP_AXES = ("alpha", "step_m", "head_dim", "clip_len_stride", "view_mode")

log = logging.getLogger("prednext")


def _parse_set(items) -> dict:
    over: dict = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        over = set_path(over, key, yaml.safe_load(raw))
    return over


def resolve_config(args) -> ExperimentConfig:
    over = _parse_set(getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "deterministic", None) is not None:
        over["deterministic"] = args.deterministic
    if getattr(args, "out", None) and args.command in ("pretrain", "sweep"):
        over["out_dir"] = str(args.out)
    return load_config(args.config, over)


def _config_for_checkpoint(args) -> ExperimentConfig:
    if args.config:
        return resolve_config(args)
    manifest = Path(args.checkpoint).parent / "manifest.json"
    if not manifest.exists():
        raise ConfigError("--config is required when the checkpoint has no run manifest next to it")
    from .training import load_run_config

    return load_run_config(manifest.parent)


def sweep_override(axis: str, value: str) -> dict:
    """Config override for one sweep point."""
    if axis == "alpha":
        return {"prednext": {"enabled": True, "alpha": float(value)}}
    if axis == "step_m":
        return {"prednext": {"enabled": True, "step_interval": int(value)}}
    if axis == "head_dim":
        return {"prednext": {"enabled": True, "hidden_dim": int(value)}}
    if axis == "clip_len_stride":
        try:
            t, s = (int(v) for v in value.lower().split("x"))
        except ValueError:
            raise ConfigError(f"clip_len_stride values look like 16x2, got {value!r}") from None
        return {"dataset": {"clip": {"frames": t, "stride": s}}}
    if axis == "view_mode":
        from .prediction import VIEW_MODES

        if value not in VIEW_MODES:
            raise ConfigError(f"view_mode must be one of {sorted(VIEW_MODES)}, got {value!r}")
        return {"prednext": {"enabled": True, **VIEW_MODES[value]}}
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def cmd_pretrain(args) -> int:
    from .training import pretrain

    cfg = resolve_config(args)
    run_dir = pretrain(cfg, Path(cfg.out_dir) / cfg.name)
    print(run_dir)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .training import build_datasets, load_encoder

    cfg = _config_for_checkpoint(args)
    encoder = load_encoder(args.checkpoint, cfg)
    train_ds, val_ds = build_datasets(cfg)
    spec = cfg.dataset.clip
    tr = extract_bank(encoder, train_ds, spec, cfg.dataset.eval_clips)
    va = extract_bank(encoder, val_ds, spec, cfg.dataset.eval_clips)
    report, retrieval = build_report(tr, va, cfg.eval.knn_k, cfg.eval.recall_ks)
    probe = args.probe or cfg.eval.probe
    if probe != "none":
        report.probe_top1, report.probe_top5 = probe_eval(
            encoder, train_ds, val_ds, spec, probe, cfg.eval.probe_epochs if probe == "linear" else None, cfg.seed
        )
    out = Path(args.out or Path(args.checkpoint).with_name("eval_report.json"))
    report.write_json(out)
    out.with_name(out.stem + "_retrieval.json").write_text(json.dumps(retrieval.neighbours, indent=1), encoding="utf-8")
    print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_export(args) -> int:
    from .training import build_datasets, load_encoder

    cfg = _config_for_checkpoint(args)
    encoder = load_encoder(args.checkpoint, cfg)
    train_ds, val_ds = build_datasets(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    splits = {"train": train_ds, "val": val_ds} if args.split == "all" else {args.split: {"train": train_ds, "val": val_ds}[args.split]}
    for name, ds in splits.items():
        bank = extract_bank(encoder, ds, cfg.dataset.clip, cfg.dataset.eval_clips)
        save_bank(bank, out / name)
        print(f"{name}: {len(bank)} videos -> {out / name}")
    return EXIT_OK


def cmd_make_synth(args) -> int:
    cfg = resolve_config(args)
    s = cfg.dataset.synthetic
    if s is None:
        raise ConfigError("config has no dataset.synthetic section")
    ds = synth_dataset(s.n_classes, s.n_videos, s.length, s.resolution, s.seed)
    manifest = export_frame_folders(ds, args.out)
    print(manifest)
    return EXIT_OK


SWEEP_FIELDS = (
    "axis",
    "value",
    "seed",
    "config_hash",
    "status",
    "knn_top1",
    "knn_top5",
    "consistency_error",
    "consistency",
    "collapse_std",
    "recall_at_1",
    "run_dir",
    "error",
)


def run_sweep(base: ExperimentConfig, axis: str, values, out_dir, seeds=None) -> tuple[Path, int]:
    """One pretraining run per (value, seed); returns the CSV path and the number of failures."""
    from .training import pretrain

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = list(seeds) if seeds else [base.seed]
    rows, failures = [], 0
    base_dict = base.to_dict()
    for value in values:
        for seed in seeds:
            row = dict.fromkeys(SWEEP_FIELDS, "")
            row.update(axis=axis, value=value, seed=seed)
            try:
                data = deep_merge(deep_merge(base_dict, sweep_override(axis, value)), {"seed": seed})
                data["name"] = f"{base.name}_{axis}={value}_seed{seed}"
                cfg = load_config(data)
                row["config_hash"] = cfg.hash()
                run_dir = pretrain(cfg, out_dir / data["name"])
                report = json.loads((run_dir / "eval_report.json").read_text(encoding="utf-8"))
                row.update({k: report[k] for k in ("knn_top1", "knn_top5", "consistency_error", "consistency", "collapse_std")})
                row.update(recall_at_1=report["recall_at"].get("1", ""), run_dir=str(run_dir), status="ok")
            except Exception as exc:  # a failed point must not stop the sweep
                failures += 1
                row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
                log.error("sweep point %s=%s seed %s failed: %s", axis, value, seed, exc)
            rows.append(row)
    path = out_dir / f"sweep_{axis}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path, failures


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values needs at least one value")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    path, failures = run_sweep(cfg, args.axis, values, args.out or Path(cfg.out_dir) / f"sweep_{args.axis}", seeds)
    print(path)
    return EXIT_SWEEP_FAILED if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prednext", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="YAML config file or preset name")
        sp.add_argument("--seed", type=int, help="override the experiment seed")
        sp.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None)
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted config override, repeatable")

    sp = sub.add_parser("pretrain", help="run self-supervised pretraining")
    common(sp)
    sp.add_argument("--out", help="output directory (runs are written to OUT/<name>)")
    sp.set_defaults(func=cmd_pretrain)

    sp = sub.add_parser("eval", help="evaluate a checkpoint")
    common(sp, config_required=False)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--probe", choices=("none", "linear", "finetune"))
    sp.add_argument("--out", help="report path (default: eval_report.json next to the checkpoint)")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="one run per value along an ablation axis")
    common(sp)
    sp.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sp.add_argument("--values", required=True, help="comma-separated, e.g. 0,0.5,1 or 8x1,4x2")
    sp.add_argument("--seeds", help="comma-separated seeds (default: the config seed)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("export-features", help="write feature banks for a checkpoint")
    common(sp, config_required=False)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--split", choices=("train", "val", "all"), default="all")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("make-synth", help="export the synthetic dataset as frame folders")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_make_synth)
    return p


def main(argv=None) -> int:
    from .training import NaNLossError

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"incompatible checkpoint: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except NaNLossError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_NAN
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
