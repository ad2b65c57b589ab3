"""Pretraining: two views -> encoder -> self-supervised loss + temporal prediction -> update."""

from __future__ import annotations

import json
import logging
import math
import os
import platform
import tempfile
import time
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from . import __version__
from .checkpoint import load_checkpoint, load_into, save_checkpoint
from .config import ExperimentConfig, config_from_dict, dump_config
from .data.folders import ingest_frame_folders
from .data.loader import PretrainBatch, PretrainLoader
from .data.seeding import numpy_stream, stream_seed, torch_stream
from .data.synthetic import synth_dataset
from .data.video import InMemoryDataset, stratified_split
from .errors import CheckpointError
from .evaluation.bank import extract_bank, save_bank
from .evaluation.report import CurveWriter, EvalReport, build_report
from .prediction import LossBreakdown, PredictionHeads, clip_pred_loss, compose_total, pairwise_cosine_distance, step_pred_loss
from .selfsup.methods import SSLMethod, build_method
from .snn.encoder import SpikingEncoder

log = logging.getLogger(__name__)

RUN_FORMAT = "prednext-run-v1"
DTYPES = {"float32": torch.float32, "float64": torch.float64}


class NaNLossError(RuntimeError):
    pass


class Learner(nn.Module):
    """Encoder, self-supervised method and (optionally) the prediction heads."""

    def __init__(self, cfg: ExperimentConfig):
        super().__init__()
        self.cfg = cfg
        pn = cfg.prednext
        with torch.random.fork_rng():
            torch.manual_seed(stream_seed(cfg.seed, "init"))
            self.encoder = SpikingEncoder(cfg.encoder, cfg.lif)
            self.method: SSLMethod = build_method(cfg.method, self.encoder, torch_stream(cfg.seed, "init.queue"))
            # Built last so that enabling the heads never changes the other initial weights.
            self.heads = PredictionHeads(cfg.method.proj_dim, pn) if pn.enabled else None
        self.to(DTYPES[cfg.dtype])

    @property
    def prediction_active(self) -> bool:
        pn = self.cfg.prednext
        return pn.enabled and pn.effective_alpha > 0

    def trainable_parameters(self) -> list[nn.Parameter]:
        params = [p for p in self.encoder.parameters() if p.requires_grad]
        params += [p for p in self.method.parameters() if p.requires_grad]
        if self.heads is not None and self.prediction_active:
            params += list(self.heads.parameters())
        return params

    def losses(self, batch: PretrainBatch) -> LossBreakdown:
        pn, forced = self.cfg.prednext, self.cfg.forced_consistency
        dtype = DTYPES[self.cfg.dtype]
        x_i, x_j = batch.view_i.to(dtype), batch.view_j.to(dtype)
        f_i, f_j = self.encoder(x_i), self.encoder(x_j)
        standalone = pn.enabled and pn.standalone
        out = self.method(f_i, f_j, x_i, x_j, compute_loss=not standalone)
        l_ssl = None if standalone else out.loss
        l_step = l_clip = None
        n_steps = None
        if self.prediction_active:
            if pn.include_step:
                n_steps = f_i.per_step.shape[1] - pn.step_interval
                l_step = step_pred_loss(
                    out.z_i.per_step, out.z_j.per_step, self.heads.step, pn.step_interval, pn.cross_view, pn.target_stop_grad
                )
            if pn.include_clip:
                with torch.set_grad_enabled(torch.is_grad_enabled() and not pn.target_stop_grad):
                    nxt_i = self.method.project(self.encoder(batch.next_i.to(dtype))).aggregate
                    nxt_j = self.method.project(self.encoder(batch.next_j.to(dtype))).aggregate
                l_clip = clip_pred_loss(
                    out.z_i.aggregate, out.z_j.aggregate, nxt_i, nxt_j, self.heads.clip, pn.cross_view, pn.target_stop_grad
                )
        l_forced = None
        if forced.enabled:
            l_forced = 0.5 * (pairwise_cosine_distance(f_i.per_step) + pairwise_cosine_distance(f_j.per_step))
        return compose_total(l_ssl, l_step, l_clip, pn, n_steps=n_steps, l_forced=l_forced, beta=forced.beta)

    def model_state(self) -> dict[str, torch.Tensor]:
        """Encoder and self-supervised method state (the reusable model)."""
        state = {f"encoder.{k}": v for k, v in self.encoder.state_dict().items()}
        state.update({f"method.{k}": v for k, v in self.method.state_dict().items()})
        return state


def checkpoint_meta(cfg: ExperimentConfig) -> dict:
    d = cfg.to_dict()
    return {"encoder": d["encoder"], "lif": d["lif"], "method": d["method"], "dtype": cfg.dtype}


def save_learner(learner: Learner, run_dir: Path) -> Path:
    path = save_checkpoint(run_dir / "checkpoint.ckpt", learner.model_state(), checkpoint_meta(learner.cfg))
    if learner.heads is not None:
        save_checkpoint(run_dir / "prediction_heads.ckpt", learner.heads.state_dict(), {"prednext": learner.cfg.to_dict()["prednext"]})
    return path


def load_encoder(checkpoint, cfg: ExperimentConfig) -> SpikingEncoder:
    """Rebuild the encoder described by ``cfg`` and fill it from ``checkpoint``."""
    state, meta = load_checkpoint(checkpoint)
    want = checkpoint_meta(cfg)
    for key in ("encoder", "lif"):
        if meta.get(key) != want[key]:
            raise CheckpointError(f"checkpoint {key} config {meta.get(key)} does not match {want[key]}")
    encoder = SpikingEncoder(cfg.encoder, cfg.lif).to(DTYPES[cfg.dtype])
    load_into(encoder, state, "encoder.")
    encoder.eval()
    return encoder


def build_datasets(cfg: ExperimentConfig):
    """Return ``(train, val)`` datasets for the configured source."""
    ds = cfg.dataset
    if ds.source == "synthetic":
        s = ds.synthetic
        full = synth_dataset(s.n_classes, s.n_videos, s.length, s.resolution, s.seed)
        tr, va = stratified_split(full.labels, ds.val_fraction, np.random.default_rng(s.seed))
        return full.subset(tr), full.subset(va)
    root = ds.root or Path(ds.manifest).parent
    train = ingest_frame_folders(root, ds.manifest)
    if ds.val_manifest:
        return train, ingest_frame_folders(root, ds.val_manifest)
    videos = [train[i] for i in range(len(train))]
    tr, va = stratified_split([v.label for v in videos], ds.val_fraction, np.random.default_rng(cfg.seed))
    full = InMemoryDataset(videos, train.num_classes)
    return full.subset(tr), full.subset(va)


def lr_at(step: int, total: int, warmup: int, base: float, schedule: str = "cosine") -> float:
    if step < warmup:
        return base * (step + 1) / warmup
    if schedule == "constant":
        return base
    progress = (step - warmup) / max(1, total - warmup)
    return base * 0.5 * (1 + math.cos(math.pi * min(1.0, progress)))


def set_deterministic(flag: bool) -> None:
    torch.use_deterministic_algorithms(flag)


def _write_json_atomic(path: Path, payload: dict) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
    os.replace(tmp, path)


def evaluate_learner(encoder, train_ds, val_ds, cfg: ExperimentConfig, n_clips: int, monitor: bool = False):
    ev = cfg.eval
    val_idx = None
    if monitor and len(val_ds) > ev.monitor_videos:
        val_idx = range(ev.monitor_videos)
    tr = extract_bank(encoder, train_ds, cfg.dataset.clip, n_clips)
    va = extract_bank(encoder, val_ds, cfg.dataset.clip, n_clips, indices=val_idx)
    report, retrieval = build_report(tr, va, ev.knn_k, ev.recall_ks)
    return report, retrieval, tr, va


def pretrain(cfg: ExperimentConfig, run_dir=None, datasets=None) -> Path:
    """Run pretraining and write a self-describing run directory; returns its path."""
    run_dir = Path(run_dir or Path(cfg.out_dir) / cfg.name)
    run_dir.mkdir(parents=True, exist_ok=True)
    set_deterministic(cfg.deterministic)
    t0 = time.time()
    dump_config(cfg, run_dir / "config.yaml")
    manifest = {
        "format": RUN_FORMAT,
        "status": "running",
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "code_version": __version__,
        "seed": cfg.seed,
        "deterministic": cfg.deterministic,
        "environment": {"python": platform.python_version(), "torch": torch.__version__},
        "files": {"loss_log": "loss_log.jsonl", "curves": "curves.csv", "config": "config.yaml"},
    }
    _write_json_atomic(run_dir / "manifest.json", manifest)

    train_ds, val_ds = datasets if datasets is not None else build_datasets(cfg)
    learner = Learner(cfg)
    learner.train()
    params = learner.trainable_parameters()
    opt = torch.optim.AdamW(params, lr=cfg.optimizer.lr, weight_decay=cfg.optimizer.weight_decay)
    loader = PretrainLoader(train_ds, cfg.dataset.clip, cfg.dataset.augment, cfg.optimizer.batch_size, cfg.seed)
    steps_per_epoch = len(loader)
    total = cfg.optimizer.epochs * steps_per_epoch
    warmup = cfg.optimizer.warmup_epochs * steps_per_epoch
    curves = CurveWriter(run_dir / "curves.csv")
    step = 0
    with open(run_dir / "loss_log.jsonl", "w", encoding="utf-8") as logf:
        for epoch in range(cfg.optimizer.epochs):
            for batch in loader:
                lr = lr_at(step, total, warmup, cfg.optimizer.lr, cfg.optimizer.schedule)
                for g in opt.param_groups:
                    g["lr"] = lr
                losses = learner.losses(batch)
                if not torch.isfinite(losses.total):
                    dump = run_dir / "nan_batch.pt"
                    torch.save({"batch": batch.__dict__, "losses": losses.as_dict(), "step": step}, dump)
                    manifest.update(status="failed", error=f"non-finite loss at step {step}, batch dumped to {dump.name}")
                    _write_json_atomic(run_dir / "manifest.json", manifest)
                    raise NaNLossError(f"non-finite loss at step {step}; offending batch saved to {dump}")
                opt.zero_grad(set_to_none=True)
                losses.total.backward()
                opt.step()
                learner.method.after_step(learner.encoder)
                row = {"step": step, "epoch": epoch, "lr": lr, **losses.as_dict()}
                logf.write(json.dumps(row) + "\n")
                step += 1
            if cfg.eval.every and ((epoch + 1) % cfg.eval.every == 0 or epoch + 1 == cfg.optimizer.epochs):
                report, *_ = evaluate_learner(learner.encoder, train_ds, val_ds, cfg, 1, monitor=True)
                curves.append(epoch, report)
                log.info("epoch %d: knn %.3f consistency error %.4f", epoch, report.knn_top1, report.consistency_error)
                learner.train()

    ckpt = save_learner(learner, run_dir)
    report, retrieval, tr, va = evaluate_learner(learner.encoder, train_ds, val_ds, cfg, cfg.dataset.eval_clips)
    report.write_json(run_dir / "eval_report.json")
    (run_dir / "retrieval.json").write_text(json.dumps(retrieval.neighbours, indent=1), encoding="utf-8")
    manifest.update(
        status="finished",
        steps=step,
        skipped_videos=loader.skipped,
        checkpoint=ckpt.name,
        wall_clock={"seconds": round(time.time() - t0, 3)},
    )
    manifest["files"].update(eval_report="eval_report.json", retrieval="retrieval.json", checkpoint=ckpt.name)
    _write_json_atomic(run_dir / "manifest.json", manifest)
    return run_dir


def load_run_config(run_dir) -> ExperimentConfig:
    manifest = json.loads((Path(run_dir) / "manifest.json").read_text(encoding="utf-8"))
    return config_from_dict(manifest["config"])
