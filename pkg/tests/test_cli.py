import csv
import json

import numpy as np
import pytest
import yaml

from prednext.cli import EXIT_CHECKPOINT, EXIT_CONFIG, EXIT_IO, EXIT_NAN, main, sweep_override
from prednext.data.folders import read_manifest
from prednext.errors import ConfigError
from prednext.evaluation import consistency_error, load_bank
from prednext.training import NaNLossError

TINY = {
    "extends": "synthetic-desk",
    "name": "tiny",
    "dataset": {
        "synthetic": {"n_classes": 2, "n_videos": 16, "length": 10, "resolution": [8, 8]},
        "clip": {"frames": 4, "stride": 1, "resolution": [8, 8]},
    },
    "encoder": {"widths": [4], "blocks": [1], "feature_dim": 4},
    "method": {"proj_dim": 8, "proj_hidden": 8, "pred_hidden": 4},
    "prednext": {"hidden_dim": 4},
    "optimizer": {"epochs": 1, "warmup_epochs": 0, "batch_size": 4},
    "eval": {"knn_k": 3, "recall_ks": [1, 2]},
}


@pytest.fixture
def tiny_cfg(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(yaml.safe_dump(TINY))
    return p


@pytest.fixture
def run_dir(tiny_cfg, tmp_path):
    assert main(["pretrain", "--config", str(tiny_cfg), "--out", str(tmp_path / "runs")]) == 0
    return tmp_path / "runs" / "tiny"


def test_pretrain_writes_self_describing_run(run_dir):
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["status"] == "finished" and manifest["format"] == "prednext-run-v1"
    for name in ("config.yaml", "loss_log.jsonl", "curves.csv", "checkpoint.ckpt", "eval_report.json"):
        assert (run_dir / name).exists()
    rows = [json.loads(line) for line in (run_dir / "loss_log.jsonl").read_text().splitlines()]
    assert rows and all({"l_ssl", "l_step", "l_clip", "l_pred", "l_forced", "total"} <= set(r) for r in rows)


def test_eval_twice_identical(run_dir, tmp_path):
    ck = str(run_dir / "checkpoint.ckpt")
    assert main(["eval", "--checkpoint", ck, "--out", str(tmp_path / "a.json")]) == 0
    assert main(["eval", "--checkpoint", ck, "--out", str(tmp_path / "b.json")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_eval_incompatible_checkpoint(run_dir, tiny_cfg, capsys):
    code = main(
        ["eval", "--checkpoint", str(run_dir / "checkpoint.ckpt"), "--config", str(tiny_cfg),
         "--set", "encoder.widths=[6]", "--set", "encoder.feature_dim=6"]
    )
    assert code == EXIT_CHECKPOINT
    assert "checkpoint" in capsys.readouterr().err


def test_export_features_round_trip(run_dir, tmp_path):
    out = tmp_path / "feats"
    assert main(["export-features", "--checkpoint", str(run_dir / "checkpoint.ckpt"), "--out", str(out)]) == 0
    val = load_bank(out / "val")
    assert len(val) + len(load_bank(out / "train")) == 16
    report = json.loads((run_dir / "eval_report.json").read_text())
    assert consistency_error(val.per_step)[0] == report["consistency_error"]


def test_export_io_failure(run_dir, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = main(["export-features", "--checkpoint", str(run_dir / "checkpoint.ckpt"), "--out", str(blocker / "sub")])
    assert code == EXIT_IO


def test_invalid_config_exit_code(tiny_cfg, capsys):
    assert main(["pretrain", "--config", str(tiny_cfg), "--set", "prednext.alpha=3"]) == EXIT_CONFIG
    assert "alpha" in capsys.readouterr().err
    assert main(["pretrain", "--config", "no-such-preset"]) == EXIT_CONFIG


def test_nan_exit_code(tiny_cfg, tmp_path, monkeypatch):
    import prednext.training as training

    def boom(cfg, run_dir=None, datasets=None):
        raise NaNLossError("loss is nan")

    monkeypatch.setattr(training, "pretrain", boom)
    assert main(["pretrain", "--config", str(tiny_cfg), "--out", str(tmp_path)]) == EXIT_NAN


def test_make_synth(tiny_cfg, tmp_path):
    assert main(["make-synth", "--config", str(tiny_cfg), "--out", str(tmp_path / "synth")]) == 0
    recs = read_manifest(tmp_path / "synth" / "manifest.tsv")
    assert len(recs) == 16 and {r.label for r in recs} == {0, 1}


def test_sweep_rows_and_hashes(tiny_cfg, tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", str(tiny_cfg), "--axis", "head_dim", "--values", "4,8", "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader(open(out / "sweep_head_dim.csv")))
    assert [r["value"] for r in rows] == ["4", "8"]
    assert all(r["status"] == "ok" for r in rows)
    assert len({r["config_hash"] for r in rows}) == 2


def test_sweep_records_failures_and_continues(tiny_cfg, tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", str(tiny_cfg), "--axis", "step_m", "--values", "9,1", "--out", str(out)])
    assert code == 1
    rows = list(csv.DictReader(open(out / "sweep_step_m.csv")))
    assert [r["status"] for r in rows] == ["failed", "ok"]
    assert "ConfigError" in rows[0]["error"]


def test_sweep_overrides():
    assert sweep_override("clip_len_stride", "16x2") == {"dataset": {"clip": {"frames": 16, "stride": 2}}}
    assert sweep_override("view_mode", "same_only")["prednext"] == {"enabled": True, "cross_view": False, "standalone": True}
    with pytest.raises(ConfigError):
        sweep_override("clip_len_stride", "16")
    with pytest.raises(ConfigError):
        sweep_override("view_mode", "diagonal")


def test_seed_flag_changes_run(tiny_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["pretrain", "--config", str(tiny_cfg), "--out", str(a), "--seed", "1"])
    main(["pretrain", "--config", str(tiny_cfg), "--out", str(b), "--seed", "2"])
    assert (a / "tiny" / "checkpoint.ckpt").read_bytes() != (b / "tiny" / "checkpoint.ckpt").read_bytes()
    assert np.isfinite(json.loads((a / "tiny" / "eval_report.json").read_text())["knn_top1"])
