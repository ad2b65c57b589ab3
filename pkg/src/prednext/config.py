"""Experiment configuration: YAML files with ``extends`` layering over presets."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .data.clips import AugmentParams, ClipSpec
from .errors import ConfigError
from .prediction import PredNextConfig
from .selfsup.methods import MethodConfig
from .snn.encoder import EncoderConfig
from .snn.neuron import LIFConfig

PRESET_DIR = Path(__file__).parent / "presets"


@dataclass
class SyntheticConfig:
    n_classes: int = 4
    n_videos: int = 400
    length: int = 32
    resolution: tuple[int, int] = (32, 32)
    seed: int = 0


@dataclass
class DatasetConfig:
    source: str = "synthetic"
    synthetic: SyntheticConfig | None = field(default_factory=SyntheticConfig)
    val_fraction: float = 0.2
    manifest: str | None = None
    val_manifest: str | None = None
    root: str | None = None
    clip: ClipSpec = field(default_factory=ClipSpec)
    augment: AugmentParams = field(default_factory=AugmentParams)
    eval_clips: int = 3

    def __post_init__(self):
        if self.source not in ("synthetic", "manifest"):
            raise ConfigError("dataset.source must be 'synthetic' or 'manifest'")
        if self.source == "manifest":
            if not self.manifest:
                raise ConfigError("dataset.manifest is required when dataset.source is 'manifest'")
        elif self.synthetic is None:
            raise ConfigError("dataset.synthetic is required when dataset.source is 'synthetic'")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("dataset.val_fraction must lie in (0, 1)")


@dataclass
class ForcedConfig:
    enabled: bool = False
    beta: float = 0.8

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError("forced_consistency.beta must be non-negative")


@dataclass
class OptimConfig:
    lr: float = 2e-3
    weight_decay: float = 1e-6
    epochs: int = 30
    warmup_epochs: int = 3
    batch_size: int = 64
    schedule: str = "cosine"

    def __post_init__(self):
        if self.lr <= 0 or self.weight_decay < 0:
            raise ConfigError("optimizer.lr must be > 0 and weight_decay >= 0")
        if self.epochs < 1 or self.batch_size < 2 or not 0 <= self.warmup_epochs <= self.epochs:
            raise ConfigError("optimizer needs epochs >= 1, batch_size >= 2, 0 <= warmup_epochs <= epochs")
        if self.schedule not in ("cosine", "constant"):
            raise ConfigError("optimizer.schedule must be 'cosine' or 'constant'")


@dataclass
class EvalConfig:
    knn_k: int = 10
    every: int = 1
    monitor_videos: int = 256
    recall_ks: list[int] = field(default_factory=lambda: [1, 5, 10, 20])
    probe: str = "none"
    probe_epochs: int = 200

    def __post_init__(self):
        if self.knn_k < 1 or self.every < 0:
            raise ConfigError("eval.knn_k must be >= 1 and eval.every >= 0")
        if self.probe not in ("none", "linear", "finetune"):
            raise ConfigError("eval.probe must be one of none, linear, finetune")


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    deterministic: bool = True
    out_dir: str = "runs"
    dtype: str = "float32"
    # Permit prednext and forced consistency together (comparison runs only).
    allow_combined: bool = False
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    lif: LIFConfig = field(default_factory=LIFConfig)
    method: MethodConfig = field(default_factory=MethodConfig)
    prednext: PredNextConfig = field(default_factory=lambda: PredNextConfig(enabled=False))
    forced_consistency: ForcedConfig = field(default_factory=ForcedConfig)
    optimizer: OptimConfig = field(default_factory=OptimConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        if self.prednext.enabled and self.forced_consistency.enabled and not self.allow_combined:
            raise ConfigError("prednext and forced_consistency are both enabled; set allow_combined to compare")
        if self.prednext.enabled and self.prednext.include_step and self.prednext.step_interval >= self.dataset.clip.frames:
            raise ConfigError("prednext.step_interval must be smaller than dataset.clip.frames")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        if self.encoder.in_channels != 3:
            raise ConfigError("encoder.in_channels must be 3 for RGB frames")

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown field(s) {', '.join(f'{path}.{u}'.lstrip('.') for u in unknown)}")
    kwargs = {}
    for key, value in data.items():
        hint = hints[key]
        sub = [a for a in typing.get_args(hint) if dataclasses.is_dataclass(a)]
        target = hint if dataclasses.is_dataclass(hint) else (sub[0] if sub else None)
        if target is not None and value is not None:
            kwargs[key] = _build(target, value, f"{path}.{key}".lstrip("."))
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def deep_merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def preset_names() -> list[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.yaml"))


def _read_layered(source, seen=()) -> dict:
    if isinstance(source, dict):
        data, here = dict(source), Path.cwd()
    else:
        p = Path(source)
        if not p.exists() and (PRESET_DIR / f"{source}.yaml").exists():
            p = PRESET_DIR / f"{source}.yaml"
        if not p.exists():
            raise ConfigError(f"config file or preset {source!r} not found (presets: {preset_names()})")
        if p.resolve() in seen:
            raise ConfigError(f"circular extends at {p}")
        seen = seen + (p.resolve(),)
        try:
            data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from None
        here = p.parent
    parent = data.pop("extends", None)
    if parent is None:
        return data
    parent_path = here / parent if (here / parent).exists() else parent
    return deep_merge(_read_layered(parent_path, seen), data)


def load_config(source, overrides: dict | None = None) -> ExperimentConfig:
    """Load a config file, preset name or dict, applying ``extends`` and ``overrides``."""
    data = _read_layered(source)
    if overrides:
        data = deep_merge(data, overrides)
    return _build(ExperimentConfig, data, "")


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def dump_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False), encoding="utf-8")


def set_path(data: dict, dotted: str, value) -> dict:
    """Return a copy of ``data`` with ``a.b.c`` set to ``value``."""
    out = dict(data)
    head, _, rest = dotted.partition(".")
    if rest:
        out[head] = set_path(dict(out.get(head) or {}), rest, value)
    else:
        out[head] = value
    return out
