"""Frame-folder datasets described by a tab-separated manifest.

Manifest lines are ``video_id<TAB>relative_dir<TAB>num_frames<TAB>label_or_dash``.
Each directory holds one image per frame; files are read in sorted order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .video import Video

FRAME_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")
DATA_ROOT_ENV = "PREDNEXT_DATA_ROOT"


class VideoDecodeError(RuntimeError):
    pass


@dataclass
class ManifestRecord:
    video_id: str
    relative_dir: str
    num_frames: int
    label: int | None


@dataclass
class IngestionReport:
    errors: dict[str, str] = field(default_factory=dict)
    served: int = 0

    @property
    def ok(self) -> bool:
        return not self.errors


def read_manifest(path) -> list[ManifestRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
            vid, rel, count, label = parts
            records.append(ManifestRecord(vid, rel, int(count), None if label == "-" else int(label)))
    return records


def write_manifest(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            label = "-" if r.label is None else str(r.label)
            fh.write(f"{r.video_id}\t{r.relative_dir}\t{r.num_frames}\t{label}\n")


def _frame_files(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in FRAME_SUFFIXES)


class FrameFolderDataset:
    """Lazily decoded frame folders, same interface as the in-memory datasets."""

    def __init__(self, root, records: list[ManifestRecord], report: IngestionReport):
        self.root = Path(root)
        self.records = records
        self.report = report
        known = [r.label for r in records if r.label is not None]
        self.num_classes = max(known) + 1 if known else 0

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __getitem__(self, i) -> Video:
        r = self.records[i]
        files = _frame_files(self.root / r.relative_dir)
        try:
            frames = np.stack([np.asarray(Image.open(f).convert("RGB")) for f in files])
        except (OSError, ValueError) as exc:
            raise VideoDecodeError(f"{r.video_id}: {exc}") from exc
        return Video(r.video_id, frames, r.label)

    @property
    def video_ids(self):
        return [r.video_id for r in self.records]

    @property
    def labels(self):
        return [r.label for r in self.records]


def resolve_root(root) -> Path:
    return Path(os.environ.get(DATA_ROOT_ENV) or root)


def ingest_frame_folders(root, manifest, verify_decode: bool = False) -> FrameFolderDataset:
    """Validate the manifest against the folders under ``root``.

    Videos whose directory is missing, whose frame count disagrees with the
    manifest, or (with ``verify_decode``) whose frames fail to decode are
    listed in ``dataset.report.errors`` and left out; the rest are served.
    """
    root = resolve_root(root)
    records = read_manifest(manifest) if not isinstance(manifest, list) else manifest
    report = IngestionReport()
    good = []
    for r in records:
        d = root / r.relative_dir
        if not d.is_dir():
            report.errors[r.video_id] = f"missing directory {d}"
            continue
        n = len(_frame_files(d))
        if n != r.num_frames:
            report.errors[r.video_id] = f"manifest lists {r.num_frames} frames, directory has {n}"
            continue
        good.append(r)
    ds = FrameFolderDataset(root, good, report)
    if verify_decode:
        keep = []
        for i, r in enumerate(good):
            try:
                ds[i]
                keep.append(r)
            except VideoDecodeError as exc:
                report.errors[r.video_id] = str(exc)
        ds.records = keep
    report.served = len(ds.records)
    return ds


def export_frame_folders(dataset, root) -> Path:
    """Write every video as a folder of PNG frames plus ``manifest.tsv``; returns the manifest path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    records = []
    for video in dataset:
        d = root / video.video_id
        d.mkdir(exist_ok=True)
        for t, frame in enumerate(video.frames):
            Image.fromarray(frame).save(d / f"frame_{t:05d}.png")
        records.append(ManifestRecord(video.video_id, video.video_id, len(video.frames), video.label))
    path = root / "manifest.tsv"
    write_manifest(path, records)
    return path
