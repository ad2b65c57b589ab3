from .clips import (
    AugmentParams,
    ClipPair,
    ClipRngs,
    ClipSpec,
    VideoTooShort,
    ViewTransform,
    apply_view_transform,
    eval_clips,
    sample_clip_pair,
    sample_view_transform,
    uniform_clip_starts,
)
from .folders import IngestionReport, export_frame_folders, ingest_frame_folders, read_manifest, write_manifest
from .loader import PretrainBatch, PretrainLoader
from .seeding import numpy_stream, stream_seed, torch_stream
from .synthetic import render_video, synth_dataset
from .video import InMemoryDataset, Video, stratified_split

__all__ = [
    "AugmentParams",
    "ClipPair",
    "ClipRngs",
    "ClipSpec",
    "InMemoryDataset",
    "IngestionReport",
    "PretrainBatch",
    "PretrainLoader",
    "Video",
    "VideoTooShort",
    "ViewTransform",
    "apply_view_transform",
    "eval_clips",
    "export_frame_folders",
    "ingest_frame_folders",
    "numpy_stream",
    "read_manifest",
    "render_video",
    "sample_clip_pair",
    "sample_view_transform",
    "stratified_split",
    "stream_seed",
    "synth_dataset",
    "torch_stream",
    "uniform_clip_starts",
    "write_manifest",
]
