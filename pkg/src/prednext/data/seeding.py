"""Named random sub-streams derived from one experiment seed."""

from __future__ import annotations

import zlib

import numpy as np
import torch

STREAMS = ("data", "aug.view_i", "aug.view_j", "init")


def stream_seed(seed: int, name: str) -> int:
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(zlib.crc32(name.encode()),))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def numpy_stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(stream_seed(seed, name))


def torch_stream(seed: int, name: str) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(stream_seed(seed, name))
    return g
