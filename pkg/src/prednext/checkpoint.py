"""Flat, versioned checkpoint files.

Layout: the ASCII line ``prednext-ckpt-v1``, an 8-byte little-endian header
length, a JSON header (tensor names, dtypes, shapes, byte offsets and free-form
metadata), then the raw little-endian tensor bytes in header order. Identical
models and metadata always serialise to identical bytes.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
import torch

from .errors import CheckpointError

MAGIC = b"prednext-ckpt-v1\n"


def save_checkpoint(path, state: dict[str, torch.Tensor], meta: dict | None = None) -> Path:
    path = Path(path)
    entries, blobs, offset = [], [], 0
    for name, tensor in state.items():
        arr = tensor.detach().cpu().contiguous().numpy()
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = arr.tobytes()
        entries.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"format": MAGIC.decode().strip(), "meta": meta or {}, "tensors": entries}, sort_keys=True)
    header = header.encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)
    os.replace(tmp, path)
    return path


def load_checkpoint(path) -> tuple[dict[str, torch.Tensor], dict]:
    """Return ``(state, meta)``; raises :class:`CheckpointError` on malformed files."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{path} is not a {MAGIC.decode().strip()} file")
    pos = len(MAGIC)
    try:
        (hlen,) = struct.unpack_from("<Q", data, pos)
        header = json.loads(data[pos + 8 : pos + 8 + hlen])
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"corrupt checkpoint header in {path}") from exc
    base = pos + 8 + hlen
    state = {}
    for e in header["tensors"]:
        start = base + e["offset"]
        if start + e["nbytes"] > len(data):
            raise CheckpointError(f"checkpoint {path} is truncated at tensor {e['name']}")
        arr = np.frombuffer(data, dtype=np.dtype(e["dtype"]), count=int(np.prod(e["shape"], dtype=np.int64)), offset=start)
        state[e["name"]] = torch.from_numpy(arr.reshape(e["shape"]).copy())
    return state, header["meta"]


def load_into(module: torch.nn.Module, state: dict[str, torch.Tensor], prefix: str = "") -> None:
    """Load ``state`` entries under ``prefix`` into ``module``, insisting on an exact match."""
    sub = {k[len(prefix) :]: v for k, v in state.items() if k.startswith(prefix)}
    own = module.state_dict()
    missing = sorted(set(own) - set(sub))
    unexpected = sorted(set(sub) - set(own))
    bad = [k for k in own if k in sub and own[k].shape != sub[k].shape]
    if missing or unexpected or bad:
        raise CheckpointError(
            f"checkpoint does not match model: missing={missing[:5]} unexpected={unexpected[:5]} shape={bad[:5]}"
        )
    module.load_state_dict({k: v.to(own[k].dtype) for k, v in sub.items()})
