"""Checkpoint serialization: a JSON manifest followed by a raw little-endian
float64 payload, in one file.

Layout: 8-byte magic, u64-LE header length, UTF-8 JSON header, payload.
The header records parameter names, shapes and byte offsets into the
payload, plus the seed and hyper-parameters of the run. Round-trips are
bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .autodiff import ParamStore

MAGIC = b"KGCKPT01"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, store: ParamStore, seed: int = 0, hyper: dict | None = None) -> None:
    tensors = []
    chunks = []
    offset = 0
    for name, p in store.items():
        raw = np.ascontiguousarray(p.data, dtype="<f8").tobytes()
        tensors.append({"name": name, "shape": list(p.data.shape), "offset": offset, "dtype": "<f8"})
        chunks.append(raw)
        offset += len(raw)
    header = {
        "version": FORMAT_VERSION,
        "seed": seed,
        "hyper": hyper or {},
        "tensors": tensors,
        "payload_bytes": offset,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for chunk in chunks:
            fh.write(chunk)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Returns (name -> array, header). Arrays are fresh copies."""
    blob = Path(path).read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16 : 16 + hlen].decode("utf-8"))
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('version')}")
    payload = blob[16 + hlen :]
    if len(payload) != header["payload_bytes"]:
        raise CheckpointError(f"{path}: truncated payload")
    out = {}
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = spec["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=start)
        out[spec["name"]] = arr.reshape(shape).astype(np.float64).copy()
    return out, header


def restore_into(store: ParamStore, path) -> dict:
    """Load a checkpoint into an existing store; shapes must match exactly."""
    values, header = load_checkpoint(path)
    names = store.names()
    if names != [t["name"] for t in header["tensors"]]:
        raise CheckpointError("checkpoint parameter names/order do not match the store")
    for name in names:
        if store[name].data.shape != values[name].shape:
            raise CheckpointError(f"shape mismatch for '{name}'")
        store[name].data = values[name]
    return header
