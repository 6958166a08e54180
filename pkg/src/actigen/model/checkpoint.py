"""Deterministic single-file checkpoint container.

Layout: 4-byte magic, u32 version, u64 header length, UTF-8 JSON header
(model config, logical dtype, user metadata, tensor manifest), tensor
payload as little-endian float64 in manifest order, and a trailing
SHA-256 of everything before it.  Writing the same parameters always
yields the same bytes, and float32 parameters round-trip bit-exactly
through the float64 payload.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .config import ModelConfig
from .params import ModelParams

MAGIC = b"ACTG"
VERSION = 1
_FIXED = struct.Struct("<IQ")
_DIGEST = hashlib.sha256().digest_size


def checkpoint_bytes(params: ModelParams, meta: dict | None = None) -> bytes:
    names = sorted(params.tensors)
    header = {
        "config": params.config.to_dict(),
        "dtype": params.dtype.name,
        "meta": meta or {},
        "tensors": [{"name": n, "shape": list(params.tensors[n].shape)} for n in names],
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(
        np.ascontiguousarray(params.tensors[n], dtype="<f8").tobytes() for n in names
    )
    body = MAGIC + _FIXED.pack(VERSION, len(head)) + head + payload
    return body + hashlib.sha256(body).digest()


def parse_checkpoint(blob: bytes) -> tuple[ModelParams, dict]:
    base = len(MAGIC) + _FIXED.size
    if len(blob) < base + _DIGEST:
        raise CheckpointError("checkpoint truncated")
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, head_len = _FIXED.unpack_from(blob, len(MAGIC))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    body, digest = blob[:-_DIGEST], blob[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checksum mismatch (corrupt checkpoint)")
    head_end = base + head_len
    if head_end > len(body):
        raise CheckpointError("checkpoint truncated")
    try:
        header = json.loads(body[base:head_end].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        dtype = np.dtype(header["dtype"])
        manifest = header["tensors"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed checkpoint header: {exc}") from exc

    tensors = {}
    offset = head_end
    for entry in manifest:
        shape = tuple(int(d) for d in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(body):
            raise CheckpointError(f"payload truncated at tensor {entry['name']}")
        arr = np.frombuffer(body, dtype="<f8", count=count, offset=offset)
        tensors[entry["name"]] = arr.reshape(shape).astype(dtype)
        offset += nbytes
    if offset != len(body):
        raise CheckpointError("payload size does not match tensor manifest")
    return ModelParams(config, tensors), header["meta"]


def save_checkpoint(path: str | Path, params: ModelParams, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(params, meta))
    return path


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    return parse_checkpoint(path.read_bytes())
