"""Binary model-pool checkpoints with bitwise round-trip fidelity.

Layout: 8-byte magic ``EVPOOL01``, a little-endian uint32 header length, a
UTF-8 JSON header (format version, shared architecture signature, per-model
metadata and tensor manifest), then the raw float64 little-endian tensor
payloads concatenated in manifest order.  Weights are stored as raw bytes, so
save -> load -> save is byte-stable and loaded models predict bitwise
identically.  Any structural problem raises :class:`CheckpointError`.
"""

from __future__ import annotations

import dataclasses
import json
import os
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CheckpointError
from .mlp import LearnerConfig, Lineage, ModelRecord
from .params import NamedParamSet, NamedTensor, TensorGroup, TensorRole

__all__ = ["save_checkpoint", "load_checkpoint", "atomic_write_bytes", "atomic_write_text"]

_MAGIC = b"EVPOOL01"
_VERSION = 1


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    """Write via a same-directory temp file and ``os.replace`` so readers never
    observe a partial file (kill-safe)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _config_to_dict(config: LearnerConfig) -> dict:
    d = dataclasses.asdict(config)
    d["activation"] = config.activation.value
    return d


def _record_header(record: ModelRecord) -> dict:
    return {
        "id": record.model_id,
        "generation": record.generation,
        "lineage": {
            "kind": record.lineage.kind,
            "parent_a": record.lineage.parent_a,
            "parent_b": record.lineage.parent_b,
        },
        "config": _config_to_dict(record.config),
        "tensors": [
            {
                "name": t.name,
                "shape": list(t.shape),
                "role": t.role.value,
                "group": t.group.value,
            }
            for t in record.params.tensors
        ],
    }


def save_checkpoint(pool: Sequence[ModelRecord], path: str | Path) -> None:
    """Serialize a (possibly empty) list of models.  The shared architecture
    signature is recorded when uniform (always true for evolutionary pools);
    heterogeneous collections (e.g. baseline selections) record ``null``."""
    pool = list(pool)
    signatures = {r.params.architecture_signature for r in pool}
    header = {
        "version": _VERSION,
        "architecture": next(iter(signatures)) if len(signatures) == 1 else None,
        "models": [_record_header(r) for r in pool],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [_MAGIC, struct.pack("<I", len(header_bytes)), header_bytes]
    for record in pool:
        for t in record.params.tensors:
            chunks.append(np.ascontiguousarray(t.values, dtype="<f8").tobytes())
    atomic_write_bytes(path, b"".join(chunks))


def _parse_record(entry: dict, payload: memoryview, offset: int) -> tuple[ModelRecord, int]:
    tensors = []
    for spec in entry["tensors"]:
        shape = tuple(int(s) for s in spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(payload):
            raise CheckpointError("tensor payload truncated")
        values = np.frombuffer(payload[offset : offset + nbytes], dtype="<f8").reshape(shape)
        offset += nbytes
        tensors.append(
            NamedTensor(
                name=spec["name"],
                shape=shape,
                values=values,
                role=TensorRole(spec["role"]),
                group=TensorGroup(spec["group"]),
            )
        )
    lineage = Lineage(
        kind=entry["lineage"]["kind"],
        parent_a=entry["lineage"].get("parent_a"),
        parent_b=entry["lineage"].get("parent_b"),
    )
    record = ModelRecord(
        model_id=entry["id"],
        params=NamedParamSet(tensors=tuple(tensors)),
        config=LearnerConfig(**entry["config"]),
        lineage=lineage,
        generation=int(entry["generation"]),
    )
    return record, offset


def load_checkpoint(path: str | Path) -> list[ModelRecord]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < len(_MAGIC) + 4 or blob[: len(_MAGIC)] != _MAGIC:
        raise CheckpointError(f"{path}: not a model-pool checkpoint")
    (header_len,) = struct.unpack_from("<I", blob, len(_MAGIC))
    header_start = len(_MAGIC) + 4
    if header_start + header_len > len(blob):
        raise CheckpointError(f"{path}: header truncated")
    try:
        header = json.loads(blob[header_start : header_start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from exc
    if header.get("version") != _VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {header.get('version')!r}"
        )
    payload = memoryview(blob)[header_start + header_len :]
    records: list[ModelRecord] = []
    offset = 0
    try:
        for entry in header["models"]:
            record, offset = _parse_record(entry, payload, offset)
            records.append(record)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed model entry ({exc})") from exc
    if offset != len(payload):
        raise CheckpointError(f"{path}: {len(payload) - offset} trailing payload bytes")
    expected = header.get("architecture")
    if expected is not None:
        for record in records:
            if record.params.architecture_signature != expected:
                raise CheckpointError(f"{path}: architecture signature mismatch")
    return records
