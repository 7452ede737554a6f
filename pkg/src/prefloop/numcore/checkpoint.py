"""Shared checkpoint format: JSON manifest + raw float64 sidecar.

The manifest lists tensors as (name, shape, byte offset) into a sidecar
binary of little-endian 64-bit floats in row-major order. Saving the same
tensors twice produces byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class CheckpointError(ValueError):
    """Manifest and sidecar do not describe a loadable checkpoint."""


def _sidecar_path(manifest_path: Path) -> Path:
    return manifest_path.with_suffix(".bin")


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None):
    """Write tensors to ``path`` (.json manifest) plus a .bin sidecar."""
    manifest_path = Path(path)
    if manifest_path.suffix != ".json":
        manifest_path = manifest_path.with_suffix(manifest_path.suffix + ".json")
    entries = []
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blob = arr.astype("<f8").tobytes()
        blobs.append(blob)
        offset += len(blob)
    manifest = {"tensors": entries, "meta": meta or {}}
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, separators=(",", ":")))
    _sidecar_path(manifest_path).write_bytes(b"".join(blobs))
    return manifest_path


def load_checkpoint(path):
    """Read a manifest + sidecar pair; returns (tensors dict, meta dict)."""
    manifest_path = Path(path)
    if not manifest_path.exists():
        raise CheckpointError(f"missing manifest {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt manifest {manifest_path}: {exc}") from exc
    if "tensors" not in manifest:
        raise CheckpointError(f"manifest {manifest_path} lacks a tensor table")
    sidecar = _sidecar_path(manifest_path)
    if not sidecar.exists():
        raise CheckpointError(f"missing sidecar {sidecar}")
    raw = sidecar.read_bytes()
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * 8
        if end > len(raw):
            raise CheckpointError(
                f"tensor {entry['name']!r} runs past the end of {sidecar}"
            )
        arr = np.frombuffer(raw[start:end], dtype="<f8").reshape(shape).copy()
        tensors[entry["name"]] = arr
    return tensors, manifest.get("meta", {})
