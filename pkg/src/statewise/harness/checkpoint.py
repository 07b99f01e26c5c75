"""Checkpoint file format: length-prefixed JSON manifest + raw float64 tensors.

Layout: 8-byte little-endian unsigned manifest length, the UTF-8 JSON
manifest, then each tensor's raw little-endian float64 bytes in manifest
order.  Round trips are bitwise exact.  The manifest records the format
version, the algo/env identity, the training step, the full run config, and
per-tensor names and lengths.
"""

from __future__ import annotations

import json
import struct

import numpy as np

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


def save_checkpoint(path, manifest: dict, tensors: list[tuple[str, np.ndarray]]) -> None:
    manifest = dict(manifest)
    manifest["format_version"] = FORMAT_VERSION
    manifest["tensors"] = [{"name": name, "length": int(arr.size)} for name, arr in tensors]
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (manifest, {tensor name: float64 array})."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8:
        raise CorruptCheckpointError("file too short for the manifest length prefix")
    (manifest_len,) = struct.unpack("<Q", data[:8])
    if len(data) < 8 + manifest_len:
        raise CorruptCheckpointError("truncated manifest")
    try:
        manifest = json.loads(data[8 : 8 + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CorruptCheckpointError(f"unreadable manifest: {err}") from err
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"format version {version}, expected {FORMAT_VERSION}")
    offset = 8 + manifest_len
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest.get("tensors", []):
        nbytes = entry["length"] * 8
        if offset + nbytes > len(data):
            raise CorruptCheckpointError(f"truncated tensor {entry['name']!r}")
        tensors[entry["name"]] = np.frombuffer(
            data, dtype="<f8", count=entry["length"], offset=offset
        ).astype(np.float64)
        offset += nbytes
    if offset != len(data):
        raise CorruptCheckpointError(f"{len(data) - offset} trailing bytes")
    return manifest, tensors
