"""
Checkpoint file format for policy parameters and optimizer state.

Layout: header (magic, version, manifest length, blob length, CRC32 of manifest + blob),
a UTF-8 JSON manifest, then every array as little-endian float64 in row-major order.
Save then load is bit-exact.
"""
import json
import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.errors import CheckpointError
from core.policy import AdamState, PolicyParams

logger = logging.getLogger(__name__)

MAGIC = b"CRLK"
FORMAT_VERSION = 1
HEADER_FORMAT = ">4sHIII"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)
ARRAY_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    params: PolicyParams
    optimizer: AdamState
    config: Dict[str, Any] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)


def _named_arrays(ckpt: Checkpoint) -> List[Tuple[str, np.ndarray]]:
    named = [(f"param/{k}", a) for k, a in ckpt.params.arrays.items()]
    named += [(f"adam_m/{k}", a) for k, a in ckpt.optimizer.m.items()]
    named += [(f"adam_v/{k}", a) for k, a in ckpt.optimizer.v.items()]
    return named


def pack(ckpt: Checkpoint) -> bytes:
    entries, chunks, offset = [], [], 0
    for name, array in _named_arrays(ckpt):
        raw = np.ascontiguousarray(array, dtype=ARRAY_DTYPE).tobytes(order="C")
        entries.append({"name": name, "shape": list(array.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    manifest = json.dumps({
        "arrays": entries,
        "adam_t": ckpt.optimizer.t,
        "config": ckpt.config,
        "metadata": ckpt.metadata,
    }, sort_keys=True, ensure_ascii=False).encode("utf-8")
    blob = b"".join(chunks)
    checksum = zlib.crc32(manifest + blob) & 0xFFFFFFFF
    header = struct.pack(HEADER_FORMAT, MAGIC, FORMAT_VERSION, len(manifest), len(blob), checksum)
    return header + manifest + blob


def unpack(data: bytes) -> Checkpoint:
    if len(data) < HEADER_SIZE:
        raise CheckpointError(f"Checkpoint too short ({len(data)} bytes)")
    magic, version, manifest_len, blob_len, checksum = struct.unpack(HEADER_FORMAT, data[:HEADER_SIZE])
    if magic != MAGIC:
        raise CheckpointError(f"Not a checkpoint file (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version}")
    body = data[HEADER_SIZE:]
    if len(body) != manifest_len + blob_len:
        raise CheckpointError(f"Truncated checkpoint: {len(body)} of {manifest_len + blob_len} body bytes")
    if (zlib.crc32(body) & 0xFFFFFFFF) != checksum:
        raise CheckpointError("Checkpoint CRC mismatch")

    try:
        manifest = json.loads(body[:manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Unreadable checkpoint manifest: {e}") from e
    blob = body[manifest_len:]
    groups: Dict[str, Dict[str, np.ndarray]] = {"param": {}, "adam_m": {}, "adam_v": {}}
    for entry in manifest["arrays"]:
        group, _, key = entry["name"].partition("/")
        start, stop = entry["offset"], entry["offset"] + entry["nbytes"]
        array = np.frombuffer(blob[start:stop], dtype=ARRAY_DTYPE).reshape(entry["shape"])
        groups[group][key] = array.astype(np.float64)
    return Checkpoint(
        params=PolicyParams(groups["param"]),
        optimizer=AdamState(groups["adam_m"], groups["adam_v"], int(manifest["adam_t"])),
        config=manifest.get("config", {}),
        metadata=manifest.get("metadata", {}),
    )


def save_checkpoint(path: str, params: PolicyParams, optimizer: AdamState,
                    config: Optional[Dict[str, Any]] = None,
                    metadata: Optional[Dict[str, Any]] = None) -> str:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(pack(Checkpoint(params, optimizer, config or {}, metadata or {})))
    logger.info(f"[Checkpoint] Saved {target}")
    return str(target)


def load_checkpoint(path: str) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    return unpack(data)
