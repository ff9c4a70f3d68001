"""
Binary encoder checkpoints.

Layout: magic ``FXGW``, uint16 format version, uint32 manifest length, UTF-8
JSON manifest, then every tensor as little-endian float32 in manifest order.
The manifest carries the encoder config, tensor names and shapes, and a free
``meta`` mapping (frame geometry, effect config, epoch, validation loss).
"""
from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..errors import ContractError
from .network import EncoderConfig, EncoderWeights

logger = logging.getLogger(__name__)

MAGIC = b"FXGW"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHI")


def save_checkpoint(path: str | Path, weights: EncoderWeights, meta: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensors = [("param", k, v) for k, v in weights.params.items()]
    tensors += [("buffer", k, v) for k, v in weights.buffers.items()]
    manifest = {
        "encoder": weights.cfg.model_dump(mode="json"),
        "n_features": weights.n_features,
        "n_outputs": weights.n_outputs,
        "tensors": [{"kind": kind, "name": name, "shape": list(arr.shape)} for kind, name, arr in tensors],
        "meta": meta or {},
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for _, _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    tmp.replace(path)
    logger.debug("Saved checkpoint %s (%d tensors)", path, len(tensors))
    return path


def load_checkpoint(path: str | Path) -> Tuple[EncoderWeights, Dict[str, Any]]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ContractError(f"{path}: truncated checkpoint header")
    magic, version, n_manifest = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ContractError(f"{path}: not an encoder checkpoint (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ContractError(f"{path}: unsupported checkpoint format version {version}")
    start = _HEADER.size
    try:
        manifest = json.loads(data[start:start + n_manifest].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContractError(f"{path}: unreadable manifest") from exc
    offset = start + n_manifest
    params: Dict[str, np.ndarray] = {}
    buffers: Dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        n_bytes = int(np.prod(shape, dtype=np.int64)) * 4
        if offset + n_bytes > len(data):
            raise ContractError(f"{path}: tensor '{entry['name']}' runs past end of file")
        arr = np.frombuffer(data, dtype="<f4", count=n_bytes // 4, offset=offset).astype(np.float64).reshape(shape)
        (params if entry["kind"] == "param" else buffers)[entry["name"]] = arr
        offset += n_bytes
    if offset != len(data):
        raise ContractError(f"{path}: {len(data) - offset} trailing bytes after last tensor")
    weights = EncoderWeights(
        cfg=EncoderConfig.model_validate(manifest["encoder"]),
        n_features=int(manifest["n_features"]),
        n_outputs=int(manifest["n_outputs"]),
        params=params,
        buffers=buffers,
    )
    return weights, manifest.get("meta", {})
