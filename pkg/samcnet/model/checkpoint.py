"""
Checkpoint files.

Layout: the 8-byte magic ``SAMCNET1``, an unsigned 64-bit little-endian
header length, the UTF-8 JSON header, then the payload of little-endian
float64 arrays. The header holds the model config, vocabulary, class
names, init seed and a manifest of (name, shape, byte offset) per array.
Writes go to a temporary file that is renamed into place.
"""

from __future__ import annotations

import json
import logging
import os
import struct
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from samcnet.config import ModelConfig
from samcnet.data.pattern import CategoryVocabulary
from samcnet.errors import CheckpointError, ConfigError
from samcnet.model.network import ModelParams

logger = logging.getLogger(__name__)

MAGIC = b"SAMCNET1"
FORMAT_VERSION = 1
_LENGTH = struct.Struct("<Q")
_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    """A loaded model plus the metadata needed to feed it data."""
    params: ModelParams
    vocabulary: CategoryVocabulary
    class_names: tuple[str, ...]
    metadata: dict[str, Any]


def _arrays(params: ModelParams) -> dict[str, np.ndarray]:
    arrays = {name: t.data for name, t in params.named_parameters().items()}
    arrays.update(params.named_buffers())
    return arrays


def save_checkpoint(
    params: ModelParams,
    vocabulary: CategoryVocabulary,
    class_names: tuple[str, ...],
    path: str | Path,
    metadata: dict[str, Any] | None = None,
) -> None:
    path = Path(path)
    manifest = []
    chunks = []
    offset = 0
    for name, array in sorted(_arrays(params).items()):
        raw = np.ascontiguousarray(array, dtype=_DTYPE).tobytes()
        manifest.append({"name": name, "shape": list(array.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)

    header = {
        "version": FORMAT_VERSION,
        "config": asdict(params.config),
        "num_categories": params.num_categories,
        "num_classes": params.num_classes,
        "vocabulary": list(vocabulary.names),
        "class_names": list(class_names),
        "metadata": metadata or {},
        "manifest": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(_LENGTH.pack(len(header_bytes)))
            fh.write(header_bytes)
            for raw in chunks:
                fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.info("Checkpoint written to %s (%d arrays, %d bytes payload)", path, len(manifest), offset)


def _read_header(blob: bytes, path: Path) -> tuple[dict[str, Any], int]:
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a SAMCNet checkpoint")
    start = len(MAGIC) + _LENGTH.size
    if len(blob) < start:
        raise CheckpointError(f"{path}: truncated header")
    (length,) = _LENGTH.unpack_from(blob, len(MAGIC))
    try:
        header = json.loads(blob[start:start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from exc
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('version')!r}")
    return header, start + length


def load_checkpoint(path: str | Path, config: ModelConfig | None = None) -> Checkpoint:
    """
    Rebuild the model stored at ``path``.

    With ``config`` the arrays are loaded into a model of that architecture
    instead of the stored one; any shape disagreement is rejected.
    """
    path = Path(path)
    blob = path.read_bytes()
    header, payload_start = _read_header(blob, path)
    if config is None:
        try:
            config = ModelConfig.from_dict(header["config"])
        except (ConfigError, TypeError, KeyError) as exc:
            raise CheckpointError(f"{path}: invalid stored config: {exc}") from exc

    params = ModelParams.initialize(config, header["num_categories"], header["num_classes"], seed=0)
    targets = _arrays(params)
    stored = {entry["name"]: entry for entry in header["manifest"]}
    missing = sorted(set(targets) - set(stored))
    extra = sorted(set(stored) - set(targets))
    if missing or extra:
        raise CheckpointError(f"{path}: parameter set mismatch (missing {missing}, unexpected {extra})")

    for name, target in targets.items():
        entry = stored[name]
        shape = tuple(entry["shape"])
        if shape != target.shape:
            raise CheckpointError(
                f"{path}: parameter {name!r} has shape {shape} in the checkpoint, model expects {target.shape}"
            )
        start = payload_start + entry["offset"]
        count = int(np.prod(shape, dtype=np.int64))
        end = start + count * _DTYPE.itemsize
        if end > len(blob):
            raise CheckpointError(f"{path}: payload truncated at {name!r}")
        target[...] = np.frombuffer(blob, dtype=_DTYPE, count=count, offset=start).reshape(shape)

    logger.info("Loaded checkpoint %s (%d arrays)", path, len(targets))
    return Checkpoint(
        params=params,
        vocabulary=CategoryVocabulary(tuple(header["vocabulary"])),
        class_names=tuple(header["class_names"]),
        metadata=header.get("metadata", {}),
    )
