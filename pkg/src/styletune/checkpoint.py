"""Bit-exact checkpoint persistence: JSON manifest + raw float32 blob.

A checkpoint at ``path`` is a directory holding ``manifest.json`` and
``blob.bin``. Tensors are stored little-endian float32, concatenated in
table order; every record carries its byte offset, length and sha256.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np
import torch

from .errors import CorruptCheckpoint, IncompatibleCheckpoint, IncompatibleConfig, UnsupportedVersion

FORMAT_VERSION = "styletune-ckpt-v1"
MANIFEST = "manifest.json"
BLOB = "blob.bin"
_DTYPE = np.dtype("<f4")

PathLike = Union[str, os.PathLike]


@dataclass
class Checkpoint:
    tensors: "OrderedDict[str, torch.Tensor]"
    config: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def names(self):
        return list(self.tensors)

    def shapes(self):
        return OrderedDict((n, tuple(t.shape)) for n, t in self.tensors.items())

    def subset(self, prefix: str) -> "OrderedDict[str, torch.Tensor]":
        return OrderedDict((n, t) for n, t in self.tensors.items() if n.startswith(prefix))


def to_checkpoint(tables: Mapping[str, torch.Tensor], config: dict, metadata: Optional[dict] = None) -> Checkpoint:
    tensors = OrderedDict((n, t.detach().to("cpu", torch.float32).clone()) for n, t in tables.items())
    return Checkpoint(tensors, dict(config), dict(metadata or {}))


def save(ckpt: Checkpoint, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records = []
    offset = 0
    tmp = Path(tempfile.mkdtemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent))
    try:
        with open(tmp / BLOB, "wb") as f:
            for name, t in ckpt.tensors.items():
                data = np.ascontiguousarray(t.detach().cpu().numpy(), dtype=_DTYPE).tobytes()
                f.write(data)
                records.append(
                    {
                        "name": name,
                        "dtype": "float32",
                        "shape": list(t.shape),
                        "offset": offset,
                        "length": len(data),
                        "sha256": hashlib.sha256(data).hexdigest(),
                    }
                )
                offset += len(data)
        if len({r["name"] for r in records}) != len(records):
            raise CorruptCheckpoint("duplicate tensor names")
        manifest = {
            "format": FORMAT_VERSION,
            "config": ckpt.config,
            "metadata": ckpt.metadata,
            "tensors": records,
        }
        (tmp / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=False))
        if path.exists():
            shutil.rmtree(path)
        os.replace(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return path


def load(path: PathLike, expect_config: Optional[Mapping] = None) -> Checkpoint:
    """Load and verify a checkpoint.

    With ``expect_config``, every key given there must match the stored
    generator config (e.g. ``{"max_resolution": 32}``).
    """
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST).read_text())
        blob = (path / BLOB).read_bytes()
    except FileNotFoundError as e:
        raise CorruptCheckpoint(f"missing checkpoint file: {e.filename}") from None
    except json.JSONDecodeError as e:
        raise CorruptCheckpoint(f"unreadable manifest: {e}") from None
    if manifest.get("format") != FORMAT_VERSION:
        raise UnsupportedVersion(f"unsupported checkpoint format {manifest.get('format')!r}")

    tensors = OrderedDict()
    expected_offset = 0
    for rec in manifest["tensors"]:
        name = rec["name"]
        if rec["dtype"] != "float32":
            raise UnsupportedVersion(f"{name}: unsupported dtype {rec['dtype']}")
        if name in tensors:
            raise CorruptCheckpoint(f"duplicate tensor name {name}")
        n_elem = int(np.prod(rec["shape"], dtype=np.int64))
        if rec["offset"] != expected_offset or rec["length"] != 4 * n_elem:
            raise CorruptCheckpoint(f"{name}: record shape/offset inconsistent with manifest")
        end = rec["offset"] + rec["length"]
        if end > len(blob):
            raise CorruptCheckpoint(f"{name}: blob truncated ({len(blob)} bytes, need {end})")
        data = blob[rec["offset"]:end]
        if hashlib.sha256(data).hexdigest() != rec["sha256"]:
            raise CorruptCheckpoint(f"{name}: checksum mismatch")
        arr = np.frombuffer(data, dtype=_DTYPE).reshape(rec["shape"])
        tensors[name] = torch.from_numpy(arr.astype(np.float32))
        expected_offset = end
    if expected_offset != len(blob):
        raise CorruptCheckpoint(f"blob has {len(blob) - expected_offset} trailing bytes")

    config = manifest.get("config", {})
    if expect_config:
        stored = config.get("generator", {})
        bad = {k: (stored.get(k), v) for k, v in expect_config.items() if stored.get(k) != v}
        if bad:
            raise IncompatibleConfig(
                "checkpoint config does not match request: "
                + ", ".join(f"{k}: stored {s!r} vs requested {r!r}" for k, (s, r) in bad.items())
            )
    return Checkpoint(tensors, config, manifest.get("metadata", {}))


def check_compatible(a: Checkpoint, b: Checkpoint, prefix: str = ""):
    """Raise :class:`IncompatibleCheckpoint` listing divergent names/shapes."""
    sa = OrderedDict((n, s) for n, s in a.shapes().items() if n.startswith(prefix))
    sb = OrderedDict((n, s) for n, s in b.shapes().items() if n.startswith(prefix))
    if list(sa.items()) == list(sb.items()):
        return
    problems = []
    for n in sorted(set(sa) | set(sb)):
        if sa.get(n) != sb.get(n):
            problems.append(f"{n}: {sa.get(n)} vs {sb.get(n)}")
    if not problems:
        problems.append("parameter order differs")
    raise IncompatibleCheckpoint("checkpoints differ: " + "; ".join(problems[:20]))
