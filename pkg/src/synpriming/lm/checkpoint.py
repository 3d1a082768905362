"""Binary checkpoints.

Layout (all integers little-endian)::

    8 bytes   magic  b"SYNPRMCK"
    uint32    format version (1)
    uint32    header length in bytes
    header    UTF-8 JSON, sorted keys: backend, hyper {type, fields},
              vocab (token list), provenance, tensors [[name, shape], ...]
    tensors   float32 '<f4', C order, concatenated in header order

LSTM tensors follow :func:`synpriming.lm.lstm.param_names`; k-gram
checkpoints hold ``ngrams`` (ids as floats) then ``counts``.  Saving a
float64 snapshot casts to float32; float32 snapshots round-trip bit-exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import lstm
from .model import KGramHyper, LstmHyper, ModelSnapshot
from .vocab import Vocabulary

MAGIC = b"SYNPRMCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _tensor_order(snapshot: ModelSnapshot) -> list[str]:
    if snapshot.is_lstm:
        return lstm.param_names(snapshot.hyper.nlayers)
    return ["ngrams", "counts"]


def to_bytes(snapshot: ModelSnapshot) -> bytes:
    snapshot.check_shapes()
    names = _tensor_order(snapshot)
    tensors = [np.ascontiguousarray(snapshot.params[n], dtype="<f4") for n in names]
    hyper_type = "lstm" if isinstance(snapshot.hyper, LstmHyper) else "kgram"
    header = {
        "backend": snapshot.backend,
        "hyper": {"type": hyper_type, "fields": asdict(snapshot.hyper)},
        "vocab": list(snapshot.vocab.tokens),
        "provenance": snapshot.provenance,
        "tensors": [[n, list(t.shape)] for n, t in zip(names, tensors)],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(blob)), blob]
    parts += [t.tobytes() for t in tensors]
    return b"".join(parts)


def from_bytes(data: bytes) -> ModelSnapshot:
    if data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    header = json.loads(data[16:16 + hlen].decode("utf-8"))
    pos = 16 + hlen
    params = {}
    for name, shape in header["tensors"]:
        n = int(np.prod(shape)) if shape else 1
        end = pos + 4 * n
        if end > len(data):
            raise CheckpointError(f"truncated tensor {name}")
        params[name] = np.frombuffer(data[pos:end], dtype="<f4").astype(np.float32).reshape(shape)
        pos = end
    if pos != len(data):
        raise CheckpointError("trailing bytes after last tensor")
    hyper_cls = LstmHyper if header["hyper"]["type"] == "lstm" else KGramHyper
    snap = ModelSnapshot(header["backend"], params, Vocabulary(tuple(header["vocab"])),
                         hyper_cls(**header["hyper"]["fields"]), header["provenance"])
    snap.check_shapes()
    return snap


def save_checkpoint(snapshot: ModelSnapshot, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(snapshot))


def load_checkpoint(path: str | Path) -> ModelSnapshot:
    return from_bytes(Path(path).read_bytes())
