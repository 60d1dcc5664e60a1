"""Bit-exact model persistence.

Binary layout (all integers little-endian):

    magic      8 bytes  b"TSFOOL1\\0"
    header_len u32
    header     header_len bytes of UTF-8 JSON:
               {"format": 1, "spec": {...}, "scaler": {...} | null,
                "history": [...], "metadata": {...}, "params": [names...]}
    blocks     one per name in header["params"], in order:
               name_len u32, name bytes, rank u32, extents rank x u64,
               values prod(extents) x float64 (little-endian raw)

Floats inside the JSON header (scaler bounds, history) survive exactly:
Python's json emits shortest round-trip representations.  Parameter data is
raw IEEE-754, so save -> load is bitwise lossless.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from ..errors import DataError
from ..data import Scaler
from ..ndtensor import Tensor
from .models import ModelSpec, TrainedModel

MAGIC = b"TSFOOL1\x00"
FORMAT_VERSION = 1


def _scaler_to_dict(s: Scaler | None) -> dict | None:
    if s is None:
        return None
    return {
        "names": list(s.names),
        "mins": [float(v) for v in s.mins],
        "maxs": [float(v) for v in s.maxs],
        "fit_range": [int(s.fit_range[0]), int(s.fit_range[1])],
    }


def _scaler_from_dict(d: dict | None) -> Scaler | None:
    if d is None:
        return None
    return Scaler(
        tuple(d["names"]),
        np.array(d["mins"], dtype=np.float64),
        np.array(d["maxs"], dtype=np.float64),
        (int(d["fit_range"][0]), int(d["fit_range"][1])),
    )


def save_model(model: TrainedModel, path: str | os.PathLike, scaler: Scaler | None = None) -> None:
    """Write a model (and optionally its data scaler) to ``path``."""
    names = list(model.params)
    header = {
        "format": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "scaler": _scaler_to_dict(scaler if scaler is not None else model.metadata.get("_scaler_obj")),
        "history": [float(v) for v in model.history],
        "metadata": {k: v for k, v in model.metadata.items() if not k.startswith("_")},
        "params": names,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in names:
            arr = np.ascontiguousarray(model.params[name].data, dtype="<f8")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_model(path: str | os.PathLike) -> tuple[TrainedModel, Scaler | None]:
    """Read a model saved by :func:`save_model`; exact inverse, bit for bit."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise DataError(f"cannot open model file {path}: {e}") from e

    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: not a model file (bad magic)")
    off = len(MAGIC)
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    if off + hlen > len(raw):
        raise DataError(f"{path}: truncated header")
    try:
        header = json.loads(raw[off : off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: corrupt header: {e}") from e
    off += hlen
    if header.get("format") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format {header.get('format')!r}")

    params: dict[str, Tensor] = {}
    for expected in header["params"]:
        if off + 4 > len(raw):
            raise DataError(f"{path}: truncated before block {expected!r}")
        (nlen,) = struct.unpack_from("<I", raw, off)
        off += 4
        name = raw[off : off + nlen].decode("utf-8")
        off += nlen
        if name != expected:
            raise DataError(f"{path}: block {name!r} where header promised {expected!r}")
        (rank,) = struct.unpack_from("<I", raw, off)
        off += 4
        shape = struct.unpack_from(f"<{rank}Q", raw, off)
        off += 8 * rank
        count = 1
        for d in shape:
            count *= d
        nbytes = count * 8
        if off + nbytes > len(raw):
            raise DataError(f"{path}: truncated data for {name!r}")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += nbytes
        params[name] = Tensor(arr, requires_grad=True)
    if off != len(raw):
        raise DataError(f"{path}: {len(raw) - off} trailing bytes after last block")

    spec = ModelSpec.from_dict(header["spec"])
    model = TrainedModel(spec, params, list(header["history"]), dict(header["metadata"]))
    return model, _scaler_from_dict(header.get("scaler"))
