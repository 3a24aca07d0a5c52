"""Binary field files.

Layout (all little-endian)::

    b"TOMK1"                      magic, 5 bytes
    int64   naxes
    naxes x (float64 lo, float64 hi, int64 n)
    float64 payload[prod(n)]      row-major

Files are written to a temporary name in the target directory and renamed,
so readers never see a partial file.
"""
from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError

MAGIC = b"TOMK1"
_AXIS = struct.Struct("<ddq")
_COUNT = struct.Struct("<q")


class FieldFileError(ArgumentError):
    """Malformed field file."""


@dataclass(frozen=True, eq=False)
class FieldFile:
    """Array plus one (lo, hi, n) descriptor per axis."""

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        axes = tuple((float(lo), float(hi), int(n)) for lo, hi, n in self.axes)
        vals = np.ascontiguousarray(self.values, dtype="<f8")
        if vals.shape != tuple(a[2] for a in axes):
            raise ArgumentError(f"values shape {vals.shape} does not match axes "
                                f"{tuple(a[2] for a in axes)}")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_grids(cls, grids: Sequence, values) -> "FieldFile":
        """Axes from objects with ``lo``, ``hi`` and ``n`` (e.g. Grid1D)."""
        return cls(tuple((g.lo, g.hi, g.n) for g in grids), values)

    def to_bytes(self) -> bytes:
        parts = [MAGIC, _COUNT.pack(len(self.axes))]
        parts += [_AXIS.pack(*a) for a in self.axes]
        parts.append(self.values.tobytes(order="C"))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "FieldFile":
        if data[:5] != MAGIC:
            raise FieldFileError("not a TOMK1 field file (bad magic)")
        off = 5
        if len(data) < off + _COUNT.size:
            raise FieldFileError("truncated header")
        (naxes,) = _COUNT.unpack_from(data, off)
        off += _COUNT.size
        if naxes < 0 or len(data) < off + naxes * _AXIS.size:
            raise FieldFileError(f"truncated or invalid axis table ({naxes} axes)")
        axes = []
        for _ in range(naxes):
            lo, hi, n = _AXIS.unpack_from(data, off)
            if n < 0:
                raise FieldFileError(f"negative axis length {n}")
            axes.append((lo, hi, n))
            off += _AXIS.size
        count = int(np.prod([a[2] for a in axes], dtype=np.int64))
        if len(data) - off != 8 * count:
            raise FieldFileError(f"payload has {len(data) - off} bytes, expected {8 * count}")
        vals = np.frombuffer(data, dtype="<f8", count=count, offset=off)
        return cls(tuple(axes), vals.reshape([a[2] for a in axes]))

    def write(self, path) -> None:
        write_atomic(path, self.to_bytes())

    @classmethod
    def read(cls, path) -> "FieldFile":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def write_atomic(path, data) -> None:
    """Write bytes or text to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
