import os

import numpy as np
import pytest

from tomokin.fieldfile import MAGIC, FieldFile, FieldFileError, write_atomic
from tomokin.numerics import Grid1D


def test_round_trip_is_bit_exact(tmp_path, rng):
    g = (Grid1D(-1.5, 2.5, 8), Grid1D(0.0, 1.0, 4))
    vals = rng.standard_normal((8, 4))
    vals[0, 0] = -0.0
    vals[1, 1] = 5e-324
    ff = FieldFile.from_grids(g, vals)
    path = tmp_path / "a.tomk"
    ff.write(path)
    back = FieldFile.read(path)
    assert back.axes == ((-1.5, 2.5, 8), (0.0, 1.0, 4))
    assert back.values.tobytes() == vals.tobytes()
    assert path.read_bytes() == ff.to_bytes()
    assert back.to_bytes() == ff.to_bytes()


def test_header_layout():
    data = FieldFile(((0.0, 1.0, 2),), np.array([1.0, 2.0])).to_bytes()
    assert data[:5] == MAGIC
    assert len(data) == 5 + 8 + 24 + 16
    assert np.frombuffer(data[-16:], "<f8").tolist() == [1.0, 2.0]


@pytest.mark.parametrize("mangle", [
    lambda d: b"XXXXX" + d[5:],
    lambda d: d[:9],
    lambda d: d[:-8],
    lambda d: d + b"\0",
    lambda d: d[:5] + (-1).to_bytes(8, "little", signed=True) + d[13:],
])
def test_corrupt_files_rejected(mangle):
    data = FieldFile(((0.0, 1.0, 2), (0.0, 1.0, 3)), np.zeros((2, 3))).to_bytes()
    with pytest.raises(FieldFileError):
        FieldFile.from_bytes(mangle(data))


def test_shape_mismatch():
    with pytest.raises(ValueError):
        FieldFile(((0.0, 1.0, 3),), np.zeros(2))


def test_atomic_write_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "r.txt"
    write_atomic(p, "hello")
    write_atomic(p, b"bye")
    assert p.read_bytes() == b"bye"
    assert os.listdir(p.parent) == ["r.txt"]
