import os
import tempfile

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rnff import io

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(0, 6), st.just(1)), elements=finite))
def test_kernel_csv_round_trip(col):
    n = col.shape[0]
    K = np.outer(col[:, 0], np.ones(n)) if n else np.zeros((0, 0))
    xs = np.arange(n) * 0.1
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "k.csv")
        io.write_kernel_csv(path, K, xs)
        xs2, K2 = io.read_kernel_csv(path)
    assert np.array_equal(xs2, xs)
    assert np.array_equal(K2, K)


def test_kernel_bin_round_trip(tmp_path):
    K = np.random.default_rng(0).standard_normal((7, 7))
    path = tmp_path / "k.bin"
    io.write_kernel_bin(path, K)
    raw = path.read_bytes()
    assert raw[:4] == b"RNFF"
    assert int.from_bytes(raw[4:8], "little") == 7
    assert len(raw) == 12 + 49 * 8
    assert np.array_equal(io.read_kernel_bin(path), K)


def test_kernel_bin_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"XXXX" + bytes(8))
    with pytest.raises(ValueError):
        io.read_kernel_bin(path)
    path.write_bytes(b"RNFF" + (2).to_bytes(4, "little") * 2 + bytes(8))
    with pytest.raises(ValueError):
        io.read_kernel_bin(path)


def test_kernel_csv_rejects_complex(tmp_path):
    with pytest.raises(ValueError):
        io.write_kernel_csv(tmp_path / "k.csv", np.eye(2) * 1j, [0, 1])
    with pytest.raises(ValueError):
        io.write_kernel_csv(tmp_path / "k.csv", np.eye(2), [0, 1, 2])


@settings(max_examples=50)
@given(st.lists(finite, min_size=0, max_size=20))
def test_column_float_round_trip(vals):
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "c.csv")
        io.write_columns(path, ("x", "z"), [vals, vals[::-1]])
        got = io.read_columns(path, ("x", "z"))
    assert np.array_equal(got["x"], np.array(vals, dtype=float))
    assert np.array_equal(got["z"], np.array(vals[::-1], dtype=float))


def test_columns_format(tmp_path):
    path = tmp_path / "c.csv"
    io.write_columns(path, ("path_id", "x"), [np.array([0, 1]), np.array([0.1, 2.0])])
    assert path.read_bytes() == b"path_id,x\n0,0.10000000000000001\n1,2\n"


@pytest.mark.parametrize("body,line", [
    ("x,z\n1,2\n3\n", 3),
    ("x,z\n1,2\n3,abc\n", 3),
    ("x,z\n1,nan\n", 2),
])
def test_read_columns_names_bad_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(ValueError, match=f":{line}:"):
        io.read_columns(path)


def test_read_columns_missing_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="missing column"):
        io.read_columns(path)
    path.write_text("")
    with pytest.raises(ValueError, match="empty"):
        io.read_columns(path)


def test_json_round_trip(tmp_path):
    obj = {"b": np.float64(0.1), "a": [np.int64(3), 1e-17], "c": {"d": True}}
    path = tmp_path / "s.json"
    io.write_json(path, obj)
    back = io.read_json(path)
    assert back == {"a": [3, 1e-17], "b": 0.1, "c": {"d": True}}
    assert path.read_text().index('"a"') < path.read_text().index('"b"')
