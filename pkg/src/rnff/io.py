"""File formats: dense kernel CSV/binary, column CSVs and JSON summaries.

All floats are written with 17 significant digits so they read back to the
identical double. CSVs use ',' delimiters, '.' decimals, LF line endings
and UTF-8.
"""

import json
import struct

import numpy as np

FLOAT_FMT = "%.17g"
MAGIC = b"RNFF"


def fmt(value):
    return FLOAT_FMT % value


def write_kernel_csv(path, K, xs):
    """Dense matrix with a header row of the x locations."""
    K = np.asarray(K)
    if np.iscomplexobj(K):
        raise ValueError("kernel CSV export needs a real matrix")
    xs = np.asarray(xs, dtype=float).ravel()
    if K.shape != (xs.size, xs.size):
        raise ValueError(f"matrix shape {K.shape} does not match {xs.size} locations")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(fmt(x) for x in xs) + "\n")
        if xs.size:
            np.savetxt(fh, K, fmt=FLOAT_FMT, delimiter=",", newline="\n")


def read_kernel_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        xs = np.array([float(v) for v in header.split(",")]) if header else np.zeros(0)
        if xs.size == 0:
            return xs, np.zeros((0, 0))
        K = np.loadtxt(fh, delimiter=",", ndmin=2)
    return xs, K


def write_kernel_bin(path, K):
    """Magic ``RNFF``, two little-endian u32 dimensions, f64 entries row-major."""
    K = np.ascontiguousarray(K, dtype="<f8")
    rows, cols = K.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", rows, cols))
        fh.write(K.tobytes(order="C"))


def read_kernel_bin(path):
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not an RNFF kernel file")
        rows, cols = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} entries, found {data.size}")
    return data.reshape(rows, cols).astype(float)


def write_columns(path, header, columns):
    """CSV with a header line and one row per index of the given columns."""
    cols = [np.asarray(c).ravel() for c in columns]
    n = cols[0].size if cols else 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(_cell(c[i]) for c in cols) + "\n")


def _cell(v):
    if isinstance(v, (str, np.str_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt(float(v))


def read_columns(path, required=("x", "z")):
    """Parse a CSV with a header; returns ``{name: array}`` for ``required``.

    Raises ValueError naming the offending line on malformed input.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    missing = [c for c in required if c not in header]
    if missing:
        raise ValueError(f"{path}:1: missing column(s) {', '.join(missing)}")
    idx = [header.index(c) for c in required]
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise ValueError(
                f"{path}:{lineno}: expected {len(header)} fields, found {len(cells)}"
            )
        try:
            row = [float(cells[i]) for i in idx]
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric value in {line!r}") from None
        if not all(np.isfinite(row)):
            raise ValueError(f"{path}:{lineno}: non-finite value in {line!r}")
        rows.append(row)
    arr = np.array(rows, dtype=float).reshape(-1, len(required))
    return {name: arr[:, k] for k, name in enumerate(required)}


def _round_trip(obj):
    if isinstance(obj, dict):
        return {k: _round_trip(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_trip(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_round_trip(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
