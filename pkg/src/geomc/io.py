"""CSV and JSON persistence for runs and frame files."""
import csv
import json
import os
import re

import numpy as np

from .diagnostics import _jsonable
from .exceptions import InvalidPointError

FLOAT_FMT = "%.17g"


def coordinate_names(kind, shape):
    """Column names for flattened samples of a given output kind.

    Stiefel frames flatten column-major and are named ``q{row}_{col}``.
    """
    if kind == "stiefel":
        p, k = shape
        return [f"q{i}_{j}" for j in range(k) for i in range(p)]
    if kind == "so3":
        return ["w", "x", "y", "z"]
    if kind == "barbell":
        return ["x", "y", "z"]
    if kind == "ball":
        return [f"theta{i}" for i in range(shape[0])]
    if kind == "simplex":
        return [f"p{i}" for i in range(shape[0])]
    return [f"x{i}" for i in range(shape[0])]


def flatten_samples(samples):
    """``(n, *shape)`` samples to ``(n, d)`` rows; matrices flatten column-major."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if samples.ndim == 3:
        return samples.transpose(0, 2, 1).reshape(n, -1)
    return samples.reshape(n, -1)


def write_samples_csv(path, names, rows):
    rows = np.asarray(rows, dtype=float).reshape(-1, len(names))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in rows:
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def read_samples_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader if row]
    return header, np.asarray(data, dtype=float).reshape(-1, len(header))


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_histogram_csv(path, values, bins=50, range_=None):
    counts, edges = np.histogram(values, bins=bins, range=range_)
    widths = np.diff(edges)
    total = counts.sum()
    density = counts / (total * widths) if total else np.zeros_like(widths)
    with open(path, "w", newline="") as fh:
        fh.write("bin_left,bin_right,count,density\n")
        for lo, hi, c, d in zip(edges[:-1], edges[1:], counts, density):
            fh.write(f"{FLOAT_FMT % lo},{FLOAT_FMT % hi},{int(c)},{FLOAT_FMT % d}\n")


_STIEFEL_COL = re.compile(r"^q(\d+)_(\d+)$")


def stiefel_shape_from_header(header):
    """Recover ``(p, k)`` from ``q{row}_{col}`` column names in column-major order."""
    idx = []
    for name in header:
        m = _STIEFEL_COL.match(name.strip())
        if not m:
            raise ValueError(f"column {name!r} is not of the form q<row>_<col>")
        idx.append((int(m.group(1)), int(m.group(2))))
    p = max(i for i, _ in idx) + 1
    k = max(j for _, j in idx) + 1
    if idx != [(i, j) for j in range(k) for i in range(p)]:
        raise ValueError("frame columns must list q<row>_<col> in column-major order")
    return p, k


def read_frames_csv(path, tol=1e-8):
    """Read Stiefel frames, one per row; raises naming the first bad row (1-based data row)."""
    header, rows = read_samples_csv(path)
    p, k = stiefel_shape_from_header(header)
    frames = rows.reshape(len(rows), k, p).transpose(0, 2, 1)
    for r, f in enumerate(frames, start=1):
        err = float(np.max(np.abs(f.T @ f - np.eye(k))))
        if not err <= tol:
            raise InvalidPointError(f"row {r}: frame is not orthonormal (error {err:.3e})")
    return frames


def validate_rows(kind, rows, tol=1e-10, params=None):
    """Max constraint violation over CSV rows for an output kind."""
    rows = np.asarray(rows, dtype=float)
    if len(rows) == 0:
        return 0.0
    if kind == "stiefel":
        p, k = params
        frames = rows.reshape(len(rows), k, p).transpose(0, 2, 1)
        gram = np.einsum("nik,nil->nkl", frames, frames)
        return float(np.max(np.abs(gram - np.eye(k))))
    if kind == "ball":
        return float(max(0.0, np.max(np.linalg.norm(rows, axis=1)) - 1.0))
    if kind == "simplex":
        return float(max(np.max(np.abs(rows.sum(axis=1) - 1.0)), max(0.0, -rows.min())))
    if kind == "barbell":
        from .targets import barbell_radius

        f = barbell_radius(params, rows[:, 0])
        return float(np.max(np.abs(np.hypot(rows[:, 1], rows[:, 2]) - f)))
    return float(np.max(np.abs(np.linalg.norm(rows, axis=1) - 1.0)))


def remove_quietly(paths):
    for p in paths:
        try:
            os.remove(p)
        except FileNotFoundError:
            pass
