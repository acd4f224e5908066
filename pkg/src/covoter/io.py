"""File formats: CSV tables, binary PGM heatmaps, JSON documents, graphon block dumps.

PGM heatmaps are P5 (8-bit).  Pixel ``(row, col)`` shows the graphon value at
``x = col``, ``y = row``: x grows left to right and y top to bottom.  Value 1
is black and value 0 white, so dense blocks appear dark.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from covoter.graphon import StepGraphon

GRAPHON_CSV_HEADER = ["i", "j", "x_lo", "x_hi", "y_lo", "y_hi", "value"]


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def graphon_pixels(g: StepGraphon, size: int | None = None) -> np.ndarray:
    """Sample ``g`` at pixel centres; equal-block graphons default to one pixel per block."""
    if size is None:
        size = g.k if np.allclose(g.widths, 1.0 / g.k) else 256
    c = (np.arange(size) + 0.5) / size
    return g(c[:, None], c[None, :])


def write_pgm(path, values: np.ndarray) -> Path:
    """Write values in [0, 1] as an 8-bit P5 image, 1 drawn black."""
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    pix = np.round(255.0 * (1.0 - v)).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = pix.shape
    with path.open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def write_graphon_pgm(path, g: StepGraphon, size: int | None = None) -> Path:
    return write_pgm(path, graphon_pixels(g, size))


def write_graphon_csv(path, g: StepGraphon) -> Path:
    b = g.boundaries
    rows = (
        (i, j, b[i], b[i + 1], b[j], b[j + 1], g.values[i, j]) for i in range(g.k) for j in range(g.k)
    )
    return write_csv(path, GRAPHON_CSV_HEADER, rows)


def read_graphon_csv(path) -> StepGraphon:
    header, rows = read_csv(path)
    if header != GRAPHON_CSV_HEADER:
        raise ValueError(f"{path}: unexpected header {header}")
    k = int(round(math.sqrt(len(rows))))
    if k * k != len(rows):
        raise ValueError(f"{path}: {len(rows)} rows is not a square block count")
    values = np.empty((k, k))
    bounds = np.empty(k + 1)
    for r in rows:
        i, j = int(r[0]), int(r[1])
        values[i, j] = float(r[6])
        bounds[i], bounds[i + 1] = float(r[2]), float(r[3])
    signed = values.min() < 0 or values.max() > 1
    return StepGraphon(bounds, values, signed)


def write_density_csv(path, trajectory) -> Path:
    """Rows ``(t, u, f_plus, f_minus)`` ordered by time, then by grid node."""

    def rows():
        for t, s in zip(trajectory.times, trajectory.slices):
            for u, fp, fm in zip(s.grid, s.f_plus, s.f_minus):
                yield (t, u, fp, fm)

    return write_csv(path, ["t", "u", "f_plus", "f_minus"], rows())
