"""File formats: PGM images, CSV tables and JSON snapshots.

Floats are written in scientific notation with 10 significant digits so
that reruns with the same inputs produce byte-identical files.
"""
import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from fairpd.errors import ConfigurationError, DimensionError

FLOAT_FMT = "{:.9e}"


def format_value(v):
    """Render one CSV cell."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return FLOAT_FMT.format(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path, columns, rows):
    """Write ``rows`` (dicts or sequences) under the header ``columns``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(c) for c in columns]
            w.writerow([format_value(v) for v in row])
    return path


def read_csv(path):
    """Return ``(columns, rows)`` with numeric cells parsed to float."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        columns = next(r)
        rows = []
        for raw in r:
            row = {}
            for c, cell in zip(columns, raw):
                try:
                    row[c] = float(cell)
                except ValueError:
                    row[c] = cell
            rows.append(row)
    return columns, rows


def write_grid_csv(path, grid):
    """Write a 1-D or 2-D array row-major, one matrix row per line."""
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    if grid.ndim != 2:
        raise DimensionError("only 1-D and 2-D grids can be written as CSV")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in grid:
            w.writerow([format_value(float(v)) for v in row])
    return path


def read_grid_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_trace(path, trace, include_time=False):
    """Per-iteration CSV; ``time_s`` only when ``include_time`` (not reproducible)."""
    cols = [c for c in trace.COLUMNS if include_time or c != "time_s"]
    return write_csv(path, cols, trace.rows())


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


# ------------------------------------------------------------------- PGM


def _sidecar(path):
    return Path(str(path) + ".json")


def write_pgm(path, image, lower=None, upper=None):
    """Write a 16-bit binary PGM plus a JSON sidecar with the value range.

    Values are mapped linearly from ``[lower, upper]`` (default: ``[0, 1]``
    when the image fits, otherwise its min/max) onto ``0..65535``.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError("PGM images must be 2-D")
    if lower is None or upper is None:
        lo, hi = float(img.min()), float(img.max())
        if lo >= 0.0 and hi <= 1.0:
            lo, hi = 0.0, 1.0
        lower = lo if lower is None else lower
        upper = hi if upper is None else upper
    span = upper - lower if upper > lower else 1.0
    q = np.clip(np.round((img - lower) / span * 65535.0), 0, 65535).astype(">u2")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii"))
        fh.write(q.tobytes())
    write_json(_sidecar(path), {"lower": float(lower), "upper": float(upper), "maxval": 65535})
    return path


def _pgm_tokens(data):
    """Yield header tokens and the offset just past the last one."""
    tokens = []
    i = 0
    while len(tokens) < 4:
        while i < len(data) and chr(data[i]).isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not chr(data[j]).isspace():
            j += 1
        if j == i:
            raise ConfigurationError("truncated PGM header")
        tokens.append(data[i:j].decode("ascii"))
        i = j
    return tokens, i + 1


def read_pgm(path):
    """Read a P2/P5 PGM as float64.

    Intensities are divided by ``maxval``; if a sidecar written by
    ``write_pgm`` is present the original value range is restored.
    """
    data = Path(path).read_bytes()
    tokens, offset = _pgm_tokens(data)
    magic, width, height, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == "P5":
        dtype = ">u2" if maxval > 255 else "u1"
        count = width * height
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    elif magic == "P2":
        arr = np.array(data[offset:].split(), dtype=np.int64)[: width * height]
    else:
        raise ConfigurationError(f"unsupported PGM magic {magic!r}")
    if arr.size != width * height:
        raise ConfigurationError("PGM pixel data is truncated")
    img = arr.reshape(height, width).astype(np.float64) / float(maxval)
    side = _sidecar(path)
    if os.path.exists(side):
        meta = json.loads(side.read_text())
        img = meta["lower"] + img * (meta["upper"] - meta["lower"])
    return img
