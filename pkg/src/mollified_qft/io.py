"""Deterministic CSV/JSON emission.

CSV bodies contain only data (floats via repr), so identical runs produce
identical files; timestamps and timings go to the JSON summary only.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    return v


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def mollifier_rows(rho):
    """(x, Re, Im) samples of a mollifier."""
    vals = np.asarray(rho.values, dtype=complex)
    return [(float(x), v.real, v.imag) for x, v in zip(np.asarray(rho.x).ravel(), vals)]


def write_operator(path, op, meta=None):
    """Coordinate list (row, col, Re, Im) plus a JSON header next to it."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    rows = [(int(coo.row[i]), int(coo.col[i]), coo.data[i].real, coo.data[i].imag) for i in order]
    csv_path = write_csv(path, ["row", "col", "re", "im"], rows)
    header = {"dim": op.basis.dim, "n_max": op.basis.n_max, "K": op.basis.K,
              "states": op.basis.states.tolist(), "shift": list(op.shift), "safe": op.safe}
    header.update(meta or {})
    write_json(os.fspath(csv_path) + ".json", header)
    return csv_path
