"""Hemisphere fields as CSV: ``theta_deg,phi_deg,value_dbmv``, one row per grid cell.

Rows are written sorted by (theta, phi) with 17 significant digits, so a
write/read cycle reproduces every value bit for bit.  The grid resolution
is inferred from the theta step on reading; the specular frame is not part
of the file and must be supplied.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dsmodel import ScatterField
from .errors import FieldFormatError
from .sphgeom import HemiGrid, SpecularFrame

HEADER = ("theta_deg", "phi_deg", "value_dbmv")


def field_to_csv(f: ScatterField, path) -> None:
    g = f.grid
    with open(path, "w", newline="") as fh:
        fh.write(",".join(HEADER) + "\n")
        # grid order is already theta-major with increasing phi
        for t, p, v in zip(g.theta, g.phi, f.values):
            fh.write(f"{t:.17g},{p:.17g},{v:.17g}\n")


def _read_rows(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FieldFormatError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != HEADER:
            raise FieldFormatError(f"{path}: line 1: expected header {','.join(HEADER)}, got {','.join(header)}")
        for n, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise FieldFormatError(f"{path}: line {n}: expected 3 columns, got {len(row)}")
            try:
                t, p, v = (float(c) for c in row)
            except ValueError:
                raise FieldFormatError(f"{path}: line {n}: non-numeric value in {row!r}") from None
            if not np.isfinite(v) or not (np.isfinite(t) and np.isfinite(p)):
                raise FieldFormatError(f"{path}: line {n}: non-finite value")
            rows.append((n, t, p, v))
    if not rows:
        raise FieldFormatError(f"{path}: no data rows")
    return rows


def _infer_resolution(thetas) -> float:
    u = np.unique(thetas)
    if u.size < 2 or u[0] != 0.0 or u[-1] != 90.0:
        raise FieldFormatError("theta values must span 0..90 degrees")
    return float(np.min(np.diff(u)))


def csv_to_field(path, frame: SpecularFrame, calibration_db: float = 0.0, resolution: float | None = None) -> ScatterField:
    """Read a field CSV; raises :class:`FieldFormatError` on missing, duplicate or malformed rows."""
    rows = _read_rows(path)
    res = _infer_resolution([r[1] for r in rows]) if resolution is None else float(resolution)
    try:
        grid = HemiGrid(res)
    except ValueError as exc:
        raise FieldFormatError(f"{path}: {exc}") from None
    values = np.full(len(grid), np.nan)
    first = {}
    for n, t, p, v in rows:
        try:
            i = grid.index(t, p)
        except ValueError:
            raise FieldFormatError(f"{path}: line {n}: ({t}, {p}) is not on the {res} degree grid") from None
        if i in first:
            raise FieldFormatError(f"{path}: line {n}: duplicate cell ({t}, {p}), first on line {first[i]}")
        first[i] = n
        values[i] = v
    missing = np.flatnonzero(np.isnan(values))
    if missing.size:
        t, p = grid.theta[missing[0]], grid.phi[missing[0]]
        raise FieldFormatError(f"{path}: {missing.size} missing cells, e.g. ({t:g}, {p:g})")
    return ScatterField(grid, values, frame, calibration_db, meta={"source": str(Path(path))})
