"""Stochastic reconstruction of the rough-surface field.

Inside the main lobe each cell receives one power-density perturbation
``Pd_rough`` drawn from a t location-scale law.  Components whose magnitude
reaches the threshold (the largest draw lowered by ``threshold_offset_db``)
are strong; each is placed at a deviation angle drawn from a GEV law.  The
remaining, weak components fill the free cells outward from the specular
direction in descending order of magnitude.  Outside the main lobe the
field is the DS lobe alone.

Perturbations are additive power densities in the calibrated field unit,
``|E|^2 / eta`` with ``|E|`` in mV (see :func:`thzscatter.dsmodel.db_to_power`).
Sums that turn negative are clamped to zero power and serialized at a floor
60 dB below the weakest DS value of the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dists import Gev, TLocScale, gev_ppf, tls_sample
from .dsmodel import DsParams, GeometryConfig, ScatterField, db_to_power, ds_field, power_to_db
from .errors import PlacementError
from .sphgeom import HemiGrid, SpecularFrame, deviation_angles, main_lobe_mask, wrap_azimuth

FLOOR_MARGIN_DB = 60.0
_MAX_REDRAWS = 10000


@dataclass(frozen=True)
class RoughnessLaw:
    tls: TLocScale
    gev: Gev
    threshold_offset_db: float = 8.0

    def __post_init__(self):
        if not self.threshold_offset_db > 0:
            raise ValueError(f"threshold_offset_db must be positive, got {self.threshold_offset_db}")


@dataclass(frozen=True)
class MainLobeSpec:
    v_main: float
    h_main: float

    def __post_init__(self):
        if not (self.v_main > 0 and self.h_main > 0):
            raise ValueError(f"main-lobe widths must be positive, got ({self.v_main}, {self.h_main})")

    def check_resolution(self, resolution: float):
        if self.v_main < 2 * resolution or self.h_main < 2 * resolution:
            raise ValueError(
                f"main-lobe widths ({self.v_main}, {self.h_main}) must be at least twice "
                f"the grid resolution {resolution}"
            )

    def mask(self, grid: HemiGrid, frame: SpecularFrame) -> np.ndarray:
        return main_lobe_mask(grid, frame, self.v_main, self.h_main)


@dataclass
class PlacementMap:
    """Main-lobe assignments: cell index, perturbation value and strong/weak class."""

    cells: np.ndarray
    values: np.ndarray
    is_high: np.ndarray

    def __len__(self):
        return self.cells.size

    def dense(self, n_cells: int) -> np.ndarray:
        out = np.zeros(n_cells)
        out[self.cells] = self.values
        return out


def half_power_angle(alpha) -> np.ndarray:
    """Deviation angle (degrees) at which the DS lobe falls to one half."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("alpha must be positive: a flat lobe has no 3 dB point on the hemisphere")
    # (1 + cos psi) / 2 = cos^2(psi/2) = 2**(-1/alpha)
    return np.degrees(2.0 * np.arcsin(np.sqrt(-np.expm1(-np.log(2.0) / alpha))))


def three_db_widths(p: DsParams, frame: SpecularFrame) -> MainLobeSpec:
    """Main-lobe widths from the half-power points of the V and H lobes.

    ``v_main`` is a zenith width; ``h_main`` is converted to azimuth degrees
    by dividing the deviation width by ``sin(theta_r)``.
    """
    v = 2.0 * float(half_power_angle(p.alpha_v))
    h = 2.0 * float(half_power_angle(p.alpha_h)) / np.sin(np.radians(frame.theta_r))
    return MainLobeSpec(v, h)


def sample_rough(mask_size: int, law: RoughnessLaw, seed=None) -> np.ndarray:
    """One perturbation draw per main-lobe cell."""
    if mask_size < 1:
        raise ValueError("mask_size must be >= 1")
    return tls_sample(mask_size, law.tls, seed)


def high_mask(values, threshold_offset_db: float, domain: str = "linear") -> np.ndarray:
    """Boolean mask of strong components, ``|v| >= threshold``.

    In the ``"db"`` domain the threshold is ``max(v) - offset``.  In the
    ``"linear"`` domain values are power densities, so lowering by ``offset``
    dB is the factor ``10 ** (-offset / 10)``.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("cannot split an empty set of values")
    vmax = v.max()
    if domain == "db":
        thr = vmax - threshold_offset_db
    elif domain == "linear":
        thr = vmax * 10.0 ** (-threshold_offset_db / 10.0)
    else:
        raise ValueError(f"domain must be 'linear' or 'db', got {domain!r}")
    return np.abs(v) >= thr


def split_threshold(values, threshold_offset_db: float, domain: str = "linear"):
    """Split into ``(high, low)`` arrays, each in input order."""
    v = np.asarray(values, dtype=float)
    hi = high_mask(v, threshold_offset_db, domain)
    return v[hi], v[~hi]


def _cell_geometry(grid, frame, cells):
    psi = deviation_angles(grid.theta[cells], grid.phi[cells], frame)
    dphi = wrap_azimuth(grid.phi[cells] - frame.phi_r)
    return psi, dphi


def place_high(high_values, mask, grid: HemiGrid, frame: SpecularFrame, gev: Gev, seed=None, occupied=None):
    """Place strong components at GEV-distributed deviation angles.

    For each value a deviation angle is drawn (redrawn while outside the
    span of deviation angles in the mask) and one free mask cell within half
    a grid cell of it is chosen uniformly; if none is free the nearest free
    cell is taken.  Returns ``(cells, values)`` and updates ``occupied``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mask = np.asarray(mask)
    high_values = np.asarray(high_values, dtype=float)
    if high_values.size > mask.size:
        raise PlacementError(f"{high_values.size} strong components exceed {mask.size} main-lobe cells")
    psi, _ = _cell_geometry(grid, frame, mask)
    lo, hi = psi.min(), psi.max()
    free = np.ones(mask.size, bool) if occupied is None else ~occupied
    half = grid.resolution / 2.0
    cells = np.empty(high_values.size, dtype=int)
    for n in range(high_values.size):
        if not free.any():
            raise PlacementError("main lobe exhausted while placing strong components")
        for _ in range(_MAX_REDRAWS):
            u = rng.random()
            if u <= 0.0:
                continue
            target = float(gev_ppf(u, gev))
            if lo <= target <= hi:
                break
        else:
            raise PlacementError(f"GEV {gev} never produced a deviation angle in [{lo:.3f}, {hi:.3f}]")
        dist = np.abs(psi - target)
        near = np.flatnonzero(free & (dist <= half))
        if near.size:
            j = near[rng.integers(near.size)]
        else:
            cand = np.flatnonzero(free)
            j = cand[np.argmin(dist[cand])]
        free[j] = False
        cells[n] = mask[j]
    if occupied is not None:
        occupied[:] = ~free
    return cells, high_values


def low_cell_order(cells, grid: HemiGrid, frame: SpecularFrame) -> np.ndarray:
    """Cells ordered outward: deviation angle, then ``|dphi|``, then theta, then index."""
    cells = np.asarray(cells)
    psi, dphi = _cell_geometry(grid, frame, cells)
    # round away last-bit noise so mirror-image cells tie exactly
    keys = (cells, grid.theta[cells], np.round(np.abs(dphi), 9), np.round(psi, 9))
    return cells[np.lexsort(keys)]


def place_low(low_values, free_cells, grid: HemiGrid, frame: SpecularFrame):
    """Pair weak components, largest magnitude first, with free cells ordered outward."""
    low_values = np.asarray(low_values, dtype=float)
    free_cells = np.asarray(free_cells)
    if low_values.size != free_cells.size:
        raise PlacementError(f"{low_values.size} weak components for {free_cells.size} free cells")
    order = low_cell_order(free_cells, grid, frame)
    vals = low_values[np.argsort(-np.abs(low_values), kind="stable")]
    return order, vals


def place_components(values, mask, grid: HemiGrid, frame: SpecularFrame, law: RoughnessLaw, rng) -> PlacementMap:
    mask = np.asarray(mask)
    hi = high_mask(values, law.threshold_offset_db, "linear")
    occupied = np.zeros(mask.size, bool)
    hc, hv = place_high(values[hi], mask, grid, frame, law.gev, rng, occupied)
    lc, lv = place_low(values[~hi], mask[~occupied], grid, frame)
    cells = np.concatenate([hc, lc])
    vals = np.concatenate([hv, lv])
    cls = np.concatenate([np.ones(hc.size, bool), np.zeros(lc.size, bool)])
    order = np.argsort(cells)
    return PlacementMap(cells[order], vals[order], cls[order])


def floor_db(baseline: ScatterField) -> float:
    """Serialization level of zero-power (clamped) cells."""
    return float(baseline.values.min() - FLOOR_MARGIN_DB)


def perturbed_values(baseline_db, placement: PlacementMap, floor: float) -> np.ndarray:
    """Main-lobe field (dBmV) after adding the perturbations to the DS power."""
    total = db_to_power(baseline_db[placement.cells]) + placement.values
    out = np.full(total.shape, floor)
    pos = total > 0
    out[pos] = power_to_db(total[pos])
    return out


class Synthesizer:
    """Reusable synthesis for one scenario; the DS baseline and mask are computed once."""

    def __init__(
        self,
        grid: HemiGrid,
        frame: SpecularFrame,
        ds: DsParams,
        geometry: GeometryConfig,
        law: RoughnessLaw,
        widths: MainLobeSpec | None = None,
        calibration_db: float = 0.0,
    ):
        if abs(geometry.theta_i - frame.theta_i) > 1e-12:
            raise ValueError("geometry and frame disagree on the incidence angle")
        self.grid, self.frame, self.ds, self.geometry, self.law = grid, frame, ds, geometry, law
        self.widths = widths if widths is not None else three_db_widths(ds, frame)
        self.widths.check_resolution(grid.resolution)
        self.calibration_db = float(calibration_db)
        self.baseline = ds_field(grid, ds, geometry, frame, self.calibration_db)
        self.mask = self.widths.mask(grid, frame)
        self.floor_db = floor_db(self.baseline)

    def placement(self, seed) -> PlacementMap:
        rng = np.random.default_rng(seed)
        values = sample_rough(self.mask.size, self.law, rng)
        return place_components(values, self.mask, self.grid, self.frame, self.law, rng)

    def field(self, seed, placement: PlacementMap | None = None) -> ScatterField:
        pm = self.placement(seed) if placement is None else placement
        values = self.baseline.values.copy()
        values[pm.cells] = perturbed_values(self.baseline.values, pm, self.floor_db)
        return ScatterField(
            self.grid,
            values,
            self.frame,
            self.calibration_db,
            meta={"kind": "model", "seed": seed},
        )


def reconstruct_field(
    grid: HemiGrid,
    frame: SpecularFrame,
    p: DsParams,
    g: GeometryConfig,
    law: RoughnessLaw,
    seed,
    widths: MainLobeSpec | None = None,
    calibration_db: float = 0.0,
) -> ScatterField:
    """Full 3D field: DS lobe everywhere plus roughness perturbations in the main lobe."""
    return Synthesizer(grid, frame, p, g, law, widths, calibration_db).field(seed)
