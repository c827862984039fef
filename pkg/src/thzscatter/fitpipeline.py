"""Parameter extraction from a hemisphere field and field-to-field evaluation.

The pipeline mirrors the synthesis in reverse: DS lobes are fitted on the
V and H cuts, the 3 dB widths give the main lobe, the residual power
densities over the main lobe give the t location-scale law, the deviation
angles of the strong residuals give the GEV law, and the main-lobe field
itself is summarized by a Gumbel (EV) fit checked with a KS test.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.interpolate import RegularGridInterpolator

from .dists import MIN_FIT_SAMPLES, Ev, Gev, TLocScale, ev_cdf, ev_fit, gev_fit, ks_test, tls_fit
from .dsmodel import DsParams, GeometryConfig, ScatterField, db_to_power, ds_field, f_alpha
from .errors import FitError, GridMismatchError
from .reconstruct import (
    FLOOR_MARGIN_DB,
    MainLobeSpec,
    PlacementMap,
    RoughnessLaw,
    Synthesizer,
    high_mask,
    perturbed_values,
    three_db_widths,
)
from .sphgeom import SpecularFrame, deviation_angles, plane_cut, wrap_azimuth

log = logging.getLogger(__name__)

DS_ALPHA_GRID = np.geomspace(0.1, 1e4, 161)
"""Coarse grid of roughness exponents scanned before the 1-D refinement.  The
returned fit never has a larger residual than the best point of this grid
(the scattering coefficient is profiled out in closed form)."""

DEFAULT_PSI_MAX = 40.0
MIN_CUT_POINTS = 20


# -- cuts -------------------------------------------------------------------


def _periodic(g, z, pad=3):
    phis = np.concatenate([g.phis[-pad:] - 360.0, g.phis, g.phis[:pad] + 360.0])
    return phis, np.concatenate([z[:, -pad:], z, z[:, :pad]], axis=1)


def _interpolate(f: ScatterField, th, ph):
    """Cubic interpolation in dB; NaN where a null cell is among the neighbours."""
    g = f.grid
    null = null_mask(f)
    z = f.values.copy()
    if null.any():
        z[null] = z[~null].min()
    phis, z2 = _periodic(g, z.reshape(g.shape))
    out = RegularGridInterpolator((g.thetas, phis), z2, method="cubic")(np.column_stack([th, ph]))
    if null.any():
        _, n2 = _periodic(g, null.reshape(g.shape).astype(float))
        near = RegularGridInterpolator((g.thetas, phis), n2, method="linear")(np.column_stack([th, ph]))
        out[near > 0] = np.nan
    return out


def cut_samples(f: ScatterField, which: str, frame: SpecularFrame | None = None):
    """``(offsets, theta, phi, values)`` along a plane cut of a field.

    V-cut points are grid cells; H-cut points are interpolated (cubic in dB).
    Points at or next to zero-power cells are returned as NaN.
    """
    frame = f.frame if frame is None else frame
    pts = plane_cut(f.grid, frame, which)
    off = np.array([o for o, _ in pts])
    th = np.array([d.theta_s for _, d in pts])
    ph = np.array([d.phi_s for _, d in pts])
    if which.upper() == "V":
        idx = [f.grid.index(t, p) for t, p in zip(th, ph)]
        vals = np.where(null_mask(f)[idx], np.nan, f.values[idx])
    else:
        vals = _interpolate(f, th, ph)
    return off, th, ph, vals


def _model_const(theta_i: float, geometry: GeometryConfig, calibration_db: float) -> float:
    """dB level of the DS field for ``S = 1`` and ``F = 1`` at the lobe peak."""
    amp = float(geometry.amplitude_sq(1.0))
    return 10.0 * np.log10(amp * geometry.area_m2 * np.cos(np.radians(theta_i))) + 60.0 + calibration_db


def _profile(psi, y, alpha, theta_r, const):
    lobe = 10.0 * np.log10(np.cos(np.radians(psi) / 2.0) ** 2)
    alpha = np.atleast_1d(alpha)
    fdb = 10.0 * np.log10(f_alpha(alpha, theta_r))
    resid = y[None, :] - const + fdb[:, None] - alpha[:, None] * lobe[None, :]
    b = resid.mean(axis=1)
    rss = np.sum((resid - b[:, None]) ** 2, axis=1)
    return rss, b


def ds_plane_rss(offsets, values, alpha, s, theta_i, geometry, calibration_db=0.0, psi_max=DEFAULT_PSI_MAX, keep=None):
    """Residual sum of squares (dB^2) of a DS lobe against a cut."""
    psi, y = _select(offsets, values, psi_max, keep)
    const = _model_const(theta_i, geometry, calibration_db)
    lobe = 10.0 * np.log10(np.cos(np.radians(psi) / 2.0) ** 2)
    model = const + 20 * np.log10(s) - 10 * np.log10(f_alpha(alpha, theta_i)) + alpha * lobe
    return float(np.sum((y - model) ** 2))


def _select(offsets, values, psi_max, keep):
    psi = np.abs(np.asarray(offsets, dtype=float))
    y = np.asarray(values, dtype=float)
    sel = (psi <= psi_max) & np.isfinite(y)
    if keep is not None:
        sel &= np.asarray(keep, bool)
    return psi[sel], y[sel]


def fit_ds_plane(
    offsets,
    values,
    theta_i: float,
    geometry: GeometryConfig,
    calibration_db: float = 0.0,
    psi_max: float = DEFAULT_PSI_MAX,
    keep=None,
):
    """Least-squares DS fit of one plane cut in the dB domain; returns ``(alpha, s)``.

    ``offsets`` are signed angular offsets from the specular direction and
    ``values`` the field in dBmV.  Points with ``|offset| > psi_max`` or
    ``keep == False`` are ignored.
    """
    psi_all = np.abs(np.asarray(offsets, dtype=float))
    if psi_all.max() < psi_max - 1e-9:
        raise FitError(f"cut covers psi up to {psi_all.max():.1f} deg, need {psi_max}")
    psi, y = _select(offsets, values, psi_max, keep)
    if psi.size < MIN_CUT_POINTS:
        raise FitError(f"need at least {MIN_CUT_POINTS} cut points, got {psi.size}")
    const = _model_const(theta_i, geometry, calibration_db)
    rss, _ = _profile(psi, y, DS_ALPHA_GRID, theta_i, const)
    j = int(np.argmin(rss))
    trace = [(float(a), float(r)) for a, r in zip(DS_ALPHA_GRID, rss)]
    if j == 0:
        raise FitError("cut is flat: best roughness exponent is at the lower grid bound (alpha -> 0)", trace)
    if j == DS_ALPHA_GRID.size - 1:
        raise FitError("lobe narrower than the alpha grid resolves", trace)

    def obj(la):
        return float(_profile(psi, y, np.exp(la), theta_i, const)[0][0])

    res = optimize.minimize_scalar(
        obj,
        bounds=(np.log(DS_ALPHA_GRID[j - 1]), np.log(DS_ALPHA_GRID[j + 1])),
        method="bounded",
        options={"xatol": 1e-12, "maxiter": 500},
    )
    if not res.success:
        raise FitError(f"DS refinement failed: {res.message}", trace)
    alpha = float(np.exp(res.x))
    if res.fun > rss[j]:
        alpha = float(DS_ALPHA_GRID[j])
    _, b = _profile(psi, y, alpha, theta_i, const)
    return alpha, float(10.0 ** (b[0] / 20.0))


# -- residuals and main-lobe statistics -------------------------------------


def _check_same(a: ScatterField, b: ScatterField):
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid!r} vs {b.grid!r}")
    if a.frame != b.frame:
        raise GridMismatchError(f"frame mismatch: {a.frame!r} vs {b.frame!r}")


def null_mask(f: ScatterField) -> np.ndarray:
    """Boolean over all cells: cells at the zero-power floor.

    Clamped cells are all written at the field minimum, at least 60 dB below
    every other value, so they can be recognized without the baseline.
    """
    v = f.values
    lo = v.min()
    rest = v[v > lo]
    if rest.size == 0 or rest.min() - lo < FLOOR_MARGIN_DB - 1e-6:
        return np.zeros(v.size, bool)
    return v == lo


def null_cells(f: ScatterField, mask) -> np.ndarray:
    """Boolean over ``mask``: cells at the zero-power floor."""
    return null_mask(f)[np.asarray(mask)]


def main_lobe_values(f: ScatterField, mask) -> np.ndarray:
    """Main-lobe field values (dBmV), excluding zero-power cells."""
    mask = np.asarray(mask)
    return f.values[mask][~null_cells(f, mask)]


def extract_residuals(f: ScatterField, ds_baseline: ScatterField, mask) -> np.ndarray:
    """Per-cell ``Pd - Pd_DS`` over the mask, in mV^2/ohm."""
    _check_same(f, ds_baseline)
    mask = np.asarray(mask)
    p = db_to_power(f.values[mask])
    p[null_cells(f, mask)] = 0.0
    return p - db_to_power(ds_baseline.values[mask])


def ev_errors(a: Ev, b: Ev):
    """``(|d mu|, |d sigma|)`` between two EV fits, dB."""
    return abs(a.mu_ev - b.mu_ev), abs(a.sigma_ev - b.sigma_ev)


def evaluate_against(field_a: ScatterField, field_b: ScatterField, mask, kind: str = "min"):
    """EV fits of the main-lobe values of two fields and their parameter errors."""
    _check_same(field_a, field_b)
    ev_a = ev_fit(main_lobe_values(field_a, mask), kind)
    ev_b = ev_fit(main_lobe_values(field_b, mask), kind)
    return ev_a, ev_b, ev_errors(ev_a, ev_b)


# -- report -------------------------------------------------------------------


@dataclass
class FitReport:
    ds: DsParams
    widths: MainLobeSpec
    tls: TLocScale
    gev: Gev | None
    ev_feko: Ev
    ev_model: Ev | None
    errors_db: tuple | None
    ks_pass: bool
    ks_statistic: float = float("nan")
    n_main: int = 0
    n_high: int = 0
    theta_i: float = float("nan")
    calibration_db: float = 0.0
    extras: dict = field(default_factory=dict)

    def to_text(self) -> str:
        rows = [
            ("theta_i", self.theta_i),
            ("calibration_db", self.calibration_db),
            ("alpha_v", self.ds.alpha_v),
            ("s_v", self.ds.s_v),
            ("alpha_h", self.ds.alpha_h),
            ("s_h", self.ds.s_h),
            ("v_main", self.widths.v_main),
            ("h_main", self.widths.h_main),
            ("mu_t", self.tls.mu_t),
            ("sigma_t", self.tls.sigma_t),
            ("nu_t", self.tls.nu_t),
        ]
        if self.gev is not None:
            rows += [("k_g", self.gev.k_g), ("sigma_g", self.gev.sigma_g), ("mu_g", self.gev.mu_g)]
        rows += [
            ("ev_kind", self.ev_feko.kind),
            ("mu_ev_feko", self.ev_feko.mu_ev),
            ("sigma_ev_feko", self.ev_feko.sigma_ev),
        ]
        if self.ev_model is not None:
            rows += [("mu_ev_model", self.ev_model.mu_ev), ("sigma_ev_model", self.ev_model.sigma_ev)]
        if self.errors_db is not None:
            rows += [("err_mu_ev", self.errors_db[0]), ("err_sigma_ev", self.errors_db[1])]
        rows += [
            ("ks_pass", self.ks_pass),
            ("ks_statistic", self.ks_statistic),
            ("n_main", self.n_main),
            ("n_high", self.n_high),
        ]
        rows += sorted(self.extras.items())
        return "".join(f"{k}={_fmt(v)}\n" for k, v in rows)

    @classmethod
    def from_text(cls, text: str) -> "FitReport":
        kv = parse_kv(text)
        num = {k: float(v) for k, v in kv.items() if k not in ("ks_pass", "ev_kind")}
        gev = Gev(num["k_g"], num["sigma_g"], num["mu_g"]) if "k_g" in num else None
        kind = kv.get("ev_kind", "min")
        ev_model = Ev(num["mu_ev_model"], num["sigma_ev_model"], kind) if "mu_ev_model" in num else None
        errors = (num["err_mu_ev"], num["err_sigma_ev"]) if "err_mu_ev" in num else None
        known = {f.name for f in fields(cls)} | {
            "alpha_v", "s_v", "alpha_h", "s_h", "v_main", "h_main", "mu_t", "sigma_t", "nu_t",
            "k_g", "sigma_g", "mu_g", "ev_kind", "mu_ev_feko", "sigma_ev_feko",
            "mu_ev_model", "sigma_ev_model", "err_mu_ev", "err_sigma_ev",
        }
        return cls(
            ds=DsParams(num["s_v"], num["s_h"], num["alpha_v"], num["alpha_h"]),
            widths=MainLobeSpec(num["v_main"], num["h_main"]),
            tls=TLocScale(num["mu_t"], num["sigma_t"], num["nu_t"]),
            gev=gev,
            ev_feko=Ev(num["mu_ev_feko"], num["sigma_ev_feko"], kind),
            ev_model=ev_model,
            errors_db=errors,
            ks_pass=kv["ks_pass"].strip().lower() == "true",
            ks_statistic=num.get("ks_statistic", float("nan")),
            n_main=int(num.get("n_main", 0)),
            n_high=int(num.get("n_high", 0)),
            theta_i=num.get("theta_i", float("nan")),
            calibration_db=num.get("calibration_db", 0.0),
            extras={k: num[k] for k in num if k not in known},
        )


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def parse_kv(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FitError(f"line {n}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# -- full pipeline ------------------------------------------------------------


def _outside_lobe(theta, phi, frame, widths: MainLobeSpec, margin):
    dth = np.abs(np.asarray(theta) - frame.theta_r)
    dph = np.abs(wrap_azimuth(np.asarray(phi) - frame.phi_r))
    return ~((dth < widths.v_main / 2 + margin) & (dph < widths.h_main / 2 + margin))


def fit_ds(
    f: ScatterField,
    geometry: GeometryConfig,
    calibration_db: float | None = None,
    psi_max: float = DEFAULT_PSI_MAX,
    exclude_main_lobe: bool = True,
) -> DsParams:
    """DS parameters of both planes.

    With ``exclude_main_lobe`` a second pass refits each cut without the
    main-lobe region (plus a two-cell margin) found by the first pass, where
    the roughness perturbation lives.
    """
    frame = f.frame
    cal = f.calibration_db if calibration_db is None else calibration_db
    cuts = {w: cut_samples(f, w) for w in ("V", "H")}

    def fit(keep):
        out = {}
        for w, (off, th, ph, vals) in cuts.items():
            k = None if keep is None else keep[w]
            out[w] = fit_ds_plane(off, vals, frame.theta_i, geometry, cal, psi_max, k)
        return out

    def params(res):
        try:
            return DsParams(res["V"][1], res["H"][1], res["V"][0], res["H"][0])
        except ValueError as exc:
            raise FitError(f"fitted DS parameters are invalid: {exc}") from exc

    ds = params(fit(None))
    if exclude_main_lobe:
        widths = three_db_widths(ds, frame)
        margin = 2.0 * f.grid.resolution
        keep = {w: _outside_lobe(th, ph, frame, widths, margin) for w, (_, th, ph, _) in cuts.items()}
        ds = params(fit(keep))
    return ds


def full_fit(
    f: ScatterField,
    geometry: GeometryConfig,
    calibration_db: float | None = None,
    psi_max: float = DEFAULT_PSI_MAX,
    exclude_main_lobe: bool = True,
    threshold_offset_db: float = 8.0,
    ks_alpha: float = 0.05,
    ev_kind: str = "min",
    min_high: int = MIN_FIT_SAMPLES,
    model_seed=None,
    widths: MainLobeSpec | None = None,
) -> FitReport:
    """Extract every model parameter from one hemisphere field.

    ``widths`` overrides the main lobe derived from the fitted DS lobes.
    When ``model_seed`` is given a model realization with the fitted
    parameters is synthesized and compared to the input.  The GEV law is
    omitted (``None``) when fewer than ``min_high`` strong residuals exist;
    the shape estimate from a dozen deviation angles is too erratic to use.
    """
    frame = f.frame
    cal = f.calibration_db if calibration_db is None else calibration_db
    ds = fit_ds(f, geometry, cal, psi_max, exclude_main_lobe)
    widths = three_db_widths(ds, frame) if widths is None else widths
    mask = widths.mask(f.grid, frame)
    baseline = ds_field(f.grid, ds, geometry, frame, cal)
    resid = extract_residuals(f, baseline, mask)
    tls = tls_fit(resid)
    hi = high_mask(resid, threshold_offset_db, "linear")
    psi_high = deviation_angles(f.grid.theta[mask[hi]], f.grid.phi[mask[hi]], frame)
    gev = None
    try:
        gev = gev_fit(psi_high, minimum=min_high)
    except FitError as exc:
        log.warning("GEV fit skipped: %s", exc)
    values = main_lobe_values(f, mask)
    ev = ev_fit(values, ev_kind)
    ks = ks_test(values, lambda x: ev_cdf(x, ev), ks_alpha)
    ev_model = errors = None
    if model_seed is not None and gev is not None:
        law = RoughnessLaw(tls, gev, threshold_offset_db)
        model = Synthesizer(f.grid, frame, ds, geometry, law, widths, cal).field(model_seed)
        ev_model = ev_fit(main_lobe_values(model, mask), ev_kind)
        errors = ev_errors(ev, ev_model)
    return FitReport(
        ds=ds,
        widths=widths,
        tls=tls,
        gev=gev,
        ev_feko=ev,
        ev_model=ev_model,
        errors_db=errors,
        ks_pass=bool(ks.passed),
        ks_statistic=ks.statistic,
        n_main=int(mask.size),
        n_high=int(hi.sum()),
        theta_i=frame.theta_i,
        calibration_db=cal,
    )


# -- seed ensembles and calibration --------------------------------------------


@dataclass
class EvEnsemble:
    """Per-seed EV fits of main-lobe fields, with their medians."""

    mu: np.ndarray
    sigma: np.ndarray

    @property
    def median_mu(self) -> float:
        return float(np.median(self.mu))

    @property
    def median_sigma(self) -> float:
        return float(np.median(self.sigma))


def _ensemble_from(synth: Synthesizer, placements: Sequence[PlacementMap], shift_db: float, kind="min"):
    base = synth.baseline.values + shift_db
    floor = base.min() - FLOOR_MARGIN_DB
    mu, sigma = [], []
    for pm in placements:
        vals = perturbed_values(base, pm, floor)
        ev = ev_fit(vals[vals > floor], kind)
        mu.append(ev.mu_ev)
        sigma.append(ev.sigma_ev)
    return EvEnsemble(np.array(mu), np.array(sigma))


def ev_ensemble(synth: Synthesizer, seeds, kind: str = "min") -> EvEnsemble:
    """EV fits of the main lobe for each seed of a scenario."""
    placements = [synth.placement(s) for s in seeds]
    return _ensemble_from(synth, placements, 0.0, kind)


def fit_calibration(
    synth: Synthesizer,
    target_mu: float,
    seeds,
    bracket=(-40.0, 120.0),
    kind: str = "min",
) -> float:
    """Calibration constant (dB) at which the median main-lobe ``mu_EV`` hits ``target_mu``.

    Placements do not depend on the calibration, so they are drawn once and
    only the power sums are re-evaluated while solving.
    """
    placements = [synth.placement(s) for s in seeds]
    c0 = synth.calibration_db

    def gap(c):
        return _ensemble_from(synth, placements, c - c0, kind).median_mu - target_mu

    lo, hi = bracket
    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo * g_hi > 0:
        raise FitError(f"target mu_EV {target_mu} not bracketed by calibration {bracket}", [(lo, g_lo), (hi, g_hi)])
    return float(optimize.brentq(gap, lo, hi, xtol=1e-6))
