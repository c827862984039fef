"""Acceptance criteria 1-7, each reporting one PASS/FAIL line.

The lines are collected and repeated in the terminal summary under
"acceptance criteria".
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from conftest import make_synth
from thzscatter.dists import (
    Ev,
    Gev,
    TLocScale,
    ev_cdf,
    ev_fit,
    ev_pdf,
    ev_sample,
    gev_cdf,
    gev_fit,
    gev_pdf,
    gev_sample,
    ks_test,
    tls_cdf,
    tls_fit,
    tls_pdf,
    tls_sample,
)
from thzscatter.dsmodel import DEFAULT_CALIBRATION_DB, ETA, DsParams, GeometryConfig, pd_ds_grid
from thzscatter.fitpipeline import ev_ensemble, extract_residuals, fit_calibration, full_fit
from thzscatter.presets import dump_presets, get_preset, preset_names, raw_row
from thzscatter.reconstruct import low_cell_order, three_db_widths
from thzscatter.sphgeom import (
    Direction,
    HemiGrid,
    SpecularFrame,
    deviation_angle,
    deviation_angles,
    main_lobe_mask,
    wrap_azimuth,
)
from thzscatter.surfacegen import SHAPES, SurfaceSpec, generate_surface, make_surface, surface_stats

# Independent transcription of the source tables, row by row:
# DS (alpha_V, S_V, alpha_H, S_H), widths (V, H), TLS (mu, sigma, nu), GEV (k, sigma, mu),
# EV (Feko mu, sigma, model mu, sigma, error mu, sigma).
EXPECTED = {
    "angle15": "71.41 0.036 115.01 0.029 25 75 -10.41 12.07 1.48 -0.26 2.61 4.63 38.21 7.29 38.55 5.85 0.34 1.44",
    "angle30": "75.89 0.032 86.87 0.026 24 44 -7.73 9.07 1.29 -0.23 2.64 4.57 38.11 6.11 38.13 4.92 0.02 1.19",
    "angle45": "57.18 0.037 103.75 0.028 26 28 -12.89 8.95 1.96 -0.31 2.37 4.52 42.22 3.97 43.72 3.48 1.50 0.49",
    "angle60": "40.94 0.036 270.56 0.021 32 14 -16.44 9.99 1.89 -0.23 3.17 5.65 37.03 5.96 39.46 3.39 2.43 2.57",
    "angle75": "55.16 0.047 377.69 0.012 28 11 -20.08 10.18 2.25 -0.31 2.02 3.37 34.44 7.44 38.85 3.33 4.41 4.11",
    "shape_triangle": "35.11 0.074 314 0.015 34 16 -23.92 17.73 2.52 -0.27 4.89 8.11 39.18 5.92 41.51 3.22 2.33 2.70",
    "shape_square": "57.18 0.037 103.76 0.028 26 28 -12.89 8.95 1.96 -0.31 2.37 4.52 42.22 3.97 43.72 3.48 1.50 0.49",
    "shape_hexagon": "128.02 0.025 143.34 0.033 18 24 -16.81 15.38 2.16 -0.34 2.61 5.48 40.01 5.11 40.48 3.61 0.47 1.50",
    "shape_circle": "40.51 0.056 210.32 0.027 32 20 -20.81 11.56 1.85 -0.26 2.82 5.51 37.97 6.56 40.31 3.37 2.34 3.19",
}

ANGLES = ("angle15", "angle30", "angle45", "angle60", "angle75")


def test_criterion_1_table_fidelity(verdict):
    dump = dump_presets()
    mismatches = []
    for name, row in EXPECTED.items():
        got = list(raw_row(name).values())
        if got != row.split():
            mismatches.append(name)
        line = name + " " + " ".join(f"{k}={v}" for k, v in zip(raw_row(name), row.split()))
        if line not in dump:
            mismatches.append(f"{name} (dump)")
    p = get_preset("angle45")
    example = (p.ds.alpha_v, p.ds.s_v, p.ds.alpha_h, p.ds.s_h, p.gev.k_g, p.gev.sigma_g, p.gev.mu_g)
    ok = not mismatches and set(preset_names()) == set(EXPECTED) and example == (
        57.18, 0.037, 103.75, 0.028, -0.31, 2.37, 4.52)
    cells = sum(len(r.split()) for r in EXPECTED.values())
    verdict(1, ok, f"{cells} cells compared as strings; mismatches: {mismatches or 'none'}")
    assert ok


def test_criterion_2_width_consistency(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    parts = []
    for name in ANGLES:
        p = get_preset(name)
        w = three_db_widths(p.ds, SpecularFrame(p.theta_i))
        ev = abs(w.v_main / p.widths.v_main - 1)
        eh = abs(w.h_main / p.widths.h_main - 1)
        worst = max(worst, ev, eh)
        parts.append(f"{p.theta_i:g}: {w.v_main:.1f}/{p.widths.v_main:g} {w.h_main:.1f}/{p.widths.h_main:g}")
    dt = time.perf_counter() - t0
    ok = worst <= 0.15 and dt < 1.0
    verdict(2, ok, f"worst relative error {worst:.3f} (limit 0.15); " + "; ".join(parts))
    assert ok


@pytest.mark.slow
@pytest.mark.xfail(
    strict=True,
    reason="with one calibration frozen on the 45 degree case, the tabulated DS and roughness "
    "parameters of the other presets give median EV locations 1.9-7.5 dB too high and EV "
    "scales 1.2-2.7 dB too small; no single constant can meet the tolerances (see notes)",
)
def test_criterion_3_table_vii_model_column(verdict):
    seeds = range(1, 201)
    s45 = make_synth("angle45", calibration_db=0.0)
    cal = fit_calibration(s45, 43.72, seeds)
    lines, ok = [], abs(cal - DEFAULT_CALIBRATION_DB) < 0.01
    lines.append(f"calibration {cal:.4f} dB (frozen {DEFAULT_CALIBRATION_DB})")
    for name in preset_names():
        if name in ("angle45", "shape_square"):
            continue
        p = get_preset(name)
        ens = ev_ensemble(make_synth(name, calibration_db=cal), seeds)
        dmu = ens.median_mu - p.ev_model.mu_ev
        dsig = ens.median_sigma - p.ev_model.sigma_ev
        good = abs(dmu) <= 2.0 and abs(dsig) <= 1.5
        ok &= good
        lines.append(
            f"{name}: mu {ens.median_mu:.2f} vs {p.ev_model.mu_ev:.2f} ({dmu:+.2f}), "
            f"sigma {ens.median_sigma:.2f} vs {p.ev_model.sigma_ev:.2f} ({dsig:+.2f}) {'ok' if good else 'out'}"
        )
    verdict(3, ok, "; ".join(lines))
    assert ok


def test_criterion_4_distributions(verdict):
    tls = TLocScale(-12.89, 8.95, 1.96)
    gev = Gev(-0.31, 2.37, 4.52)
    ev = Ev(43.72, 3.48)
    t0 = time.perf_counter()
    norms = {
        name: integrate.quad(pdf, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13, limit=500)[0]
        for name, pdf in (
            ("tls", lambda x: tls_pdf(x, tls)),
            ("gev", lambda x: gev_pdf(x, gev)),
            ("ev", lambda x: ev_pdf(x, ev)),
        )
    }
    ks = {
        "tls": sum(ks_test(tls_sample(10**4, tls, s), lambda x: tls_cdf(x, tls), 0.01).passed for s in range(100)),
        "gev": sum(ks_test(gev_sample(10**4, gev, s), lambda x: gev_cdf(x, gev), 0.01).passed for s in range(100)),
        "ev": sum(ks_test(ev_sample(10**4, ev, s), lambda x: ev_cdf(x, ev), 0.01).passed for s in range(100)),
    }
    ft = tls_fit(tls_sample(10**5, tls, 1))
    fg = gev_fit(gev_sample(10**5, gev, 2))
    fe = ev_fit(ev_sample(10**5, ev, 3))
    rel = [
        abs(a / b - 1)
        for a, b in [
            (ft.mu_t, tls.mu_t), (ft.sigma_t, tls.sigma_t), (ft.nu_t, tls.nu_t),
            (fg.k_g, gev.k_g), (fg.sigma_g, gev.sigma_g), (fg.mu_g, gev.mu_g),
            (fe.mu_ev, ev.mu_ev), (fe.sigma_ev, ev.sigma_ev),
        ]
    ]
    dt = time.perf_counter() - t0
    norm_err = max(abs(v - 1) for v in norms.values())
    ok = norm_err < 1e-8 and min(ks.values()) >= 95 and max(rel) <= 0.05 and dt < 60
    verdict(4, ok, f"max |integral-1| {norm_err:.1e}; KS passes/100 {ks}; max MLE rel err {max(rel):.4f}; {dt:.1f} s")
    assert ok


@pytest.mark.slow
def test_criterion_5_round_trip(verdict, synth45_derived, geo45):
    synth = synth45_derived
    p = get_preset("angle45")
    t0 = time.perf_counter()
    ds, tls, gev = [], [], []
    worst_db = 0.0
    for seed in range(1, 51):
        pm = synth.placement(seed)
        f = synth.field(seed, placement=pm)
        r = extract_residuals(f, synth.baseline, pm.cells)
        total = 10 ** (synth.baseline.values[pm.cells] / 10) / ETA + pm.values
        live = total > 0
        worst_db = max(worst_db, float(np.max(10 * np.log10(1 + np.abs(r[live] - pm.values[live]) / total[live]))))
        rep = full_fit(f, geo45)
        ds.append([rep.ds.alpha_v, rep.ds.s_v, rep.ds.alpha_h, rep.ds.s_h])
        tls.append([rep.tls.mu_t, rep.tls.sigma_t, rep.tls.nu_t])
        if rep.gev is not None:
            gev.append([rep.gev.k_g, rep.gev.sigma_g, rep.gev.mu_g])
    dt = time.perf_counter() - t0
    ds_m, tls_m, gev_m = np.mean(ds, axis=0), np.mean(tls, axis=0), np.mean(gev, axis=0)
    ds_err = np.abs(ds_m / np.array([p.ds.alpha_v, p.ds.s_v, p.ds.alpha_h, p.ds.s_h]) - 1).max()
    tls_err = np.abs(tls_m / np.array([p.tls.mu_t, p.tls.sigma_t, p.tls.nu_t]) - 1).max()
    gev_err = np.abs(gev_m / np.array([p.gev.k_g, p.gev.sigma_g, p.gev.mu_g]) - 1).max()
    ok = ds_err <= 0.02 and tls_err <= 0.10 and gev_err <= 0.15 and worst_db <= 1e-9 and dt < 120
    verdict(
        5,
        ok,
        f"DS {ds_err:.4f} (0.02), TLS {tls_err:.3f} (0.10) mean {np.round(tls_m, 2).tolist()}, "
        f"GEV {gev_err:.3f} (0.15) mean {np.round(gev_m, 2).tolist()} over {len(gev)} seeds with a GEV fit, "
        f"residual inversion {worst_db:.1e} dB; {dt:.0f} s",
    )
    assert ok


def _brute_force_mask(grid, frame, v, h):
    out = []
    for i, (t, ph) in enumerate(zip(grid.theta, grid.phi)):
        d = math.remainder(ph - frame.phi_r, 360.0)
        if abs(t - frame.theta_r) < v / 2 and abs(d) < h / 2:
            out.append(i)
    return np.array(out)


def test_criterion_6_structural_invariants(verdict, grid1, synth45):
    t0 = time.perf_counter()
    checks = {}
    frame = synth45.frame
    mask = main_lobe_mask(grid1, frame, 26.0, 28.0)
    checks["mask"] = mask.size == 675 and np.array_equal(mask, _brute_force_mask(grid1, frame, 26.0, 28.0))
    for name in ("angle15", "angle75", "shape_hexagon"):
        s = make_synth(name)
        brute = _brute_force_mask(s.grid, s.frame, s.widths.v_main, s.widths.h_main)
        checks["mask"] &= np.array_equal(s.mask, brute)

    in_mask, determinism, low_order, support = True, True, True, True
    mask_set = set(synth45.mask.tolist())
    order = low_cell_order(synth45.mask, grid1, frame)
    rank = {c: k for k, c in enumerate(order)}
    ub = synth45.law.gev.support[1]
    for seed in range(1, 101):
        pm = synth45.placement(seed)
        f = synth45.field(seed, placement=pm)
        changed = np.flatnonzero(f.values != synth45.baseline.values)
        in_mask &= set(changed.tolist()) <= mask_set and set(pm.cells.tolist()) == mask_set
        if seed <= 10:
            again = synth45.placement(seed)
            determinism &= np.array_equal(pm.cells, again.cells) and np.array_equal(pm.values, again.values)
        low = ~pm.is_high
        ranks = np.array([rank[c] for c in pm.cells[low]])
        mags = np.abs(pm.values[low])[np.argsort(ranks)]
        low_order &= bool(np.all(np.diff(mags) <= 0))
        psi_hi = deviation_angles(grid1.theta[pm.cells[pm.is_high]], grid1.phi[pm.cells[pm.is_high]], frame)
        # a strong component sits within half a cell of its draw, or at the nearest free cell
        support &= bool(np.all(psi_hi <= ub + 2.0))
    support &= bool(np.all(gev_sample(10**6, synth45.law.gev, 0) <= ub))
    checks.update(perturbed_in_mask=in_mask, determinism=determinism, place_low_order=low_order, gev_support=support)

    # energy balance at 0.25 deg: closed form for single-exponent lobes, and the
    # quadrature of every preset lobe against a finer-grid integral of the same density
    g, fine = HemiGrid(0.25), HemiGrid(0.125)
    worst_iso = worst_quad = 0.0
    for name in preset_names():
        p = get_preset(name)
        fr, geo = SpecularFrame(p.theta_i), GeometryConfig(p.theta_i)
        iso = DsParams(p.ds.s_v, p.ds.s_v, p.ds.alpha_v, p.ds.alpha_v)
        closed = p.ds.s_v**2 * geo.area_m2 * np.cos(np.radians(p.theta_i)) / ETA
        worst_iso = max(worst_iso, abs(np.sum(pd_ds_grid(g, iso, geo, fr) * g.solid_angles()) / closed - 1))
        coarse = np.sum(pd_ds_grid(g, p.ds, geo, fr) * g.solid_angles())
        ref = np.sum(pd_ds_grid(fine, p.ds, geo, fr) * fine.solid_angles())
        worst_quad = max(worst_quad, abs(coarse / ref - 1))
    checks["energy_balance"] = worst_iso <= 0.01 and worst_quad <= 0.01

    rng = np.random.default_rng(6)
    dev_ok = abs(deviation_angle(frame.specular, frame)) < 1e-9
    for _ in range(2000):
        ti = rng.uniform(0, 89)
        fr = SpecularFrame(ti, rng.uniform(0, 360))
        d = Direction(rng.uniform(0, 90), rng.uniform(0, 360))
        psi = deviation_angle(d, fr)
        mirror = Direction(d.theta_s, fr.phi_r - float(wrap_azimuth(d.phi_s - fr.phi_r)))
        dev_ok &= 0.0 <= psi <= 180.0 and abs(psi - deviation_angle(mirror, fr)) < 1e-9
    checks["deviation_identities"] = dev_ok
    dt = time.perf_counter() - t0
    ok = all(checks.values()) and dt < 60
    failed = [k for k, v in checks.items() if not v]
    verdict(
        6,
        ok,
        f"{len(checks)} checks, failed: {failed or 'none'}; energy closed-form {worst_iso:.1e}, "
        f"quadrature {worst_quad:.1e}; {dt:.1f} s",
    )
    assert ok


def test_criterion_7_surface_statistics(verdict):
    t0 = time.perf_counter()
    rms, acf = [], []
    for seed in range(1, 21):
        spec = SurfaceSpec(delta=0.5, corr_len=8.0, extent=50.0, sample_step=0.25, seed=seed)
        st = surface_stats(generate_surface(spec), 8.0)
        rms.append(st["rms_mm"])
        acf.append(st["acf_at_l"])
    areas = {s: make_surface(SurfaceSpec(shape=s, seed=1)).retained_area for s in SHAPES}
    dt = time.perf_counter() - t0
    rms_err = abs(np.mean(rms) / 0.5 - 1)
    acf_err = abs(np.mean(acf) / np.exp(-1) - 1)
    area_err = max(abs(a / 2500 - 1) for a in areas.values())
    ok = rms_err <= 0.10 and acf_err <= 0.20 and area_err <= 0.005 and dt < 30
    verdict(
        7,
        ok,
        f"RMS {np.mean(rms):.4f} mm ({rms_err:.3f}), ACF(l)/e^-1 {np.mean(acf) / np.exp(-1):.3f}, "
        f"worst area error {area_err:.4f} {dict((k, round(v, 2)) for k, v in areas.items())}; {dt:.1f} s",
    )
    assert ok
