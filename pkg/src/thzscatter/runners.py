"""Batch runners behind the CLI; each writes its outputs plus a ``manifest.json``."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .dists import Ev, ev_fit
from .dsmodel import DEFAULT_CALIBRATION_DB, GeometryConfig
from .fieldio import csv_to_field, field_to_csv
from .fitpipeline import (
    FitReport,
    cut_samples,
    ev_errors,
    evaluate_against,
    fit_ds,
    full_fit,
    main_lobe_values,
    parse_kv,
)
from .reconstruct import MainLobeSpec, RoughnessLaw, Synthesizer, three_db_widths
from .scenario import Scenario
from .sphgeom import HemiGrid, SpecularFrame
from .surfacegen import SurfaceSpec, export_heightmap, export_mesh, make_surface, surface_stats

log = logging.getLogger(__name__)


def write_manifest(out_dir: Path, command: str, config: dict, seeds=None, outputs=()) -> Path:
    m = {
        "command": command,
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config,
        "seeds": list(seeds) if seeds is not None else None,
        "outputs": sorted(str(o) for o in outputs),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")
    return path


def _write_kv(path: Path, rows) -> None:
    path.write_text("".join(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n" for k, v in rows))


def synthesizer_for(sc: Scenario) -> Synthesizer:
    return Synthesizer(
        HemiGrid(sc.resolution), sc.frame, sc.ds, sc.geometry, sc.law, sc.widths_override, sc.calibration_db
    )


def _synth_chunk(args):
    sc, seeds, out_dir, write_fields = args
    synth = synthesizer_for(sc)
    rows, cuts = [], []
    for s in seeds:
        f = synth.field(s)
        if write_fields:
            field_to_csv(f, Path(out_dir) / f"field_seed{s:04d}.csv")
        ev = ev_fit(main_lobe_values(f, synth.mask))
        rows.append((s, ev.mu_ev, ev.sigma_ev))
        cuts.append((s, np.concatenate([cut_samples(f, w)[3] for w in ("V", "H")])))
    return rows, cuts


def run_synthesize(sc: Scenario, out_dir, workers: int = 1, write_fields: bool = True) -> dict:
    """Fields for every seed, per-seed and aggregate EV fits, mean plane cuts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    synth = synthesizer_for(sc)
    seeds = list(sc.seeds)
    workers = max(1, min(int(workers), len(seeds)))
    chunks = [seeds[i::workers] for i in range(workers)]
    jobs = [(sc, c, str(out), write_fields) for c in chunks if c]
    if workers == 1:
        results = [_synth_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_synth_chunk, jobs))
    rows = sorted(r for res in results for r in res[0])
    # reduce in seed order so the result does not depend on the worker split;
    # points at zero-power cells come back NaN and are left out of the mean
    per_seed_cuts = np.array([c for _, c in sorted((c for res in results for c in res[1]), key=lambda t: t[0])])
    with np.errstate(invalid="ignore"):
        cut_mean = np.nansum(per_seed_cuts, axis=0) / np.isfinite(per_seed_cuts).sum(axis=0)

    per_seed = out / "ev_per_seed.csv"
    per_seed.write_text("seed,mu_ev,sigma_ev\n" + "".join(f"{s},{m:.17g},{g:.17g}\n" for s, m, g in rows))
    mu = np.array([r[1] for r in rows])
    sig = np.array([r[2] for r in rows])
    summary = out / "ev_summary.txt"
    _write_kv(
        summary,
        [
            ("ev_kind", "min"),
            ("n_seeds", len(rows)),
            ("n_main", int(synth.mask.size)),
            ("v_main", synth.widths.v_main),
            ("h_main", synth.widths.h_main),
            ("mu_ev", float(np.median(mu))),
            ("sigma_ev", float(np.median(sig))),
            ("mean_mu_ev", float(mu.mean())),
            ("mean_sigma_ev", float(sig.mean())),
        ],
    )
    cuts = out / "cuts.csv"
    lines = ["plane,offset_deg,ds_dbmv,mean_dbmv\n"]
    k = 0
    for w in ("V", "H"):
        off, _, _, base = cut_samples(synth.baseline, w)
        for o, b in zip(off, base):
            lines.append(f"{w},{o:.17g},{b:.17g},{cut_mean[k]:.17g}\n")
            k += 1
    cuts.write_text("".join(lines))
    outputs = [per_seed.name, summary.name, cuts.name]
    if write_fields:
        outputs += [f"field_seed{s:04d}.csv" for s in seeds]
    write_manifest(out, "synthesize", sc.to_dict(), seeds, outputs)
    return {"median_mu_ev": float(np.median(mu)), "median_sigma_ev": float(np.median(sig)), "n_seeds": len(rows)}


def scenario_from_report(
    report: FitReport,
    seeds,
    resolution: float = 1.0,
    phi_r: float = 0.0,
    geometry: GeometryConfig | None = None,
) -> Scenario:
    geometry = GeometryConfig(report.theta_i) if geometry is None else geometry
    if report.gev is None:
        raise ValueError("report has no GEV law (too few strong residuals); cannot synthesize from it")
    sc = Scenario(
        frame=SpecularFrame(report.theta_i, phi_r),
        geometry=geometry,
        ds=report.ds,
        law=RoughnessLaw(report.tls, report.gev),
        widths_override=report.widths,
        seeds=list(seeds),
        resolution=resolution,
        calibration_db=report.calibration_db,
        name="from-report",
    )
    sc.echo = sc.to_dict()
    return sc


def run_fit(
    field_path,
    frame: SpecularFrame,
    out_path,
    calibration_db: float = DEFAULT_CALIBRATION_DB,
    geometry: GeometryConfig | None = None,
    model_seed=None,
) -> FitReport:
    f = csv_to_field(field_path, frame, calibration_db)
    geometry = GeometryConfig(frame.theta_i) if geometry is None else geometry
    report = full_fit(f, geometry, calibration_db, model_seed=model_seed)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_text())
    config = {
        "field": str(field_path),
        "theta_i": frame.theta_i,
        "phi_r": frame.phi_r,
        "calibration_db": calibration_db,
        "area_mm2": geometry.area,
        "model_seed": model_seed,
    }
    write_manifest(out.parent, "fit", config, [model_seed] if model_seed is not None else None, [out.name])
    return report


def read_ev_file(path, kind: str = "min") -> Ev:
    """EV parameters from a ``key=value`` file with ``mu_ev`` and ``sigma_ev``."""
    kv = parse_kv(Path(path).read_text())
    try:
        return Ev(float(kv["mu_ev"]), float(kv["sigma_ev"]), kv.get("ev_kind", kind))
    except KeyError as exc:
        raise ValueError(f"{path}: missing key {exc.args[0]!r}") from None


def _is_field_csv(path) -> bool:
    with open(path) as fh:
        return fh.readline().strip().startswith("theta_deg")


def run_eval(
    path_a,
    path_b,
    out_path,
    frame: SpecularFrame | None = None,
    calibration_db: float = DEFAULT_CALIBRATION_DB,
    widths: MainLobeSpec | None = None,
    geometry: GeometryConfig | None = None,
):
    """Error table between two fields (main-lobe EV fits) or two EV parameter files.

    For fields the main lobe is ``widths`` if given, else the 3 dB widths of a
    DS fit of the first field.
    """
    a_is_field, b_is_field = _is_field_csv(path_a), _is_field_csv(path_b)
    if a_is_field != b_is_field:
        raise ValueError("eval needs two field CSVs or two EV parameter files")
    if a_is_field:
        if frame is None:
            raise ValueError("evaluating fields needs the incidence frame (--theta-i)")
        fa = csv_to_field(path_a, frame, calibration_db)
        fb = csv_to_field(path_b, frame, calibration_db)
        if widths is None:
            geometry = GeometryConfig(frame.theta_i) if geometry is None else geometry
            widths = three_db_widths(fit_ds(fa, geometry, calibration_db), frame)
        mask = widths.mask(fa.grid, frame)
        ev_a, ev_b, err = evaluate_against(fa, fb, mask)
    else:
        ev_a, ev_b = read_ev_file(path_a), read_ev_file(path_b)
        err = ev_errors(ev_a, ev_b)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = [
        ("mu_ev_a", ev_a.mu_ev),
        ("sigma_ev_a", ev_a.sigma_ev),
        ("mu_ev_b", ev_b.mu_ev),
        ("sigma_ev_b", ev_b.sigma_ev),
        ("err_mu_ev", err[0]),
        ("err_sigma_ev", err[1]),
    ]
    _write_kv(out, rows)
    config = {"a": str(path_a), "b": str(path_b)}
    if widths is not None:
        config.update(v_main=widths.v_main, h_main=widths.h_main)
    write_manifest(out.parent, "eval", config, None, [out.name])
    return ev_a, ev_b, err


def run_surface(spec: SurfaceSpec, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    surf = make_surface(spec)
    n_facets = export_mesh(surf, out / "surface.stl")
    export_heightmap(surf, out / "heights.csv")
    stats = surface_stats(surf, spec.corr_len)
    stats["facets"] = n_facets
    _write_kv(out / "stats.txt", list(stats.items()))
    config = {k: getattr(spec, k) for k in ("delta", "corr_len", "extent", "sample_step", "shape", "target_area", "seed")}
    write_manifest(out, "surface", config, [spec.seed], ["surface.stl", "heights.csv", "stats.txt"])
    return stats


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1) // 2)
