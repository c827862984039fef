"""Command-line entry point: ``thzscatter {synthesize,fit,eval,surface,presets,calibrate}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .dsmodel import DEFAULT_CALIBRATION_DB
from .errors import ThzScatterError
from .fitpipeline import FitReport, fit_calibration
from .presets import dump_presets, get_preset, raw_row
from .reconstruct import MainLobeSpec
from .runners import (
    default_workers,
    run_eval,
    run_fit,
    run_surface,
    run_synthesize,
    scenario_from_report,
    synthesizer_for,
)
from .scenario import load_scenario, parse_scenario, parse_seeds
from .sphgeom import SpecularFrame
from .surfacegen import SurfaceSpec


def _overrides(args) -> dict:
    o = {}
    if getattr(args, "seeds", None):
        o["seeds"] = args.seeds
    if getattr(args, "resolution", None) is not None:
        o["resolution"] = str(args.resolution)
    if getattr(args, "calibration_db", None) is not None:
        o["calibration_db"] = str(args.calibration_db)
    return o


def _scenario(args):
    sources = [x for x in (args.preset, args.config, getattr(args, "report", None)) if x]
    if len(sources) != 1:
        raise ValueError("give exactly one of --preset, --config, --report")
    if args.preset:
        return parse_scenario(f"preset = {args.preset}\n", _overrides(args))
    if args.config:
        return load_scenario(args.config, _overrides(args))
    report = FitReport.from_text(Path(args.report).read_text())
    sc = scenario_from_report(report, parse_seeds(args.seeds or "1"), args.resolution or 1.0)
    if args.calibration_db is not None:
        sc.calibration_db = args.calibration_db
    return sc


def cmd_synthesize(args):
    sc = _scenario(args)
    res = run_synthesize(sc, args.out, workers=args.workers, write_fields=not args.no_fields)
    print(f"seeds={res['n_seeds']} mu_ev={res['median_mu_ev']:.4f} sigma_ev={res['median_sigma_ev']:.4f}")


def cmd_fit(args):
    frame = SpecularFrame(args.theta_i, args.phi_r)
    cal = DEFAULT_CALIBRATION_DB if args.calibration_db is None else args.calibration_db
    report = run_fit(args.field, frame, args.out, cal, model_seed=args.model_seed)
    sys.stdout.write(report.to_text())


def cmd_eval(args):
    frame = SpecularFrame(args.theta_i, args.phi_r) if args.theta_i is not None else None
    widths = None
    if args.v_main is not None or args.h_main is not None:
        if args.v_main is None or args.h_main is None:
            raise ValueError("--v-main and --h-main must be given together")
        widths = MainLobeSpec(args.v_main, args.h_main)
    cal = DEFAULT_CALIBRATION_DB if args.calibration_db is None else args.calibration_db
    ev_a, ev_b, err = run_eval(args.a, args.b, args.out, frame, cal, widths)
    print(f"mu_ev: {ev_a.mu_ev:.2f} vs {ev_b.mu_ev:.2f}  error {err[0]:.2f} dB")
    print(f"sigma_ev: {ev_a.sigma_ev:.2f} vs {ev_b.sigma_ev:.2f}  error {err[1]:.2f} dB")


def cmd_surface(args):
    spec = SurfaceSpec(
        delta=args.delta,
        corr_len=args.corr_len,
        extent=args.extent,
        sample_step=args.step,
        shape=args.shape,
        target_area=args.area,
        seed=args.seed,
    )
    stats = run_surface(spec, args.out)
    print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in stats.items()))


def cmd_presets(args):
    if args.name:
        get_preset(args.name)
        print(" ".join(f"{k}={v}" for k, v in raw_row(args.name).items()))
    else:
        sys.stdout.write(dump_presets())


def cmd_calibrate(args):
    sc = parse_scenario(f"preset = {args.preset}\nseeds = {args.seeds}\ncalibration_db = 0\n")
    c = fit_calibration(synthesizer_for(sc), args.target, sc.seeds)
    print(f"calibration_db={c:.6f}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thzscatter", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthesize", help="synthesize model fields for a scenario and seeds")
    s.add_argument("--preset")
    s.add_argument("--config")
    s.add_argument("--report", help="FitReport file from `fit`")
    s.add_argument("--seeds", help="e.g. 1..200 or 1,5,9")
    s.add_argument("--resolution", type=float)
    s.add_argument("--calibration-db", type=float)
    s.add_argument("--workers", type=int, default=1, help=f"worker processes (this machine: {default_workers()} suggested)")
    s.add_argument("--no-fields", action="store_true", help="skip per-seed field CSVs")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synthesize)

    f = sub.add_parser("fit", help="fit model parameters to a field CSV")
    f.add_argument("field")
    f.add_argument("--theta-i", type=float, required=True)
    f.add_argument("--phi-r", type=float, default=0.0)
    f.add_argument("--calibration-db", type=float)
    f.add_argument("--model-seed", type=int, help="also synthesize and compare one model field")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="EV error table between two fields or two EV files")
    e.add_argument("a")
    e.add_argument("b")
    e.add_argument("--theta-i", type=float)
    e.add_argument("--phi-r", type=float, default=0.0)
    e.add_argument("--v-main", type=float)
    e.add_argument("--h-main", type=float)
    e.add_argument("--calibration-db", type=float)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("surface", help="generate a rough surface mesh and height map")
    g.add_argument("--shape", default="square", choices=["square", "circle", "triangle", "hexagon"])
    g.add_argument("--delta", type=float, default=0.5)
    g.add_argument("--corr-len", type=float, default=8.0)
    g.add_argument("--extent", type=float)
    g.add_argument("--step", type=float, default=0.25)
    g.add_argument("--area", type=float, default=2500.0)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_surface)

    r = sub.add_parser("presets", help="print the preset tables")
    r.add_argument("--name")
    r.set_defaults(func=cmd_presets)

    c = sub.add_parser("calibrate", help="fit the dB calibration constant on a preset")
    c.add_argument("--preset", default="angle45")
    c.add_argument("--target", type=float, default=43.72, help="median mu_EV to reproduce, dBmV")
    c.add_argument("--seeds", default="1..200")
    c.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ThzScatterError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
