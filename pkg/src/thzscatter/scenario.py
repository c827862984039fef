"""Scenario configuration as plain ``key = value`` text.

A scenario names the incidence geometry, DS lobe, roughness law, optional
main-lobe widths, seeds and grid resolution.  ``preset = <name>`` fills
every model key from the preset catalog; explicit keys override it.
Comments start with ``#``.  Example::

    preset = angle45
    seeds = 1..200
    resolution = 1.0
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .dists import Gev, TLocScale
from .dsmodel import DEFAULT_CALIBRATION_DB, DsParams, GeometryConfig
from .errors import ScenarioError
from .presets import get_preset
from .reconstruct import MainLobeSpec, RoughnessLaw
from .sphgeom import SpecularFrame

FLOAT_KEYS = (
    "theta_i", "phi_r", "area_mm2", "e_incident", "d_t", "d_r", "p_t", "g_t",
    "alpha_v", "s_v", "alpha_h", "s_h",
    "mu_t", "sigma_t", "nu_t", "k_g", "sigma_g", "mu_g", "threshold_offset_db",
    "v_main", "h_main", "resolution", "calibration_db",
)
STR_KEYS = ("preset", "name", "mode", "seeds")
KNOWN_KEYS = FLOAT_KEYS + STR_KEYS
REQUIRED = ("theta_i", "alpha_v", "s_v", "alpha_h", "s_h", "mu_t", "sigma_t", "nu_t", "k_g", "sigma_g", "mu_g")
DEFAULTS = {
    "phi_r": 0.0,
    "area_mm2": 2500.0,
    "e_incident": 1.0,
    "mode": "plane-wave",
    "threshold_offset_db": 8.0,
    "resolution": 1.0,
    "seeds": "1",
}


def parse_seeds(text: str) -> list[int]:
    """Seed list from ``"1..200,5,7"`` style text (ranges inclusive)."""
    out: list[int] = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("no seeds given")
    return out


def format_seeds(seeds) -> str:
    seeds = list(seeds)
    if len(seeds) > 1 and seeds == list(range(seeds[0], seeds[-1] + 1)):
        return f"{seeds[0]}..{seeds[-1]}"
    return ",".join(str(s) for s in seeds)


@dataclass
class Scenario:
    frame: SpecularFrame
    geometry: GeometryConfig
    ds: DsParams
    law: RoughnessLaw
    widths_override: MainLobeSpec | None = None
    seeds: list = field(default_factory=lambda: [1])
    resolution: float = 1.0
    calibration_db: float = DEFAULT_CALIBRATION_DB
    name: str = "scenario"
    echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        g = self.geometry
        d = {
            "name": self.name,
            "theta_i": self.frame.theta_i,
            "phi_r": self.frame.phi_r,
            "area_mm2": g.area,
            "e_incident": g.e_incident,
            "mode": g.mode,
        }
        if g.mode == "spherical-wave":
            d.update(d_t=g.d_t, d_r=g.d_r, p_t=g.p_t, g_t=g.g_t)
        d.update(
            alpha_v=self.ds.alpha_v,
            s_v=self.ds.s_v,
            alpha_h=self.ds.alpha_h,
            s_h=self.ds.s_h,
            mu_t=self.law.tls.mu_t,
            sigma_t=self.law.tls.sigma_t,
            nu_t=self.law.tls.nu_t,
            k_g=self.law.gev.k_g,
            sigma_g=self.law.gev.sigma_g,
            mu_g=self.law.gev.mu_g,
            threshold_offset_db=self.law.threshold_offset_db,
        )
        if self.widths_override is not None:
            d.update(v_main=self.widths_override.v_main, h_main=self.widths_override.h_main)
        d.update(seeds=format_seeds(self.seeds), resolution=self.resolution, calibration_db=self.calibration_db)
        return d

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.to_dict().items())

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.to_dict() == other.to_dict()


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def _tokenize(text: str):
    items = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {raw.strip()!r}", line=n)
        k, v = (t.strip() for t in line.split("=", 1))
        if k not in KNOWN_KEYS:
            raise ScenarioError(f"unknown key (known: {', '.join(KNOWN_KEYS)})", line=n, key=k)
        if not v:
            raise ScenarioError("empty value", line=n, key=k)
        items.append((n, k, v))
    return items


def _preset_values(name: str, line=None) -> dict:
    try:
        p = get_preset(name)
    except KeyError as exc:
        raise ScenarioError(str(exc.args[0]), line=line, key="preset") from None
    return {
        "name": p.name,
        "theta_i": p.theta_i,
        "alpha_v": p.ds.alpha_v,
        "s_v": p.ds.s_v,
        "alpha_h": p.ds.alpha_h,
        "s_h": p.ds.s_h,
        "mu_t": p.tls.mu_t,
        "sigma_t": p.tls.sigma_t,
        "nu_t": p.tls.nu_t,
        "k_g": p.gev.k_g,
        "sigma_g": p.gev.sigma_g,
        "mu_g": p.gev.mu_g,
        "v_main": p.widths.v_main,
        "h_main": p.widths.h_main,
    }


def parse_scenario(text: str, overrides: dict | None = None) -> Scenario:
    """Build a scenario from config text; ``overrides`` (key -> value) win over the text."""
    items = _tokenize(text)
    lines: dict[str, int] = {}
    values: dict = {}
    for n, k, v in items:
        if k in lines:
            raise ScenarioError(f"duplicate key (first on line {lines[k]})", line=n, key=k)
        lines[k] = n
        values[k] = v
    for k, v in (overrides or {}).items():
        if k not in KNOWN_KEYS:
            raise ScenarioError("unknown key", key=k)
        values[k] = v
    merged: dict = dict(DEFAULTS)
    if "preset" in values:
        merged.update(_preset_values(values["preset"], lines.get("preset")))
    for k, v in values.items():
        if k in FLOAT_KEYS:
            try:
                merged[k] = float(v)
            except (TypeError, ValueError):
                raise ScenarioError(f"not a number: {v!r}", line=lines.get(k), key=k) from None
        else:
            merged[k] = v
    for k in REQUIRED:
        if k not in merged:
            raise ScenarioError("missing required key", key=k)
    if ("v_main" in merged) != ("h_main" in merged):
        raise ScenarioError("v_main and h_main must be given together", key="v_main" if "h_main" in merged else "h_main")

    def build(key, fn):
        try:
            return fn()
        except (TypeError, ValueError) as exc:
            raise ScenarioError(str(exc), line=lines.get(key), key=key) from None

    frame = build("theta_i", lambda: SpecularFrame(merged["theta_i"], merged["phi_r"]))
    geometry = build(
        "mode",
        lambda: GeometryConfig(
            theta_i=merged["theta_i"],
            area=merged["area_mm2"],
            e_incident=merged["e_incident"],
            mode=merged["mode"],
            d_t=merged.get("d_t"),
            d_r=merged.get("d_r"),
            p_t=merged.get("p_t"),
            g_t=merged.get("g_t"),
        ),
    )
    ds = build("alpha_v", lambda: DsParams(merged["s_v"], merged["s_h"], merged["alpha_v"], merged["alpha_h"]))
    tls = build("sigma_t", lambda: TLocScale(merged["mu_t"], merged["sigma_t"], merged["nu_t"]))
    gev = build("k_g", lambda: Gev(merged["k_g"], merged["sigma_g"], merged["mu_g"]))
    law = build("threshold_offset_db", lambda: RoughnessLaw(tls, gev, merged["threshold_offset_db"]))
    widths = None
    if "v_main" in merged:
        widths = build("v_main", lambda: MainLobeSpec(merged["v_main"], merged["h_main"]))
    seeds = build("seeds", lambda: parse_seeds(merged["seeds"]))
    res = merged["resolution"]
    if widths is not None:
        build("resolution", lambda: widths.check_resolution(res))
    sc = Scenario(
        frame=frame,
        geometry=geometry,
        ds=ds,
        law=law,
        widths_override=widths,
        seeds=seeds,
        resolution=res,
        calibration_db=merged.get("calibration_db", DEFAULT_CALIBRATION_DB),
        name=str(merged.get("name", merged.get("preset", "scenario"))),
    )
    sc.echo = sc.to_dict()
    return sc


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    return parse_scenario(Path(path).read_text(), overrides)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(sc.to_text())


def preset_scenario(name: str, **overrides) -> Scenario:
    return parse_scenario(f"preset = {name}\n", {k: str(v) for k, v in overrides.items()})
