"""Tabulated parameters for the five incidence angles and four surface shapes.

Cells are stored as the literal strings of the source tables so a dump can
be compared character for character; numeric views are derived from them.
The 45 degree angle case and the square shape case describe the same
surface and share one row (see :func:`check_catalog`).
"""

from __future__ import annotations

from dataclasses import dataclass

from .dists import Ev, Gev, TLocScale
from .dsmodel import DsParams
from .reconstruct import MainLobeSpec

ANGLES = ("15", "30", "45", "60", "75")
SHAPES = ("triangle", "square", "hexagon", "circle")

# columns: alpha_v, s_v, alpha_h, s_h
DS_ANGLE = {
    "15": ("71.41", "0.036", "115.01", "0.029"),
    "30": ("75.89", "0.032", "86.87", "0.026"),
    "45": ("57.18", "0.037", "103.75", "0.028"),
    "60": ("40.94", "0.036", "270.56", "0.021"),
    "75": ("55.16", "0.047", "377.69", "0.012"),
}

# columns: v_main, h_main, mu_t, sigma_t, nu_t, k_g, sigma_g, mu_g
MODEL_ANGLE = {
    "15": ("25", "75", "-10.41", "12.07", "1.48", "-0.26", "2.61", "4.63"),
    "30": ("24", "44", "-7.73", "9.07", "1.29", "-0.23", "2.64", "4.57"),
    "45": ("26", "28", "-12.89", "8.95", "1.96", "-0.31", "2.37", "4.52"),
    "60": ("32", "14", "-16.44", "9.99", "1.89", "-0.23", "3.17", "5.65"),
    "75": ("28", "11", "-20.08", "10.18", "2.25", "-0.31", "2.02", "3.37"),
}

DS_SHAPE = {
    "triangle": ("35.11", "0.074", "314", "0.015"),
    "square": ("57.18", "0.037", "103.76", "0.028"),
    "hexagon": ("128.02", "0.025", "143.34", "0.033"),
    "circle": ("40.51", "0.056", "210.32", "0.027"),
}

MODEL_SHAPE = {
    "triangle": ("34", "16", "-23.92", "17.73", "2.52", "-0.27", "4.89", "8.11"),
    "square": ("26", "28", "-12.89", "8.95", "1.96", "-0.31", "2.37", "4.52"),
    "hexagon": ("18", "24", "-16.81", "15.38", "2.16", "-0.34", "2.61", "5.48"),
    "circle": ("32", "20", "-20.81", "11.56", "1.85", "-0.26", "2.82", "5.51"),
}

# main-lobe EV fits of the 45 degree case: mu_feko, sigma_feko, mu_model, sigma_model
EV_45 = ("42.22", "3.97", "43.72", "3.48")

# columns: mu_feko, sigma_feko, mu_model, sigma_model, err_mu, err_sigma
EV_ANGLE = {
    "15": ("38.21", "7.29", "38.55", "5.85", "0.34", "1.44"),
    "30": ("38.11", "6.11", "38.13", "4.92", "0.02", "1.19"),
    "45": ("42.22", "3.97", "43.72", "3.48", "1.50", "0.49"),
    "60": ("37.03", "5.96", "39.46", "3.39", "2.43", "2.57"),
    "75": ("34.44", "7.44", "38.85", "3.33", "4.41", "4.11"),
}
EV_SHAPE = {
    "triangle": ("39.18", "5.92", "41.51", "3.22", "2.33", "2.70"),
    "square": ("42.22", "3.97", "43.72", "3.48", "1.50", "0.49"),
    "hexagon": ("40.01", "5.11", "40.48", "3.61", "0.47", "1.50"),
    "circle": ("37.97", "6.56", "40.31", "3.37", "2.34", "3.19"),
}

DS_COLUMNS = ("alpha_v", "s_v", "alpha_h", "s_h")
MODEL_COLUMNS = ("v_main", "h_main", "mu_t", "sigma_t", "nu_t", "k_g", "sigma_g", "mu_g")
EV_COLUMNS = ("mu_ev_feko", "sigma_ev_feko", "mu_ev_model", "sigma_ev_model", "err_mu_ev", "err_sigma_ev")

SHAPE_INCIDENCE = 45.0


@dataclass(frozen=True)
class Preset:
    name: str
    theta_i: float
    ds: DsParams
    widths: MainLobeSpec
    tls: TLocScale
    gev: Gev
    ev_feko: Ev
    ev_model: Ev
    shape: str = "square"


def _build(name, theta_i, ds_row, model_row, ev_row, shape):
    a_v, s_v, a_h, s_h = map(float, ds_row)
    v, h, mt, st, nt, kg, sg, mg = map(float, model_row)
    ev = tuple(map(float, ev_row))
    return Preset(
        name=name,
        theta_i=theta_i,
        ds=DsParams(s_v, s_h, a_v, a_h),
        widths=MainLobeSpec(v, h),
        tls=TLocScale(mt, st, nt),
        gev=Gev(kg, sg, mg),
        ev_feko=Ev(ev[0], ev[1]),
        ev_model=Ev(ev[2], ev[3]),
        shape=shape,
    )


def _catalog():
    out = {}
    for a in ANGLES:
        out[f"angle{a}"] = _build(f"angle{a}", float(a), DS_ANGLE[a], MODEL_ANGLE[a], EV_ANGLE[a], "square")
    for s in SHAPES:
        out[f"shape_{s}"] = _build(f"shape_{s}", SHAPE_INCIDENCE, DS_SHAPE[s], MODEL_SHAPE[s], EV_SHAPE[s], s)
    return out


CATALOG = _catalog()
ALIASES = {s: f"shape_{s}" for s in SHAPES}


def preset_names():
    return list(CATALOG)


def get_preset(name: str) -> Preset:
    key = name.strip().lower()
    key = ALIASES.get(key, key)
    if key not in CATALOG:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(preset_names())}")
    return CATALOG[key]


def raw_row(name: str) -> dict:
    """Literal table cells of a preset, keyed by column name."""
    key = get_preset(name).name
    if key.startswith("angle"):
        k = key[5:]
        cells = DS_ANGLE[k] + MODEL_ANGLE[k] + EV_ANGLE[k]
    else:
        k = key[6:]
        cells = DS_SHAPE[k] + MODEL_SHAPE[k] + EV_SHAPE[k]
    return dict(zip(DS_COLUMNS + MODEL_COLUMNS + EV_COLUMNS, cells))


def dump_presets() -> str:
    """Every preset as ``name column=value ...`` lines with the literal table strings."""
    lines = []
    for name in preset_names():
        row = raw_row(name)
        lines.append(name + " " + " ".join(f"{k}={v}" for k, v in row.items()))
    lines.append("ev45 " + " ".join(f"{k}={v}" for k, v in zip(EV_COLUMNS[:4], EV_45)))
    return "\n".join(lines) + "\n"


def check_catalog():
    """Cells where the 45 degree and square rows differ (only the H-plane alpha)."""
    a, s = raw_row("angle45"), raw_row("shape_square")
    return {k: (a[k], s[k]) for k in a if a[k] != s[k]}
