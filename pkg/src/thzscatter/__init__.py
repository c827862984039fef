"""Stochastic 3D model of wave scattering on rough surfaces.

A directive-scattering (DS) lobe is perturbed inside its main lobe by
random power-density components whose amplitudes follow a t location-scale
law and whose strong members are placed at GEV-distributed deviation
angles.  The package synthesizes such fields on a hemisphere grid, fits the
model back from a field, and generates rough surfaces for full-wave solvers.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.1.0"

from .dsmodel import DEFAULT_CALIBRATION_DB, DsParams, GeometryConfig, ScatterField, ds_field, f_alpha
from .reconstruct import MainLobeSpec, RoughnessLaw, Synthesizer, reconstruct_field, three_db_widths
from .sphgeom import Direction, HemiGrid, SpecularFrame

__all__ = [
    "__version__",
    "DEFAULT_CALIBRATION_DB",
    "Direction",
    "DsParams",
    "GeometryConfig",
    "HemiGrid",
    "MainLobeSpec",
    "RoughnessLaw",
    "ScatterField",
    "SpecularFrame",
    "Synthesizer",
    "ds_field",
    "f_alpha",
    "reconstruct_field",
    "three_db_widths",
]
