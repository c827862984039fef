"""Gaussian-correlated rough surfaces, shape masks and mesh export.

Heights are synthesized spectrally on a cell-centred square lattice: white
noise is filtered by the square root of the power spectrum of the Gaussian
autocorrelation ``delta**2 * exp(-r**2 / l**2)`` on a zero-padded periodic
lattice and then cropped, so the cropped field carries no wrap-around
correlation.

Mesh format: ASCII STL (``solid`` / ``facet normal`` / ``outer loop`` /
``vertex`` records), two triangles per lattice cell whose four corners are
all retained, coordinates in mm written with 17 significant digits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SHAPES = ("square", "circle", "triangle", "hexagon")


def shape_size(shape: str, area: float = 2500.0) -> float:
    """Characteristic size (mm) of a shape with the given area.

    Square: side.  Circle: radius.  Triangle and hexagon: side length.
    """
    if shape == "square":
        return float(np.sqrt(area))
    if shape == "circle":
        return float(np.sqrt(area / np.pi))
    if shape == "triangle":
        return float(np.sqrt(4.0 * area / np.sqrt(3.0)))
    if shape == "hexagon":
        return float(np.sqrt(2.0 * area / (3.0 * np.sqrt(3.0))))
    raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")


def _bounding_extent(shape: str, area: float) -> float:
    a = shape_size(shape, area)
    return {"square": a, "circle": 2 * a, "triangle": 2 * a / np.sqrt(3.0), "hexagon": 2 * a}[shape]


@dataclass(frozen=True)
class SurfaceSpec:
    delta: float = 0.5
    corr_len: float = 8.0
    extent: float | None = None
    sample_step: float = 0.25
    shape: str = "square"
    target_area: float = 2500.0
    seed: int | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if not self.corr_len > 0:
            raise ValueError(f"corr_len must be > 0, got {self.corr_len}")
        if not 0 < self.sample_step <= self.corr_len / 4:
            raise ValueError(
                f"sample_step {self.sample_step} must lie in (0, corr_len/4 = {self.corr_len / 4}]"
            )
        if not self.target_area > 0:
            raise ValueError("target_area must be positive")
        if self.extent is None:
            object.__setattr__(self, "extent", _bounding_extent(self.shape, self.target_area))
        if not self.extent > 0:
            raise ValueError("extent must be positive")

    @property
    def n(self) -> int:
        """Lattice points per side."""
        return int(np.ceil(self.extent / self.sample_step - 1e-9))


@dataclass
class Surface:
    """Height map on a cell-centred lattice; ``keep`` marks retained points."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    keep: np.ndarray
    step: float
    meta: dict = field(default_factory=dict)

    @property
    def retained_area(self) -> float:
        return float(self.keep.sum() * self.step**2)


def lattice(spec: SurfaceSpec):
    """Cell-centre coordinates (mm) of an ``n x n`` lattice centred on the origin."""
    n = spec.n
    c = (np.arange(n) + 0.5) * spec.sample_step - n * spec.sample_step / 2.0
    return np.meshgrid(c, c, indexing="xy")


def gaussian_heights(n: int, step: float, delta: float, corr_len: float, rng) -> np.ndarray:
    """``n x n`` zero-mean Gaussian field with autocorrelation ``delta^2 exp(-r^2/l^2)``."""
    if delta == 0:
        return np.zeros((n, n))
    pad = int(np.ceil(3.0 * corr_len / step))
    m = n + pad
    lag = np.minimum(np.arange(m), m - np.arange(m)) * step
    r2 = lag[:, None] ** 2 + lag[None, :] ** 2
    acf = delta**2 * np.exp(-r2 / corr_len**2)
    spec = np.clip(np.fft.fft2(acf).real, 0.0, None)
    noise = np.fft.fft2(rng.standard_normal((m, m)))
    z = np.fft.ifft2(noise * np.sqrt(spec)).real
    return z[:n, :n]


def generate_surface(spec: SurfaceSpec) -> Surface:
    """Height map over the full lattice (nothing masked)."""
    rng = np.random.default_rng(spec.seed)
    x, y = lattice(spec)
    z = gaussian_heights(spec.n, spec.sample_step, spec.delta, spec.corr_len, rng)
    return Surface(x, y, z, np.ones(z.shape, bool), spec.sample_step, {"seed": spec.seed, "shape": "none"})


def _regular_polygon(n_sides: int, side: float, rotation: float):
    r = side / (2.0 * np.sin(np.pi / n_sides))
    ang = rotation + 2.0 * np.pi * np.arange(n_sides) / n_sides
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def shape_vertices(shape: str, area: float = 2500.0):
    """Polygon vertices (counter-clockwise, centroid at the origin); ``None`` for the circle."""
    a = shape_size(shape, area)
    if shape == "square":
        h = a / 2
        return np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
    if shape == "triangle":
        return _regular_polygon(3, a, np.pi / 2)
    if shape == "hexagon":
        return _regular_polygon(6, a, 0.0)
    if shape == "circle":
        return None
    raise ValueError(f"unknown shape {shape!r}")


def shape_contains(shape: str, x, y, area: float = 2500.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if shape == "circle":
        return x**2 + y**2 <= shape_size(shape, area) ** 2
    v = shape_vertices(shape, area)
    inside = np.ones(x.shape, bool)
    for p, q in zip(v, np.roll(v, -1, axis=0)):
        # left of each counter-clockwise edge
        inside &= (q[0] - p[0]) * (y - p[1]) - (q[1] - p[1]) * (x - p[0]) >= -1e-12
    return inside


def apply_shape_mask(surface: Surface, spec: SurfaceSpec) -> Surface:
    """Drop lattice points outside the shape, sized to ``spec.target_area``."""
    half = spec.n * spec.sample_step / 2.0
    if spec.shape == "circle":
        reach = np.array([shape_size("circle", spec.target_area)] * 2)
    else:
        reach = np.abs(shape_vertices(spec.shape, spec.target_area)).max(axis=0)
    if np.any(reach > half + 1e-9):
        raise ValueError(f"{spec.shape} of area {spec.target_area} mm^2 does not fit in a {2 * half} mm extent")
    keep = surface.keep & shape_contains(spec.shape, surface.x, surface.y, spec.target_area)
    meta = dict(surface.meta, shape=spec.shape)
    return Surface(surface.x, surface.y, surface.z, keep, surface.step, meta)


def make_surface(spec: SurfaceSpec) -> Surface:
    return apply_shape_mask(generate_surface(spec), spec)


def autocorrelation(z: np.ndarray, step: float, max_lag: float, demean: bool = False):
    """Normalized autocorrelation along both lattice axes, averaged; ``(lags_mm, acf)``.

    Heights are taken about the datum ``z = 0`` unless ``demean``; removing the
    sample mean of a patch only a few correlation lengths wide biases the
    estimate low.
    """
    z = np.asarray(z, dtype=float)
    if demean:
        z = z - z.mean()
    var = np.mean(z * z)
    k_max = int(round(max_lag / step))
    out = np.empty(k_max + 1)
    for k in range(k_max + 1):
        a = np.mean(z[:, : z.shape[1] - k] * z[:, k:])
        b = np.mean(z[: z.shape[0] - k, :] * z[k:, :])
        out[k] = 0.5 * (a + b) / var
    return np.arange(k_max + 1) * step, out


def surface_stats(surface: Surface, corr_len: float) -> dict:
    """Realized statistics; RMS and ACF are about the datum ``z = 0``."""
    z = surface.z[surface.keep]
    lags, acf = autocorrelation(surface.z, surface.step, corr_len)
    return {
        "rms_mm": float(np.sqrt(np.mean(z**2))),
        "mean_mm": float(z.mean()),
        "acf_at_l": float(acf[-1]),
        "retained_points": int(surface.keep.sum()),
        "retained_area_mm2": surface.retained_area,
    }


# -- export -----------------------------------------------------------------


def triangles(surface: Surface) -> np.ndarray:
    """``(n, 3, 3)`` triangle vertices: two per lattice cell with all four corners retained."""
    k = surface.keep
    quad = k[:-1, :-1] & k[1:, :-1] & k[:-1, 1:] & k[1:, 1:]
    i, j = np.nonzero(quad)
    pts = np.stack([surface.x, surface.y, surface.z], axis=-1)
    a, b, c, d = pts[i, j], pts[i, j + 1], pts[i + 1, j + 1], pts[i + 1, j]
    t = np.empty((2 * i.size, 3, 3))
    t[0::2] = np.stack([a, b, c], axis=1)
    t[1::2] = np.stack([a, c, d], axis=1)
    return t


def _normals(t):
    n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def export_mesh(surface: Surface, path, name: str = "rough_surface") -> int:
    """Write an ASCII STL file; returns the facet count."""
    t = triangles(surface)
    if surface.keep.sum() < 3 or t.shape[0] == 0:
        raise ValueError("need at least one full lattice cell (3+ retained points) to mesh")
    nrm = _normals(t)
    f = "{:.17g}"
    with open(path, "w") as fh:
        fh.write(f"solid {name}\n")
        for tri, nv in zip(t, nrm):
            fh.write("  facet normal " + " ".join(f.format(c) for c in nv) + "\n    outer loop\n")
            for v in tri:
                fh.write("      vertex " + " ".join(f.format(c) for c in v) + "\n")
            fh.write("    endloop\n  endfacet\n")
        fh.write(f"endsolid {name}\n")
    return t.shape[0]


def read_mesh(path):
    """Parse an ASCII STL file into ``(normals (n, 3), triangles (n, 3, 3))``."""
    normals, verts = [], []
    with open(path) as fh:
        for line in fh:
            w = line.split()
            if not w:
                continue
            if w[0] == "facet":
                normals.append([float(c) for c in w[2:5]])
            elif w[0] == "vertex":
                verts.append([float(c) for c in w[1:4]])
    v = np.array(verts).reshape(-1, 3, 3)
    return np.array(normals).reshape(-1, 3), v


def unique_vertices(tris: np.ndarray) -> np.ndarray:
    return np.unique(tris.reshape(-1, 3), axis=0)


def export_heightmap(surface: Surface, path):
    """CSV with columns ``x_mm, y_mm, z_mm`` for retained points, row-major."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_mm", "y_mm", "z_mm"])
        for x, y, z in zip(surface.x[surface.keep], surface.y[surface.keep], surface.z[surface.keep]):
            w.writerow([f"{x:.17g}", f"{y:.17g}", f"{z:.17g}"])


def read_heightmap(path):
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]
