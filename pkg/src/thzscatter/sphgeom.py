"""Spherical directions on the upper hemisphere and the specular frame.

Coordinate convention: the incidence plane is the x-z plane and the
specularly reflected ray leaves at azimuth ``phi_r`` (0 by default), so the
forward-scatter half of the incidence plane is ``phi = phi_r``.  All angles
at the public surface are in degrees.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

_ANGLE_TOL = 1e-9


def wrap_azimuth(dphi):
    """Wrap azimuth differences (degrees) into ``(-180, 180]``, without rounding error."""
    # fmod is exact, and so is the single +/-360 correction (Sterbenz)
    w = np.fmod(np.asarray(dphi, dtype=float), 360.0)
    w = np.where(w > 180.0, w - 360.0, w)
    return np.where(w <= -180.0, w + 360.0, w)


@dataclass(frozen=True)
class Direction:
    """A direction on the upper hemisphere, zenith ``theta_s`` and azimuth ``phi_s``."""

    theta_s: float
    phi_s: float = 0.0

    def __post_init__(self):
        theta = float(self.theta_s)
        if not (-_ANGLE_TOL <= theta <= 90.0 + _ANGLE_TOL):
            raise ValueError(f"theta_s must lie in [0, 90] degrees, got {theta}")
        object.__setattr__(self, "theta_s", min(max(theta, 0.0), 90.0))
        object.__setattr__(self, "phi_s", float(np.mod(float(self.phi_s), 360.0)))

    def unitvec(self) -> np.ndarray:
        return dir_to_unitvec(self)


def unitvecs(theta, phi) -> np.ndarray:
    """Unit vectors for arrays of (theta, phi) in degrees, shape ``(..., 3)``."""
    t = np.radians(np.asarray(theta, dtype=float))
    p = np.radians(np.asarray(phi, dtype=float))
    st = np.sin(t)
    return np.stack([st * np.cos(p), st * np.sin(p), np.cos(t)], axis=-1)


def dir_to_unitvec(d: Direction) -> np.ndarray:
    """Cartesian unit vector ``(sin t cos p, sin t sin p, cos t)`` of a direction."""
    return unitvecs(d.theta_s, d.phi_s)


def unitvec_to_dir(v) -> Direction:
    """Inverse of :func:`dir_to_unitvec` for vectors with ``z >= 0``."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    theta = np.degrees(np.arccos(np.clip(v[2], -1.0, 1.0)))
    if np.hypot(v[0], v[1]) < 1e-15:
        return Direction(theta, 0.0)
    return Direction(theta, np.degrees(np.arctan2(v[1], v[0])))


@dataclass(frozen=True)
class SpecularFrame:
    """Incidence geometry: incidence zenith ``theta_i`` and specular azimuth ``phi_r``.

    The specular zenith equals the incidence zenith.
    """

    theta_i: float
    phi_r: float = 0.0

    def __post_init__(self):
        if not (0.0 < float(self.theta_i) < 90.0):
            raise ValueError(f"theta_i must lie in (0, 90) degrees, got {self.theta_i}")
        object.__setattr__(self, "theta_i", float(self.theta_i))
        object.__setattr__(self, "phi_r", float(np.mod(float(self.phi_r), 360.0)))

    @property
    def theta_r(self) -> float:
        return self.theta_i

    @property
    def specular(self) -> Direction:
        return Direction(self.theta_r, self.phi_r)

    @cached_property
    def r_ref(self) -> np.ndarray:
        return unitvecs(self.theta_r, self.phi_r)

    @cached_property
    def e_v(self) -> np.ndarray:
        """Unit tangent at the specular direction pointing to increasing zenith (V-plane)."""
        t, p = np.radians(self.theta_r), np.radians(self.phi_r)
        return np.array([np.cos(t) * np.cos(p), np.cos(t) * np.sin(p), -np.sin(t)])

    @cached_property
    def e_h(self) -> np.ndarray:
        """Unit tangent at the specular direction normal to the incidence plane (H-plane)."""
        p = np.radians(self.phi_r)
        return np.array([-np.sin(p), np.cos(p), 0.0])


class HemiGrid:
    """Regular (theta, phi) sampling of the upper hemisphere.

    Cells are ordered theta-major: ``theta`` in ``0, res, ..., 90`` and, for
    each, ``phi`` in ``0, res, ..., 360 - res``.
    """

    def __init__(self, resolution: float = 1.0):
        resolution = float(resolution)
        n_theta = 90.0 / resolution
        n_phi = 360.0 / resolution
        if resolution <= 0 or abs(n_theta - round(n_theta)) > 1e-9:
            raise ValueError(f"resolution must divide 90 degrees, got {resolution}")
        self.resolution = resolution
        self.n_theta = int(round(n_theta)) + 1
        self.n_phi = int(round(n_phi))
        self.thetas = np.arange(self.n_theta) * resolution
        self.phis = np.arange(self.n_phi) * resolution
        th, ph = np.meshgrid(self.thetas, self.phis, indexing="ij")
        self.theta = th.ravel()
        self.phi = ph.ravel()
        for arr in (self.thetas, self.phis, self.theta, self.phi):
            arr.setflags(write=False)

    def __len__(self):
        return self.theta.size

    def __eq__(self, other):
        return isinstance(other, HemiGrid) and other.resolution == self.resolution

    def __hash__(self):
        return hash(("HemiGrid", self.resolution))

    def __repr__(self):
        return f"HemiGrid(resolution={self.resolution})"

    @property
    def shape(self):
        return (self.n_theta, self.n_phi)

    def index(self, theta: float, phi: float) -> int:
        """Cell index of the grid point at (theta, phi); raises if off-grid."""
        i = theta / self.resolution
        j = np.mod(phi, 360.0) / self.resolution
        ri, rj = int(round(i)), int(round(j)) % self.n_phi
        if abs(i - round(i)) > 1e-6 or abs(j - round(j)) > 1e-6 or not 0 <= ri < self.n_theta:
            raise ValueError(f"({theta}, {phi}) is not a grid point at resolution {self.resolution}")
        return ri * self.n_phi + rj

    def directions(self):
        return [Direction(t, p) for t, p in zip(self.theta, self.phi)]

    @cached_property
    def unitvecs(self) -> np.ndarray:
        return unitvecs(self.theta, self.phi)

    def solid_angles(self) -> np.ndarray:
        """Solid angle of each cell (steradians); the cells tile the hemisphere exactly."""
        h = np.radians(self.resolution)
        t = np.radians(self.thetas)
        lo = np.clip(t - h / 2, 0.0, np.pi / 2)
        hi = np.clip(t + h / 2, 0.0, np.pi / 2)
        band = np.cos(lo) - np.cos(hi)
        return np.repeat(band * h, self.n_phi)


def angle_between(a: Direction, b: Direction) -> float:
    """Angle between two directions in degrees, symmetric in its arguments."""
    c = float(np.dot(dir_to_unitvec(a), dir_to_unitvec(b)))
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def deviation_angle(d: Direction, frame: SpecularFrame) -> float:
    """Angle (degrees) between ``d`` and the specular direction of ``frame``."""
    return angle_between(d, frame.specular)


def deviation_angles(theta, phi, frame: SpecularFrame) -> np.ndarray:
    """Vectorized :func:`deviation_angle` over arrays of zenith/azimuth."""
    c = unitvecs(theta, phi) @ frame.r_ref
    return np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))


def lobe_azimuths(theta, phi, frame: SpecularFrame) -> np.ndarray:
    """Angle (degrees) of each direction around the specular axis, 0 on the V-plane.

    Positive zenith offsets in the incidence plane map to 0, the H-plane to
    +/-90.  The specular direction itself is assigned 0.
    """
    v = unitvecs(theta, phi)
    a = v @ frame.e_v
    b = v @ frame.e_h
    on_axis = (a * a + b * b) < 1e-24
    return np.where(on_axis, 0.0, np.degrees(np.arctan2(b, a)))


def plane_cut(grid: HemiGrid, frame: SpecularFrame, which: Literal["V", "H"]):
    """Ordered ``(offset, Direction)`` pairs along the V or H cut through the specular ray.

    The V cut lies in the incidence plane and is parameterized by the signed
    zenith offset from ``theta_r``; offsets past the pole continue on the
    backward half-plane.  The H cut is the great circle through the
    specular direction and the incidence-plane normal, parameterized by the
    signed arc length from the specular direction.  V points coincide with
    grid cells when the frame angles are grid multiples; H points are in
    general off-grid.
    """
    res = grid.resolution
    which = which.upper()
    out = []
    if which == "V":
        lo = -int(round((90.0 + frame.theta_r) / res))
        hi = int(round((90.0 - frame.theta_r) / res))
        for k in range(lo, hi + 1):
            off = k * res
            t = frame.theta_r + off
            if t >= 0:
                d = Direction(t, frame.phi_r)
            else:
                d = Direction(-t, frame.phi_r + 180.0)
            out.append((off, d))
    elif which == "H":
        n = int(round(90.0 / res))
        for k in range(-n, n + 1):
            off = k * res
            o = np.radians(off)
            v = np.cos(o) * frame.r_ref + np.sin(o) * frame.e_h
            out.append((off, unitvec_to_dir(v)))
    else:
        raise ValueError(f"which must be 'V' or 'H', got {which!r}")
    return out


def main_lobe_mask(grid: HemiGrid, frame: SpecularFrame, v_main: float, h_main: float) -> np.ndarray:
    """Sorted indices of cells with ``|dtheta| < v_main/2`` and ``|dphi| < h_main/2``."""
    if v_main <= 0 or h_main <= 0:
        raise ValueError("main-lobe widths must be positive")
    dtheta = grid.theta - frame.theta_r
    dphi = wrap_azimuth(grid.phi - frame.phi_r)
    inside = (np.abs(dtheta) < v_main / 2.0) & (np.abs(dphi) < h_main / 2.0)
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        raise ValueError(
            f"empty main lobe: widths ({v_main}, {h_main}) are below the grid resolution {grid.resolution}"
        )
    return idx
