"""Distributions of the roughness model: t location-scale, GEV and Gumbel (EV).

Densities follow the closed forms used by the model; CDFs use
``scipy.special`` where a closed form is not elementary.  Every sampler
takes an integer seed or a :class:`numpy.random.Generator` so that a
synthesis can thread one generator through all of its draws.  Fitters are
maximum likelihood and raise :class:`~thzscatter.errors.FitError` carrying
the optimizer trace when they fail.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import optimize, special

from .errors import FitError

MIN_FIT_SAMPLES = 50


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_samples(x, minimum):
    x = np.asarray(x, dtype=float).ravel()
    if x.size < minimum:
        raise FitError(f"need at least {minimum} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise FitError("samples must be finite")
    if np.ptp(x) == 0:
        raise FitError("degenerate sample: all values are equal (zero scale)")
    return x


# -------------------------------------------------------------------------
# t location-scale


@dataclass(frozen=True)
class TLocScale:
    mu_t: float
    sigma_t: float
    nu_t: float

    def __post_init__(self):
        if not self.sigma_t > 0:
            raise ValueError(f"sigma_t must be positive, got {self.sigma_t}")
        if not self.nu_t > 0:
            raise ValueError(f"nu_t must be positive, got {self.nu_t}")


def tls_logpdf(x, p: TLocScale):
    nu = p.nu_t
    z = (np.asarray(x, dtype=float) - p.mu_t) / p.sigma_t
    const = (
        special.gammaln((nu + 1.0) / 2.0)
        - special.gammaln(nu / 2.0)
        - np.log(p.sigma_t * np.sqrt(nu * np.pi))
    )
    return const + (nu + 1.0) / 2.0 * np.log(nu / (nu + z * z))


def tls_pdf(x, p: TLocScale):
    return np.exp(tls_logpdf(x, p))


def tls_cdf(x, p: TLocScale):
    return special.stdtr(p.nu_t, (np.asarray(x, dtype=float) - p.mu_t) / p.sigma_t)


def tls_sample(n: int, p: TLocScale, seed=None) -> np.ndarray:
    """``n`` draws of ``mu_t + sigma_t * T(nu_t)``."""
    return p.mu_t + p.sigma_t * _rng(seed).standard_t(p.nu_t, size=int(n))


# -------------------------------------------------------------------------
# generalized extreme value, support 1 + k (x - mu) / sigma > 0


@dataclass(frozen=True)
class Gev:
    k_g: float
    sigma_g: float
    mu_g: float

    def __post_init__(self):
        if not self.sigma_g > 0:
            raise ValueError(f"sigma_g must be positive, got {self.sigma_g}")
        if self.k_g == 0:
            raise ValueError("k_g must be nonzero")

    @property
    def support(self):
        bound = self.mu_g - self.sigma_g / self.k_g
        return (-np.inf, bound) if self.k_g < 0 else (bound, np.inf)


def _gev_t(x, p: Gev):
    return 1.0 + p.k_g * (np.asarray(x, dtype=float) - p.mu_g) / p.sigma_g


def gev_logpdf(x, p: Gev):
    t = _gev_t(x, p)
    out = np.full(t.shape, -np.inf)
    ok = t > 0
    lt = np.log(t[ok])
    out[ok] = -np.exp(-lt / p.k_g) - np.log(p.sigma_g) - (1.0 + 1.0 / p.k_g) * lt
    return out


def gev_pdf(x, p: Gev):
    return np.exp(gev_logpdf(x, p))


def gev_cdf(x, p: Gev):
    t = _gev_t(x, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(t > 0, np.exp(-np.log(np.where(t > 0, t, 1.0)) / p.k_g), 0.0)
    cdf = np.exp(-inner)
    # outside the support the CDF is 0 below a lower bound and 1 above an upper bound
    return np.where(t > 0, cdf, 1.0 if p.k_g < 0 else 0.0)


def gev_ppf(q, p: Gev):
    q = np.asarray(q, dtype=float)
    return p.mu_g + p.sigma_g / p.k_g * ((-np.log(q)) ** (-p.k_g) - 1.0)


def gev_sample(n: int, p: Gev, seed=None) -> np.ndarray:
    """Inverse-CDF draws; values on or past the support bound are redrawn."""
    rng = _rng(seed)
    out = np.empty(int(n))
    todo = np.arange(out.size)
    while todo.size:
        u = rng.random(todo.size)
        x = gev_ppf(np.where(u > 0, u, 0.5), p)
        good = (u > 0) & (_gev_t(x, p) > 0) & np.isfinite(x)
        out[todo[good]] = x[good]
        todo = todo[~good]
    return out


# -------------------------------------------------------------------------
# extreme value (Gumbel)


@dataclass(frozen=True)
class Ev:
    """Gumbel law; ``kind="min"`` is the minimum-type (left-skewed) variant."""

    mu_ev: float
    sigma_ev: float
    kind: Literal["min", "max"] = "min"

    def __post_init__(self):
        if not self.sigma_ev > 0:
            raise ValueError(f"sigma_ev must be positive, got {self.sigma_ev}")
        if self.kind not in ("min", "max"):
            raise ValueError(f"kind must be 'min' or 'max', got {self.kind!r}")


def _ev_z(x, p: Ev):
    z = (np.asarray(x, dtype=float) - p.mu_ev) / p.sigma_ev
    return z if p.kind == "min" else -z


def ev_logpdf(x, p: Ev):
    z = _ev_z(x, p)
    # exp overflow far in the tail correctly gives -inf
    with np.errstate(over="ignore"):
        return z - np.exp(z) - np.log(p.sigma_ev)


def ev_pdf(x, p: Ev):
    return np.exp(ev_logpdf(x, p))


def ev_cdf(x, p: Ev):
    z = _ev_z(x, p)
    with np.errstate(over="ignore"):
        if p.kind == "min":
            return -np.expm1(-np.exp(z))
        return np.exp(-np.exp(z))


def ev_sample(n: int, p: Ev, seed=None) -> np.ndarray:
    u = _rng(seed).random(int(n))
    u = np.where(u > 0, u, np.finfo(float).tiny)
    w = np.log(-np.log(u))
    return p.mu_ev + p.sigma_ev * w if p.kind == "min" else p.mu_ev - p.sigma_ev * w


def ev_fit(samples, kind: Literal["min", "max"] = "min", minimum: int = MIN_FIT_SAMPLES) -> Ev:
    """Maximum-likelihood Gumbel fit.

    For the minimum type the scale solves
    ``sigma = sum(x w) / sum(w) - mean(x)`` with ``w = exp(x / sigma)`` and the
    location follows as ``sigma * log(mean(w))``; the maximum type is fitted
    on the negated sample.
    """
    x = _check_samples(samples, minimum)
    if kind == "max":
        p = ev_fit(-x, "min", minimum)
        return Ev(-p.mu_ev, p.sigma_ev, "max")
    xm = x.max()
    mean = x.mean()

    def score(sigma):
        w = np.exp((x - xm) / sigma)
        return sigma - np.dot(x, w) / w.sum() + mean

    spread = x.std()
    lo, hi = spread * 1e-4, spread * 10.0
    trace = []
    for _ in range(60):
        if score(lo) < 0:
            break
        lo /= 10.0
    for _ in range(60):
        if score(hi) > 0:
            break
        hi *= 10.0
    try:
        sigma = optimize.brentq(score, lo, hi, xtol=1e-14 * spread, rtol=1e-13, maxiter=500)
    except (ValueError, RuntimeError) as exc:
        trace.append((lo, score(lo), hi, score(hi)))
        raise FitError(f"Gumbel scale equation did not converge: {exc}", trace) from exc
    w = np.exp((x - xm) / sigma)
    mu = xm + sigma * np.log(w.mean())
    return Ev(float(mu), float(sigma), "min")


# -------------------------------------------------------------------------
# generic maximum likelihood with a coarse-grid dominance check

TLS_GRID_STEPS = (-0.1, -0.05, 0.0, 0.05, 0.1)
"""Relative offsets of the postcondition grid: each parameter is perturbed by
these fractions (location offsets are scaled by the scale parameter)."""


def _minimize(nll, x0, label, max_restarts=5):
    trace = []
    best = None
    x = np.asarray(x0, dtype=float)
    for attempt in range(max_restarts):
        res = optimize.minimize(
            nll,
            x,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 20000, "maxfev": 40000, "adaptive": True},
        )
        trace.append((attempt, float(res.fun), res.x.tolist(), res.message))
        if best is None or res.fun < best.fun:
            best = res
        if res.success and np.isfinite(res.fun):
            # one restart from the optimum guards against simplex collapse
            if attempt > 0 and abs(trace[-2][1] - res.fun) <= 1e-9 * max(1.0, abs(res.fun)):
                break
        x = best.x
    if best is None or not np.isfinite(best.fun) or not best.success:
        raise FitError(f"{label} likelihood maximization did not converge", trace)
    return best.x, float(best.fun), trace


def _grid_points(center, to_natural, from_natural, loc_index, scale_index):
    """Coarse postcondition grid around a natural-parameter estimate."""
    nat = to_natural(center)
    pts = []
    for steps in itertools.product(TLS_GRID_STEPS, repeat=len(nat)):
        q = list(nat)
        for i, s in enumerate(steps):
            if i == loc_index:
                q[i] = nat[i] + s * nat[scale_index]
            else:
                q[i] = nat[i] * (1.0 + s)
        pts.append(from_natural(q))
    return pts


def _fit_with_grid_check(nll, x0, to_natural, from_natural, loc_index, scale_index, label):
    x, f, trace = _minimize(nll, x0, label)
    for _ in range(5):
        grid = _grid_points(x, to_natural, from_natural, loc_index, scale_index)
        vals = np.array([nll(g) for g in grid])
        j = int(np.argmin(vals))
        if vals[j] >= f - 1e-9 * max(1.0, abs(f)):
            return x, trace
        x, f, more = _minimize(nll, grid[j], label)
        trace.extend(more)
    raise FitError(f"{label} fit is dominated by its own coarse grid", trace)


def tls_grid(p: TLocScale):
    """The coarse grid used by the :func:`tls_fit` postcondition."""
    return [
        TLocScale(p.mu_t + a * p.sigma_t, p.sigma_t * (1 + b), p.nu_t * (1 + c))
        for a, b, c in itertools.product(TLS_GRID_STEPS, repeat=3)
    ]


def tls_loglik(samples, p: TLocScale) -> float:
    return float(np.sum(tls_logpdf(samples, p)))


def tls_fit(samples, minimum: int = MIN_FIT_SAMPLES) -> TLocScale:
    """Maximum-likelihood t location-scale fit over ``(mu, log sigma, log nu)``."""
    x = np.sort(_check_samples(samples, minimum))
    med = float(np.median(x))
    mad = float(np.median(np.abs(x - med)))
    if mad == 0:
        mad = float(np.std(x))

    def nll(q):
        mu, ls, ln = q
        if not (-30 < ls < 30 and -10 < ln < 12):
            return np.inf
        return -tls_loglik(x, TLocScale(mu, np.exp(ls), np.exp(ln)))

    x0 = [med, np.log(mad), np.log(3.0)]
    q, _ = _fit_with_grid_check(
        nll,
        x0,
        to_natural=lambda q: [q[0], np.exp(q[1]), np.exp(q[2])],
        from_natural=lambda n: [n[0], np.log(n[1]), np.log(n[2])],
        loc_index=0,
        scale_index=1,
        label="t location-scale",
    )
    return TLocScale(float(q[0]), float(np.exp(q[1])), float(np.exp(q[2])))


def gev_loglik(samples, p: Gev) -> float:
    return float(np.sum(gev_logpdf(samples, p)))


def gev_pwm_start(x) -> Gev:
    """Probability-weighted-moment estimate, used as the optimizer's start."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    j = np.arange(n)
    b0 = x.mean()
    b1 = np.sum(j / (n - 1) * x) / n
    b2 = np.sum(j * (j - 1) / ((n - 1) * (n - 2)) * x) / n
    c = (2 * b1 - b0) / (3 * b2 - b0) - np.log(2) / np.log(3)
    kh = 7.8590 * c + 2.9554 * c * c  # positive for bounded upper tail
    if abs(kh) < 1e-3:
        kh = 1e-3
    sigma = kh * (2 * b1 - b0) / (special.gamma(1 + kh) * (1 - 2.0 ** (-kh)))
    mu = b0 + sigma * (special.gamma(1 + kh) - 1) / kh
    if not sigma > 0:
        sigma = float(np.std(x))
    return Gev(float(-kh), float(sigma), float(mu))


def gev_fit(samples, minimum: int = MIN_FIT_SAMPLES) -> Gev:
    """Maximum-likelihood GEV fit over ``(k, log sigma, mu)``."""
    x = np.sort(_check_samples(samples, minimum))
    start = gev_pwm_start(x)

    def nll(q):
        k, ls, mu = q
        if abs(k) < 1e-9 or not -30 < ls < 30:
            return np.inf
        v = -gev_loglik(x, Gev(k, np.exp(ls), mu))
        return v if np.isfinite(v) else np.inf

    x0 = [start.k_g, np.log(start.sigma_g), start.mu_g]
    if not np.isfinite(nll(x0)):
        x0 = [-0.1 if start.k_g < 0 else 0.1, np.log(np.std(x)), float(np.mean(x))]
        if not np.isfinite(nll(x0)):
            x0 = [0.1, np.log(np.std(x)), float(np.median(x))]
    q, _ = _fit_with_grid_check(
        nll,
        x0,
        to_natural=lambda q: [q[0], np.exp(q[1]), q[2]],
        from_natural=lambda n: [n[0], np.log(n[1]), n[2]],
        loc_index=2,
        scale_index=1,
        label="GEV",
    )
    return Gev(float(q[0]), float(np.exp(q[1])), float(q[2]))


# -------------------------------------------------------------------------
# Kolmogorov-Smirnov


@dataclass(frozen=True)
class KsResult:
    statistic: float
    critical: float
    alpha: float
    passed: bool


def ks_critical(n: int, alpha: float) -> float:
    """Asymptotic one-sample critical distance ``c(alpha) / sqrt(n)``."""
    return float(special.kolmogi(alpha) / np.sqrt(n))


def ks_test(samples, cdf: Callable, alpha: float = 0.05) -> KsResult:
    """One-sample KS test; passes iff ``D < c(alpha) / sqrt(n)``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 10:
        raise ValueError(f"KS test needs at least 10 samples, got {n}")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - f)), float(np.max(f - (i - 1) / n)), 0.0)
    d = min(d, 1.0)
    crit = ks_critical(n, alpha)
    return KsResult(d, crit, alpha, d < crit)
