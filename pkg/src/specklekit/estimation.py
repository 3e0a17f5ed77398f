"""Moment-based parameter estimation.

The G0 and GH fits match the sample moments of order 1/2 and 1 to their
closed forms. Writing m1 for the mean and mh for the mean of sqrt(z), the
normalized ratio mh / sqrt(m1) depends on a single shape parameter, so each
fit is a one-dimensional monotone root search followed by a closed-form scale.

    G0:  mh / sqrt(m1) = s(L) * Gamma(a - 1/2) sqrt(a - 1) / Gamma(a),   a = -alpha
    GH:  mh / sqrt(m1) = s(L) * K_0(2 w) / K_{1/2}(2 w)

with s(L) = Gamma(L + 1/2) / (sqrt(L) Gamma(L)). Both right-hand sides increase
with the shape parameter and tend to s(L) in the homogeneous limit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import optimize, special

from .distributions import G0, GH, DomainError, ReturnModel, theoretical_moment

__all__ = [
    "DegenerateSampleError",
    "SampleStats",
    "FitResult",
    "ALPHA_MIN",
    "ALPHA_EPS",
    "OMEGA_RANGE",
    "speckle_half_factor",
    "estimate_enl",
    "fit_g0_moments",
    "fit_gh_moments",
    "solve_g0_shape",
    "solve_gh_shape",
    "lee_local_stats",
    "backscatter_variance",
]

ALPHA_MIN = -50.0
ALPHA_EPS = 1e-6
OMEGA_RANGE = (1e-3, 1e3)
ROOT_RTOL = 1e-12
ROOT_MAXITER = 200


class DegenerateSampleError(ValueError):
    """The sample has zero variance (or too few points) for the requested statistic."""


@dataclass(frozen=True)
class SampleStats:
    n: int
    mean: float
    variance: float
    half_moment: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.variance < 0 or self.half_moment < 0:
            raise ValueError("variance and half_moment must be >= 0")

    @classmethod
    def from_samples(cls, samples) -> "SampleStats":
        z = np.asarray(samples, dtype=float).ravel()
        if z.size < 1 or np.any(z < 0):
            raise DomainError("need at least one nonnegative sample")
        var = float(z.var(ddof=1)) if z.size > 1 else 0.0
        return cls(z.size, float(z.mean()), var, float(np.sqrt(z).mean()))

    @classmethod
    def from_model(cls, model: ReturnModel, n: int = 1) -> "SampleStats":
        """Exact population moments, for round-trip checks."""
        m1 = theoretical_moment(model, 1)
        try:
            var = theoretical_moment(model, 2) - m1 * m1
        except ValueError:
            var = float("inf")
        return cls(n, m1, var, theoretical_moment(model, 0.5))


@dataclass(frozen=True)
class FitResult:
    params: Optional[Union[G0, GH]]
    converged: bool
    residual: float


def speckle_half_factor(L: float) -> float:
    """s(L) = E[sqrt(Y)], the order-1/2 moment of unit-mean Gamma speckle."""
    return float(np.exp(special.gammaln(L + 0.5) - special.gammaln(L) - 0.5 * np.log(L)))


def estimate_enl(samples) -> float:
    """Equivalent number of looks: (mean / std)^2, std with the n-1 denominator."""
    z = np.asarray(samples, dtype=float).ravel()
    if z.size < 2:
        raise DegenerateSampleError("ENL needs at least two samples")
    var = z.var(ddof=1)
    if not var > 0:
        raise DegenerateSampleError("ENL is undefined for a zero-variance sample")
    return float(z.mean() ** 2 / var)


# --------------------------------------------------------------------------
# Shape equations
# --------------------------------------------------------------------------

def _g0_log_ratio(a):
    """log of Gamma(a - 1/2) sqrt(a - 1) / Gamma(a), increasing on a > 1."""
    return special.gammaln(a - 0.5) - special.gammaln(a) + 0.5 * np.log(a - 1)


def _g0_log_ratio_prime(a):
    return special.digamma(a - 0.5) - special.digamma(a) + 0.5 / (a - 1)


def _gh_log_ratio(u):
    """log of K_0(2w) / K_{1/2}(2w) with w = exp(u), increasing in u."""
    w = np.exp(u)
    return np.log(special.k0e(2 * w)) - 0.5 * np.log(np.pi / (4 * w))


def _gh_log_ratio_prime(u):
    w = np.exp(u)
    x = 2 * w
    return 2 * w * (1 - special.k1e(x) / special.k0e(x)) + 0.5


def _bracketed_newton(f, fprime, target, lo, hi, rtol=1e-13, maxiter=100):
    """Vectorized Newton iteration that falls back to bisection outside the bracket.

    f must be increasing on [lo, hi] and f(lo) < target < f(hi) elementwise.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    x = 0.5 * (lo + hi)
    active = np.ones(x.shape, dtype=bool)
    for _ in range(maxiter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        xa = x[idx]
        fa = f(xa) - target[idx]
        pos = fa > 0
        hi[idx] = np.where(pos, xa, hi[idx])
        lo[idx] = np.where(pos, lo[idx], xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = xa - fa / fprime(xa)
        bad = ~np.isfinite(step) | (step < lo[idx]) | (step > hi[idx])
        new = np.where(bad, 0.5 * (lo[idx] + hi[idx]), step)
        new = np.where(fa == 0, xa, new)
        done = (np.abs(new - xa) <= rtol * np.abs(new)) | (fa == 0) | (hi[idx] - lo[idx] <= rtol * np.abs(new))
        x[idx] = new
        active[idx[done]] = False
    return x


def _solve(f, fprime, log_ratio, lo, hi):
    log_ratio = np.atleast_1d(np.asarray(log_ratio, dtype=float))
    out = np.full(log_ratio.shape, np.nan)
    ok = np.isfinite(log_ratio) & (log_ratio > f(lo)) & (log_ratio < f(hi))
    if np.any(ok):
        out[ok] = _bracketed_newton(f, fprime, log_ratio[ok], np.full(ok.sum(), lo), np.full(ok.sum(), hi))
    return out, ok


def solve_g0_shape(ratio, L: float):
    """Vectorized G0 shape from ratio = mean(sqrt z) / sqrt(mean z).

    Returns (alpha, ok); alpha is NaN where the ratio is outside the attainable
    range for alpha in (ALPHA_MIN, -1 - ALPHA_EPS).
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        target = np.log(np.asarray(ratio, dtype=float) / speckle_half_factor(L))
    a, ok = _solve(_g0_log_ratio, _g0_log_ratio_prime, target, 1 + ALPHA_EPS, -ALPHA_MIN)
    return -a, ok


def solve_gh_shape(ratio, L: float):
    """Vectorized GH shape omega from ratio = mean(sqrt z) / sqrt(mean z); NaN where unattainable."""
    with np.errstate(divide="ignore", invalid="ignore"):
        target = np.log(np.asarray(ratio, dtype=float) / speckle_half_factor(L))
    u, ok = _solve(_gh_log_ratio, _gh_log_ratio_prime, target, np.log(OMEGA_RANGE[0]), np.log(OMEGA_RANGE[1]))
    return np.exp(u), ok


# --------------------------------------------------------------------------
# Scalar fits
# --------------------------------------------------------------------------

def _ratio(stats: SampleStats) -> float:
    if not (stats.mean > 0 and stats.half_moment > 0):
        return float("nan")
    return stats.half_moment / np.sqrt(stats.mean)


def _brentq(f, target, lo, hi):
    flo, fhi = f(lo) - target, f(hi) - target
    if not (np.isfinite(target) and flo < 0 < fhi):
        return None
    root = optimize.brentq(lambda t: f(t) - target, lo, hi, rtol=ROOT_RTOL, maxiter=ROOT_MAXITER)
    return root, abs(float(f(root) - target))


def fit_g0_moments(stats: SampleStats, L: float) -> FitResult:
    """Fit G0(alpha, gamma) from the moments of order 1/2 and 1.

    Not converged when the window is too homogeneous (alpha would fall below
    ALPHA_MIN) or when the moment ratio is otherwise unattainable.
    """
    r = _ratio(stats)
    with np.errstate(divide="ignore", invalid="ignore"):
        target = np.log(r / speckle_half_factor(L))
    found = _brentq(_g0_log_ratio, target, 1 + ALPHA_EPS, -ALPHA_MIN)
    if found is None:
        return FitResult(None, False, float("inf"))
    a, resid = found
    return FitResult(G0(-a, stats.mean * (a - 1), L), True, resid)


def fit_gh_moments(stats: SampleStats, L: float) -> FitResult:
    """Fit GH(omega, sigma): sigma is the sample mean, omega solves the Bessel-ratio equation."""
    r = _ratio(stats)
    with np.errstate(divide="ignore", invalid="ignore"):
        target = np.log(r / speckle_half_factor(L))
    found = _brentq(_gh_log_ratio, target, np.log(OMEGA_RANGE[0]), np.log(OMEGA_RANGE[1]))
    if found is None:
        return FitResult(None, False, float("inf"))
    u, resid = found
    return FitResult(GH(float(np.exp(u)), stats.mean, L), True, resid)


# --------------------------------------------------------------------------
# Lee statistics
# --------------------------------------------------------------------------

def backscatter_variance(mean, var_z, L: float, form: str = "exact"):
    """Backscatter variance from the return mean and variance.

    form="exact" inverts Var Z = E[X^2](1 + s2) - E[X]^2 with s2 = 1/L, i.e.
    (var_z - mean^2 s2) / (1 + s2). form="literal" evaluates
    var_z - mean^2 s2 / (s2 + 1), which exceeds the exact form by
    var_z s2 / (1 + s2).
    """
    s2 = 1.0 / L
    if form == "exact":
        return (var_z - mean * mean * s2) / (1 + s2)
    if form == "literal":
        return var_z - mean * mean * s2 / (s2 + 1)
    raise ValueError(f"unknown form {form!r}")


def lee_local_stats(window, L: float, form: str = "exact"):
    """(mean, backscatter variance) of a window; a negative variance is returned as is."""
    z = np.asarray(window, dtype=float).ravel()
    if z.size < 1:
        raise ValueError("window must be nonempty")
    mean = float(z.mean())
    var_z = float(z.var(ddof=1)) if z.size > 1 else 0.0
    return mean, float(backscatter_variance(mean, var_z, L, form))
