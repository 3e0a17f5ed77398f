"""Speckle and return laws of the multiplicative model Z = X * Y.

Y is unit-mean Gamma speckle with shape L (the number of looks). X is the
backscatter, which is either a constant or follows a Gamma, reciprocal-Gamma
or inverse-Gaussian law, giving the Gamma, K, G0 and GH laws for the return Z.

All densities are evaluated in log space and exponentiated at the end so that
large L or large scale parameters do not overflow intermediate terms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

__all__ = [
    "DomainError",
    "MomentError",
    "ConstantGamma",
    "KLaw",
    "G0",
    "GH",
    "ReturnModel",
    "make_rng",
    "bessel_k",
    "log_bessel_k",
    "speckle_logpdf",
    "speckle_pdf",
    "speckle_moment",
    "return_logpdf",
    "return_pdf",
    "backscatter_logpdf",
    "backscatter_moment",
    "theoretical_moment",
    "sample",
    "sample_speckle",
]


class DomainError(ValueError):
    """Argument outside the support of a density or a parameter space."""


class MomentError(ValueError):
    """Requested moment does not exist for the given parameters."""


def _check_looks(L: float) -> None:
    if not np.isfinite(L) or L < 1:
        raise DomainError(f"number of looks must be >= 1, got {L}")


@dataclass(frozen=True)
class ConstantGamma:
    """Constant backscatter c; the return is Gamma(L, L/c)."""

    c: float
    L: float = 1.0

    def __post_init__(self):
        _check_looks(self.L)
        if not self.c > 0:
            raise DomainError(f"c must be > 0, got {self.c}")

    @property
    def mean(self) -> float:
        return float(self.c)


@dataclass(frozen=True)
class KLaw:
    """Gamma(alpha, rate lam) backscatter; the return is K(alpha, lam, L)."""

    alpha: float
    lam: float
    L: float = 1.0

    def __post_init__(self):
        _check_looks(self.L)
        if not (self.alpha > 0 and self.lam > 0):
            raise DomainError(f"K law needs alpha > 0 and lam > 0, got {self.alpha}, {self.lam}")

    @property
    def mean(self) -> float:
        return self.alpha / self.lam


@dataclass(frozen=True)
class G0:
    """Reciprocal-Gamma backscatter; the return is G0(alpha, gamma, L)."""

    alpha: float
    gamma: float
    L: float = 1.0

    def __post_init__(self):
        _check_looks(self.L)
        if not (self.alpha < 0 and self.gamma > 0):
            raise DomainError(f"G0 law needs alpha < 0 and gamma > 0, got {self.alpha}, {self.gamma}")

    @property
    def mean(self) -> float:
        if self.alpha >= -1:
            return float("inf")
        return self.gamma / (-self.alpha - 1)


@dataclass(frozen=True)
class GH:
    """Inverse-Gaussian backscatter (mean sigma, shape 2*omega*sigma); the return is GH(omega, sigma, L)."""

    omega: float
    sigma: float
    L: float = 1.0

    def __post_init__(self):
        _check_looks(self.L)
        if not (self.omega > 0 and self.sigma > 0):
            raise DomainError(f"GH law needs omega > 0 and sigma > 0, got {self.omega}, {self.sigma}")

    @property
    def mean(self) -> float:
        return float(self.sigma)


ReturnModel = Union[ConstantGamma, KLaw, G0, GH]


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator seeded through SeedSequence; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


# --------------------------------------------------------------------------
# Bessel function of the third kind
# --------------------------------------------------------------------------

def log_bessel_k(nu, x):
    """log K_nu(x), computed from the exponentially scaled kve."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("bessel_k needs x > 0")
    with np.errstate(over="ignore", divide="ignore"):
        scaled = special.kve(nu, x)
    if np.any(~np.isfinite(scaled)):
        raise OverflowError(f"K_{nu}(x) overflows for some x in [{x.min()}, {x.max()}]")
    if np.any(scaled == 0):
        raise OverflowError(f"K_{nu}(x) underflows for some x in [{x.min()}, {x.max()}]")
    out = np.log(scaled) - x
    return out if out.ndim else float(out)


def bessel_k(nu, x):
    """Modified Bessel function of the third kind K_nu(x) for x > 0.

    Raises OverflowError instead of returning 0 or inf when the value is not
    representable in double precision.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("bessel_k needs x > 0")
    with np.errstate(over="ignore", under="ignore"):
        out = special.kv(nu, x)
    if np.any(~np.isfinite(out)) or np.any(out == 0):
        raise OverflowError(f"K_{nu}(x) is not representable for x in [{x.min()}, {x.max()}]")
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# Densities
# --------------------------------------------------------------------------

def _positive(z, name="z"):
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise DomainError(f"{name} must be > 0")
    return z


def _finish(logf, exponentiate: bool):
    out = np.exp(logf) if exponentiate else logf
    if exponentiate and np.any(np.isinf(out)):
        raise OverflowError("density overflows")
    return out if np.ndim(out) else float(out)


def speckle_logpdf(x, L: float):
    _check_looks(L)
    x = _positive(x, "x")
    return _finish(L * np.log(L) - special.gammaln(L) + (L - 1) * np.log(x) - L * x, False)


def speckle_pdf(x, L: float):
    """Unit-mean Gamma density L^L / Gamma(L) x^(L-1) exp(-L x)."""
    return _finish(speckle_logpdf(x, L), True)


def return_logpdf(z, model: ReturnModel):
    z = _positive(z)
    L = model.L
    base = L * np.log(L) - special.gammaln(L) + (L - 1) * np.log(z)
    if isinstance(model, ConstantGamma):
        logf = base - L * np.log(model.c) - L * z / model.c
    elif isinstance(model, KLaw):
        a, lam = model.alpha, model.lam
        # z exponent is (a+L)/2 - 1; the form without the -1 does not normalize
        logf = (np.log(2.0) + 0.5 * (a + L) * np.log(lam * L) - special.gammaln(L) - special.gammaln(a)
                + (0.5 * (a + L) - 1) * np.log(z) + log_bessel_k(a - L, 2 * np.sqrt(lam * L * z)))
    elif isinstance(model, G0):
        a, g = model.alpha, model.gamma
        logf = (base + special.gammaln(L - a) - a * np.log(g) - special.gammaln(-a)
                - (L - a) * np.log(g + L * z))
    elif isinstance(model, GH):
        w, s = model.omega, model.sigma
        t = w * s + L * z
        logf = (base + np.log(2.0) + 0.5 * np.log(w * s / np.pi) + 2 * w
                + 0.25 * (1 + 2 * L) * (np.log(w) - np.log(s) - np.log(t))
                + log_bessel_k(L + 0.5, 2 * np.sqrt(w / s * t)))
    else:
        raise TypeError(f"unknown return model {model!r}")
    return _finish(logf, False)


def return_pdf(z, model: ReturnModel):
    """Density of the return Z = X * Y under the given model."""
    return _finish(return_logpdf(z, model), True)


def backscatter_logpdf(x, model: ReturnModel):
    """Log density of the backscatter X (the MAP prior). Not defined for constant backscatter."""
    x = _positive(x, "x")
    if isinstance(model, G0):
        a, g = model.alpha, model.gamma
        logf = -a * np.log(g) - special.gammaln(-a) + (a - 1) * np.log(x) - g / x
    elif isinstance(model, GH):
        w, s = model.omega, model.sigma
        logf = 0.5 * np.log(w * s / np.pi) - 1.5 * np.log(x) + 2 * w - w * x / s - w * s / x
    elif isinstance(model, KLaw):
        a, lam = model.alpha, model.lam
        logf = a * np.log(lam) - special.gammaln(a) + (a - 1) * np.log(x) - lam * x
    else:
        raise TypeError(f"no backscatter density for {type(model).__name__}")
    return _finish(logf, False)


# --------------------------------------------------------------------------
# Moments
# --------------------------------------------------------------------------

def speckle_moment(L: float, k: float) -> float:
    """E[Y^k] = Gamma(L+k) / (L^k Gamma(L))."""
    _check_looks(L)
    if k <= -L:
        raise MomentError(f"speckle moment of order {k} needs k > -L")
    return float(np.exp(special.gammaln(L + k) - special.gammaln(L) - k * np.log(L)))


def backscatter_moment(model: ReturnModel, k: float) -> float:
    if isinstance(model, ConstantGamma):
        return float(model.c ** k)
    if isinstance(model, KLaw):
        if k <= -model.alpha:
            raise MomentError(f"K backscatter moment of order {k} needs alpha > -k")
        return float(np.exp(special.gammaln(model.alpha + k) - special.gammaln(model.alpha)
                            - k * np.log(model.lam)))
    if isinstance(model, G0):
        if model.alpha >= -k:
            raise MomentError(f"G0 moment of order {k} needs alpha < {-k}, got {model.alpha}")
        return float(np.exp(k * np.log(model.gamma) + special.gammaln(-model.alpha - k)
                            - special.gammaln(-model.alpha)))
    if isinstance(model, GH):
        x = 2 * model.omega
        return float(model.sigma ** k * special.kve(k - 0.5, x) / special.kve(0.5, x))
    raise TypeError(f"unknown return model {model!r}")


def theoretical_moment(model: ReturnModel, k: float) -> float:
    """E[Z^k] as the product of the backscatter and speckle moments of order k."""
    if k == 0:
        return 1.0
    return backscatter_moment(model, k) * speckle_moment(model.L, k)


# --------------------------------------------------------------------------
# Sampling
# --------------------------------------------------------------------------

def sample_speckle(rng: np.random.Generator, L: float, n) -> np.ndarray:
    _check_looks(L)
    return rng.gamma(L, 1.0 / L, size=n)


def sample(rng: np.random.Generator, model: ReturnModel, n) -> np.ndarray:
    """Draw n independent returns; the backscatter is drawn first, then the speckle."""
    if np.prod(n) < 1:
        raise ValueError("n must be >= 1")
    if isinstance(model, ConstantGamma):
        x = model.c
    elif isinstance(model, KLaw):
        x = rng.gamma(model.alpha, 1.0 / model.lam, size=n)
    elif isinstance(model, G0):
        x = model.gamma / rng.gamma(-model.alpha, 1.0, size=n)
    elif isinstance(model, GH):
        # numpy's wald uses the Michael-Schucany-Haas transform with rejection
        x = rng.wald(model.sigma, 2 * model.omega * model.sigma, size=n)
    else:
        raise TypeError(f"unknown return model {model!r}")
    return x * sample_speckle(rng, model.L, n)
