"""Sliding-window despeckling filters: Lee, MAP-G0 and MAP-GH.

Images are 2-D float arrays of nonnegative intensities. Every filter gathers a
square window centred on each pixel (mirror padding at the borders), so
output pixels depend only on the input image.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import optimize

from . import distributions as dist
from .estimation import backscatter_variance, solve_g0_shape, solve_gh_shape

__all__ = [
    "ImageError",
    "MapBracketError",
    "Method",
    "Fallback",
    "FilterSpec",
    "check_image",
    "window_stats",
    "map_g0_estimate",
    "map_gh_estimate",
    "numerical_map_oracle",
    "lee_filter",
    "map_g0_filter",
    "map_gh_filter",
    "apply_filter",
]


class ImageError(ValueError):
    """Image has the wrong shape or non-finite / negative pixels."""


class MapBracketError(RuntimeError):
    """The numerical posterior search found no interior maximum."""


class Method(str, enum.Enum):
    LEE = "lee"
    MAP_G0 = "mapg0"
    MAP_GH = "mapgh"

    @property
    def code(self) -> str:
        return {"lee": "L", "mapg0": "G", "mapgh": "H"}[self.value]


class Fallback(str, enum.Enum):
    WINDOW_MEAN = "mean"
    IDENTITY = "identity"


@dataclass(frozen=True)
class FilterSpec:
    method: Method
    window: int = 7
    looks: float = 1.0
    fallback: Fallback = Fallback.WINDOW_MEAN

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "fallback", Fallback(self.fallback))
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if not self.looks >= 1:
            raise ValueError(f"looks must be >= 1, got {self.looks}")


def check_image(image) -> np.ndarray:
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ImageError(f"expected a 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ImageError("image has non-finite pixels")
    if np.any(img < 0):
        raise ImageError("image has negative pixels")
    return img


def window_stats(image: np.ndarray, window: int):
    """Per-pixel window mean, unbiased variance and mean of sqrt(z)."""
    pad = window // 2
    padded = np.pad(image, pad, mode="reflect")
    views = sliding_window_view(padded, (window, window))
    n = window * window
    mean = views.sum(axis=(2, 3)) / n
    var = ((views - mean[..., None, None]) ** 2).sum(axis=(2, 3)) / (n - 1)
    half = sliding_window_view(np.sqrt(padded), (window, window)).sum(axis=(2, 3)) / n
    return mean, var, half


# --------------------------------------------------------------------------
# Closed-form MAP estimates
# --------------------------------------------------------------------------

def map_g0_estimate(z, alpha, gamma, L: float):
    """Posterior mode of the backscatter under a reciprocal-Gamma prior: (Lz + gamma) / (L + 1 - alpha)."""
    out = (L * np.asarray(z, dtype=float) + gamma) / (L + 1 - np.asarray(alpha, dtype=float))
    return out if np.ndim(out) else float(out)


def map_gh_estimate(z, omega, sigma, L: float):
    """Posterior mode under an inverse-Gaussian prior.

    Positive root of (omega/sigma) x^2 + (L + 3/2) x - (Lz + omega sigma) = 0,
    written as 2c / (b + sqrt(b^2 + 4ac)) to avoid cancellation when omega/sigma is small.
    """
    z = np.asarray(z, dtype=float)
    b = L + 1.5
    c = L * z + omega * sigma
    out = 2 * c / (b + np.sqrt(b * b + 4 * (omega / sigma) * c))
    return out if np.ndim(out) else float(out)


def numerical_map_oracle(z: float, prior, L: float) -> float:
    """argmax over x > 0 of log f(z | x) + log f_X(x), found numerically.

    f(z | x) is the Gamma(L, L/x) density and f_X is the G0 or GH backscatter
    prior. Used to check the closed forms above.
    """
    if not z > 0:
        raise dist.DomainError("oracle needs z > 0")

    def neg_log_post(t):
        x = np.exp(t)
        return -(dist.return_logpdf(z, dist.ConstantGamma(x, L)) + dist.backscatter_logpdf(x, prior))

    centre = np.log(z) if prior.mean == float("inf") else 0.5 * (np.log(z) + np.log(prior.mean))
    grid = np.linspace(centre - 25, centre + 25, 2001)
    values = np.array([neg_log_post(t) for t in grid])
    i = int(np.argmin(values))
    if i == 0 or i == grid.size - 1:
        raise MapBracketError(f"no interior maximum for z={z}, prior={prior}")
    res = optimize.minimize_scalar(neg_log_post, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                   options={"xatol": 1e-13, "maxiter": 500})
    if not res.success:
        raise MapBracketError(res.message)
    return float(np.exp(res.x))


# --------------------------------------------------------------------------
# Filters
# --------------------------------------------------------------------------

def lee_filter(image, window: int = 7, looks: float = 1.0, form: str = "exact") -> np.ndarray:
    """Lee filter: mean + b (z - mean), gain b = var_X / var_Z clamped to [0, 1]."""
    img = check_image(image)
    mean, var_z, _ = window_stats(img, window)
    var_x = backscatter_variance(mean, var_z, looks, form)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(var_z > 0, var_x / var_z, 0.0)
    gain = np.clip(gain, 0.0, 1.0)
    return mean + gain * (img - mean)


def _fallback(img, mean, fallback):
    return mean if Fallback(fallback) is Fallback.WINDOW_MEAN else img


def map_g0_filter(image, window: int = 7, looks: float = 1.0, fallback="mean") -> np.ndarray:
    img = check_image(image)
    mean, _, half = window_stats(img, window)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (half / np.sqrt(mean)).ravel()
    alpha, ok = solve_g0_shape(ratio, looks)
    out = _fallback(img, mean, fallback).ravel().copy()
    m = mean.ravel()[ok]
    a = alpha[ok]
    out[ok] = map_g0_estimate(img.ravel()[ok], a, m * (-a - 1), looks)
    return out.reshape(img.shape)


def map_gh_filter(image, window: int = 7, looks: float = 1.0, fallback="mean") -> np.ndarray:
    img = check_image(image)
    mean, _, half = window_stats(img, window)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (half / np.sqrt(mean)).ravel()
    omega, ok = solve_gh_shape(ratio, looks)
    out = _fallback(img, mean, fallback).ravel().copy()
    out[ok] = map_gh_estimate(img.ravel()[ok], omega[ok], mean.ravel()[ok], looks)
    return out.reshape(img.shape)


def apply_filter(image, spec: FilterSpec) -> np.ndarray:
    img = check_image(image)
    if spec.window > min(img.shape):
        raise ImageError(f"window {spec.window} exceeds image size {img.shape}")
    if spec.method is Method.LEE:
        return lee_filter(img, spec.window, spec.looks)
    if spec.method is Method.MAP_G0:
        return map_g0_filter(img, spec.window, spec.looks, spec.fallback)
    return map_gh_filter(img, spec.window, spec.looks, spec.fallback)
