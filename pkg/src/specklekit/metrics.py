"""Quality measures of Lee's protocol, computed on phantom ROIs.

ENL is higher-is-better; line preservation, edge gradient and edge variance
are lower-is-better. Line preservation is the absolute deviation of the
filtered line contrast from the truth contrast. The edge gradient is the
absolute difference of band means; the edge variance is the absolute
difference of unbiased band variances.
"""
from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

from .estimation import DegenerateSampleError, estimate_enl
from .phantom import PhantomLayout, Rect

__all__ = [
    "METRICS",
    "HIGHER_IS_BETTER",
    "MetricRecord",
    "roi_pixels",
    "metric_enl",
    "line_contrast",
    "metric_line",
    "metric_edge",
    "assess",
    "better",
]

# CSV column names, in record order
METRICS = ("enl", "line_pres", "edge_gradient", "edge_variance")
HIGHER_IS_BETTER = frozenset({"enl"})


@dataclass(frozen=True)
class MetricRecord:
    enl: float
    line_preservation: float
    edge_gradient: float
    edge_variance: float

    def as_tuple(self) -> tuple:
        return astuple(self)

    def get(self, metric: str) -> float:
        return dict(zip(METRICS, astuple(self)))[metric]


def better(metric: str, a: float, b: float) -> bool:
    """True when value a is strictly better than b for the given metric."""
    return a > b if metric in HIGHER_IS_BETTER else a < b


def roi_pixels(image, roi: Rect) -> np.ndarray:
    px = np.asarray(image, dtype=float)[roi.slices].ravel()
    if px.size == 0:
        raise ValueError(f"empty ROI {roi}")
    return px


def metric_enl(image, roi: Rect) -> float:
    return estimate_enl(roi_pixels(image, roi))


def line_contrast(image, line: Rect, left: Rect, right: Rect) -> float:
    """2 x_line - (x_left + x_right) / 2 over the ROI means."""
    x, x1, x2 = (roi_pixels(image, r) for r in (line, left, right))
    if not (x.size == x1.size == x2.size):
        raise ValueError("line ROIs must have equal pixel counts")
    return 2 * x.mean() - (x1.mean() + x2.mean()) / 2


def metric_line(image, line: Rect, left: Rect, right: Rect, truth_contrast: float) -> float:
    return float(abs(line_contrast(image, line, left, right) - truth_contrast))


def metric_edge(image, inside: Rect, outside: Rect):
    a, b = roi_pixels(image, inside), roi_pixels(image, outside)
    if a.size < 2 or b.size < 2:
        raise ValueError("edge bands need at least two pixels each")
    return float(abs(a.mean() - b.mean())), float(abs(a.var(ddof=1) - b.var(ddof=1)))


def assess(filtered, layout: PhantomLayout, truth, all_edges: bool = False) -> MetricRecord:
    """All four measures of one filtered image against its truth phantom.

    With all_edges the edge measures are averaged over every strip of width
    >= layout.edge_min_width instead of the widest strip only. A constant
    homogeneous block (e.g. the truth itself) has unbounded ENL, reported as inf.
    """
    filtered = np.asarray(filtered, dtype=float)
    truth = np.asarray(truth, dtype=float)
    shape = (layout.height, layout.width)
    if filtered.shape != shape or truth.shape != shape:
        raise ValueError(f"image shapes {filtered.shape}, {truth.shape} do not match layout {shape}")
    rois = layout.rois()
    line = (rois.line, rois.line_left, rois.line_right)
    try:
        enl = metric_enl(filtered, rois.homogeneous_block)
    except DegenerateSampleError:
        if not roi_pixels(filtered, rois.homogeneous_block).mean() > 0:
            raise
        enl = float("inf")
    line_pres = metric_line(filtered, *line, line_contrast(truth, *line))
    pairs = rois.edges if all_edges else [rois.primary_edge]
    edges = np.array([metric_edge(filtered, p.inside, p.outside) for p in pairs])
    gradient, variance = edges.mean(axis=0)
    return MetricRecord(enl, line_pres, float(gradient), float(variance))
