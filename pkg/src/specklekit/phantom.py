"""Binary phantom of points and strips, its ROI registry, and speckle corruption.

The canonical layout is 256x256 with seven vertical strips of widths
1, 3, ..., 13 pixels, five isolated points below them, and a feature-free
homogeneous block on the right. Regions are half-open ``[row0, row1) x
[col0, col1)`` rectangles.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import distributions as dist
from .io import read_keyvalue, write_keyvalue

__all__ = [
    "LayoutError",
    "Rect",
    "EdgePair",
    "ROIRegistry",
    "PhantomLayout",
    "TABLE1",
    "Situation",
    "feature_mask",
    "build_phantom",
    "situation_truth",
    "corrupt",
    "load_layout",
    "save_layout",
]

# situation id -> (alpha, gamma) of the G0 background
TABLE1 = {
    1: (-2.0, 230.0),
    2: (-2.0, 50.0),
    3: (-4.0, 690.0),
    4: (-4.0, 150.0),
    5: (-10.0, 2070.0),
    6: (-10.0, 450.0),
}


class LayoutError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid phantom layout:\n" + "\n".join(f"  - {v}" for v in self.violations))


@dataclass(frozen=True)
class Rect:
    row0: int
    row1: int
    col0: int
    col1: int

    @property
    def slices(self):
        return slice(self.row0, self.row1), slice(self.col0, self.col1)

    @property
    def size(self) -> int:
        return max(0, self.row1 - self.row0) * max(0, self.col1 - self.col0)

    def inside(self, height: int, width: int) -> bool:
        return 0 <= self.row0 < self.row1 <= height and 0 <= self.col0 < self.col1 <= width

    def intersects(self, other: "Rect") -> bool:
        return (self.row0 < other.row1 and other.row0 < self.row1
                and self.col0 < other.col1 and other.col0 < self.col1)

    def __str__(self):
        return f"{self.row0},{self.row1},{self.col0},{self.col1}"


class EdgePair(NamedTuple):
    strip_width: int
    inside: Rect
    outside: Rect


class ROIRegistry(NamedTuple):
    homogeneous_block: Rect
    line: Rect
    line_left: Rect
    line_right: Rect
    edges: list
    primary_edge: EdgePair


@dataclass(frozen=True)
class PhantomLayout:
    width: int = 256
    height: int = 256
    background_mean: float = 230.0
    contrast_ratio: float = 4.0
    strip_widths: tuple = (1, 3, 5, 7, 9, 11, 13)
    strip_columns: tuple = (20, 33, 48, 65, 84, 105, 128)
    strip_rows: tuple = (20, 236)
    points: tuple = ((245, 20), (245, 36), (245, 52), (245, 68), (245, 84))
    homogeneous_block: Rect = field(default_factory=lambda: Rect(8, 121, 160, 249))
    band_width: int = 3
    band_offset: int = 1
    edge_min_width: int = 5

    @property
    def strips(self) -> list:
        r0, r1 = self.strip_rows
        return [Rect(r0, r1, c, c + w) for c, w in zip(self.strip_columns, self.strip_widths)]

    @property
    def foreground_mean(self) -> float:
        return self.contrast_ratio * self.background_mean

    def edge_pair(self, strip: Rect) -> EdgePair:
        """Bands on either side of a strip's left edge, each offset from the boundary."""
        c, b, o = strip.col0, self.band_width, self.band_offset
        inside = Rect(strip.row0, strip.row1, c + o, c + o + b)
        outside = Rect(strip.row0, strip.row1, c - o - b, c - o)
        return EdgePair(strip.col1 - strip.col0, inside, outside)

    def rois(self) -> ROIRegistry:
        strips = self.strips
        lines = [s for s, w in zip(strips, self.strip_widths) if w == 1]
        if len(lines) != 1:
            raise LayoutError([f"need exactly one width-1 strip, found {len(lines)}"])
        line = lines[0]
        left = dataclasses.replace(line, col0=line.col0 - 1, col1=line.col0)
        right = dataclasses.replace(line, col0=line.col1, col1=line.col1 + 1)
        edges = [self.edge_pair(s) for s, w in zip(strips, self.strip_widths) if w >= self.edge_min_width]
        if not edges:
            raise LayoutError([f"no strip of width >= {self.edge_min_width} for edge measures"])
        primary = max(edges, key=lambda e: e.strip_width)
        return ROIRegistry(self.homogeneous_block, line, left, right, edges, primary)

    def violations(self) -> list:
        v = []
        h, w = self.height, self.width
        if h < 1 or w < 1:
            v.append(f"image size must be positive, got {w}x{h}")
        if not self.background_mean > 0:
            v.append(f"background_mean must be > 0, got {self.background_mean}")
        if not self.contrast_ratio > 1:
            v.append(f"contrast_ratio must be > 1, got {self.contrast_ratio}")
        if len(self.strip_widths) != len(self.strip_columns):
            v.append("strip_widths and strip_columns differ in length")
            return v
        if any(sw < 1 for sw in self.strip_widths):
            v.append("strip widths must be >= 1")
        if self.band_width < 1 or self.band_offset < 0:
            v.append("band_width must be >= 1 and band_offset >= 0")
        strips = self.strips
        for s, sw in zip(strips, self.strip_widths):
            if not s.inside(h, w):
                v.append(f"strip of width {sw} at column {s.col0} leaves the image")
        for i in range(len(strips)):
            for j in range(i + 1, len(strips)):
                # adjacent strips would merge into one feature
                a, b = strips[i], strips[j]
                grown = Rect(a.row0, a.row1, a.col0 - 1, a.col1 + 1)
                if grown.intersects(b):
                    v.append(f"strips at columns {a.col0} and {b.col0} overlap or touch")
        pts = [Rect(r, r + 1, c, c + 1) for r, c in self.points]
        for p in pts:
            if not p.inside(h, w):
                v.append(f"point ({p.row0}, {p.col0}) leaves the image")
            grown = Rect(p.row0 - 1, p.row1 + 1, p.col0 - 1, p.col1 + 1)
            for s in strips:
                if grown.intersects(s):
                    v.append(f"point ({p.row0}, {p.col0}) touches the strip at column {s.col0}")
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                a, b = pts[i], pts[j]
                if Rect(a.row0 - 1, a.row1 + 1, a.col0 - 1, a.col1 + 1).intersects(b):
                    v.append(f"points ({a.row0}, {a.col0}) and ({b.row0}, {b.col0}) touch")
        if v:
            return v
        try:
            rois = self.rois()
        except LayoutError as e:
            return v + e.violations
        features = strips + pts

        def clear(name, r):
            if not r.inside(h, w):
                v.append(f"ROI {name} leaves the image")
            for f in features:
                if r.intersects(f):
                    v.append(f"ROI {name} intersects the feature at ({f.row0}, {f.col0})")

        clear("homogeneous_block", rois.homogeneous_block)
        if rois.homogeneous_block.size < 2:
            v.append("homogeneous_block needs at least 2 pixels")
        clear("line_left", rois.line_left)
        clear("line_right", rois.line_right)
        for e in rois.edges:
            clear(f"edge_outside[{e.strip_width}]", e.outside)
            strip = next(s for s, sw in zip(strips, self.strip_widths) if sw == e.strip_width)
            if not (strip.col0 <= e.inside.col0 and e.inside.col1 <= strip.col1):
                v.append(f"ROI edge_inside[{e.strip_width}] leaves its strip")
        return v

    def validate(self) -> "PhantomLayout":
        v = self.violations()
        if v:
            raise LayoutError(v)
        return self


def feature_mask(layout: PhantomLayout) -> np.ndarray:
    mask = np.zeros((layout.height, layout.width), dtype=bool)
    for s in layout.strips:
        mask[s.slices] = True
    for r, c in layout.points:
        mask[r, c] = True
    return mask


def build_phantom(layout: PhantomLayout) -> np.ndarray:
    """Truth image: background_mean everywhere, contrast_ratio * background_mean on features."""
    layout.validate()
    img = np.full((layout.height, layout.width), float(layout.background_mean))
    img[feature_mask(layout)] = layout.foreground_mean
    return img


@dataclass(frozen=True)
class Situation:
    id: int
    background: dist.ReturnModel
    foreground: dist.ReturnModel

    @classmethod
    def from_table(cls, sid: int, layout: PhantomLayout, looks: float = 1.0) -> "Situation":
        """Situation 0 is speckle on the constant phantom; 1-6 are G0 rows with gamma scaled on features."""
        ratio = layout.contrast_ratio
        if sid == 0:
            return cls(0, dist.ConstantGamma(layout.background_mean, looks),
                       dist.ConstantGamma(layout.foreground_mean, looks))
        if sid not in TABLE1:
            raise ValueError(f"unknown situation {sid}; expected 0..6")
        alpha, gamma = TABLE1[sid]
        return cls(sid, dist.G0(alpha, gamma, looks), dist.G0(alpha, gamma * ratio, looks))

    @property
    def background_mean(self) -> float:
        return self.background.mean


def situation_truth(layout: PhantomLayout, situation: Situation) -> np.ndarray:
    """Phantom whose background mean is the situation's background mean."""
    return build_phantom(dataclasses.replace(layout, background_mean=situation.background_mean))


def corrupt(layout: PhantomLayout, situation: Situation, rng: np.random.Generator) -> np.ndarray:
    """Independent draws per pixel: background model off-feature, foreground model on features.

    The background is drawn first so a different foreground model leaves the
    background pixels unchanged for the same seed.
    """
    mask = feature_mask(layout.validate())
    img = np.empty(mask.shape)
    img[~mask] = dist.sample(rng, situation.background, int((~mask).sum()))
    img[mask] = dist.sample(rng, situation.foreground, int(mask.sum()))
    return img


def _ints(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def layout_to_dict(layout: PhantomLayout) -> dict:
    return {
        "width": layout.width,
        "height": layout.height,
        "background_mean": repr(float(layout.background_mean)),
        "contrast_ratio": repr(float(layout.contrast_ratio)),
        "strip_widths": ",".join(map(str, layout.strip_widths)),
        "strip_columns": ",".join(map(str, layout.strip_columns)),
        "strip_rows": ",".join(map(str, layout.strip_rows)),
        "points": ",".join(f"{r}:{c}" for r, c in layout.points),
        "homogeneous_block": str(layout.homogeneous_block),
        "band_width": layout.band_width,
        "band_offset": layout.band_offset,
        "edge_min_width": layout.edge_min_width,
    }


def layout_from_dict(d: dict) -> PhantomLayout:
    known = set(layout_to_dict(PhantomLayout()))
    unknown = set(d) - known
    if unknown:
        raise LayoutError([f"unknown layout key {k!r}" for k in sorted(unknown)])
    kw = {}
    try:
        for k in ("width", "height", "band_width", "band_offset", "edge_min_width"):
            if k in d:
                kw[k] = int(d[k])
        for k in ("background_mean", "contrast_ratio"):
            if k in d:
                kw[k] = float(d[k])
        for k in ("strip_widths", "strip_columns", "strip_rows"):
            if k in d:
                kw[k] = _ints(d[k])
        if "points" in d:
            kw["points"] = tuple(tuple(int(x) for x in p.split(":")) for p in d["points"].split(",") if p.strip())
        if "homogeneous_block" in d:
            kw["homogeneous_block"] = Rect(*_ints(d["homogeneous_block"]))
    except (ValueError, TypeError) as e:
        raise LayoutError([f"malformed layout value: {e}"]) from e
    return PhantomLayout(**kw)


def load_layout(path) -> PhantomLayout:
    return layout_from_dict(read_keyvalue(path)).validate()


def save_layout(layout: PhantomLayout, path) -> None:
    write_keyvalue(path, layout_to_dict(layout))
