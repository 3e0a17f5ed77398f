"""Monte Carlo extension of Lee's protocol.

One replication corrupts the situation's phantom once, with a seed derived
from (master seed, situation, replication). Every requested filter is then
applied to that same corrupted image and assessed. Results are independent of
execution order and worker count.
"""
from __future__ import annotations

import dataclasses
import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional

import numpy as np

from .distributions import make_rng
from .estimation import estimate_enl
from .filters import Fallback, FilterSpec, Method, apply_filter
from .metrics import METRICS, MetricRecord, assess, better
from .phantom import PhantomLayout, Situation, corrupt, situation_truth

__all__ = [
    "DEFAULT_MASTER_SEED",
    "ExperimentSpec",
    "ReplicationResult",
    "BoxplotSummary",
    "ConflictRow",
    "InsufficientDataError",
    "derive_seed",
    "run_replication",
    "run_experiment",
    "five_number_summary",
    "summarize",
    "conflict_report",
]

log = logging.getLogger(__name__)

DEFAULT_MASTER_SEED = 19940701
_MASK = (1 << 64) - 1


class InsufficientDataError(ValueError):
    pass


def _splitmix64(x: int) -> int:
    """SplitMix64 output function; a bijection on 64-bit integers."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(master: int, situation: int, replication: int) -> int:
    """splitmix64(master + splitmix64(situation << 32 | replication)) mod 2^64.

    A composition of bijections, so it is injective in (situation, replication)
    for a fixed master (replication < 2^32) and injective in the master for a
    fixed coordinate.
    """
    if not (0 <= replication < 1 << 32 and 0 <= situation < 1 << 32):
        raise ValueError("situation and replication must fit in 32 bits")
    key = (situation << 32) | replication
    return _splitmix64((int(master) + _splitmix64(key)) & _MASK)


@dataclass(frozen=True)
class ExperimentSpec:
    situations: tuple = (0, 1, 2, 3, 4, 5, 6)
    filters: tuple = (Method.LEE, Method.MAP_G0, Method.MAP_GH)
    replications: int = 100
    master_seed: int = DEFAULT_MASTER_SEED
    looks: float = 1.0
    window: int = 7
    layout: PhantomLayout = field(default_factory=PhantomLayout)
    contrast_ratio: float = 4.0
    estimate_looks: bool = False
    fallback: Fallback = Fallback.WINDOW_MEAN
    all_edges: bool = False

    def __post_init__(self):
        filters = tuple(Method(f) for f in self.filters)
        # canonical filter order is declaration order of Method
        object.__setattr__(self, "filters", tuple(m for m in Method if m in filters))
        object.__setattr__(self, "situations", tuple(sorted({int(s) for s in self.situations})))
        object.__setattr__(self, "fallback", Fallback(self.fallback))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.filters or not self.situations:
            raise ValueError("need at least one situation and one filter")
        if any(s < 0 or s > 6 for s in self.situations):
            raise ValueError("situations must be in 0..6")
        FilterSpec(Method.LEE, self.window, self.looks)
        self.effective_layout.validate()

    @property
    def effective_layout(self) -> PhantomLayout:
        return dataclasses.replace(self.layout, contrast_ratio=self.contrast_ratio)

    def coordinates(self):
        return [(s, r) for s in self.situations for r in range(self.replications)]


class ReplicationResult(NamedTuple):
    situation: int
    filter: Method
    replication: int
    seed: int
    record: MetricRecord
    image_digest: str = ""

    @property
    def key(self):
        return (self.situation, self.replication, list(Method).index(self.filter))


def run_replication(spec: ExperimentSpec, situation_id: int, replication: int) -> list:
    seed = derive_seed(spec.master_seed, situation_id, replication)
    layout = spec.effective_layout
    situation = Situation.from_table(situation_id, layout, spec.looks)
    truth = situation_truth(layout, situation)
    image = corrupt(layout, situation, make_rng(seed))
    digest = hashlib.sha256(image.tobytes()).hexdigest()
    looks = spec.looks
    if spec.estimate_looks:
        looks = max(1.0, estimate_enl(image[layout.homogeneous_block.slices]))
    out = []
    for method in spec.filters:
        try:
            filtered = apply_filter(image, FilterSpec(method, spec.window, looks, spec.fallback))
            record = assess(filtered, layout, truth, spec.all_edges)
        except Exception as e:
            raise RuntimeError(f"situation {situation_id}, replication {replication}, filter "
                               f"{method.value}: {e}") from e
        out.append(ReplicationResult(situation_id, method, replication, seed, record, digest))
    return out


def _task(args):
    spec, sid, rep = args
    return run_replication(spec, sid, rep)


def run_experiment(spec: ExperimentSpec, workers: int = 1, skip: Iterable = (),
                   on_result: Optional[Callable] = None) -> list:
    """Run every (situation, replication) not in skip; return results in canonical order.

    on_result is called in the parent process with each replication's list of
    results as soon as it completes.
    """
    skip = set(skip)
    tasks = [(spec, s, r) for s, r in spec.coordinates() if (s, r) not in skip]
    results = []

    def collect(batch):
        results.extend(batch)
        if on_result is not None:
            on_result(batch)

    if workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            collect(_task(t))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for batch in pool.map(_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))):
                collect(batch)
    log.info("ran %d replications", len(tasks))
    return sorted(results, key=lambda r: r.key)


# --------------------------------------------------------------------------
# Summaries
# --------------------------------------------------------------------------

class BoxplotSummary(NamedTuple):
    metric: str
    filter: Method
    situation: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    outliers: tuple


def _median(v):
    n = len(v)
    mid = n // 2
    return float(v[mid]) if n % 2 else float((v[mid - 1] + v[mid]) / 2)


def five_number_summary(values):
    """(min, q1, median, q3, max, outliers) with Tukey 1.5 IQR fences.

    Quartiles are medians of the lower and upper halves; for odd n the median
    itself belongs to neither half. min and max are whisker ends, i.e. the
    extreme values inside the fences.
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    if n < 5:
        raise InsufficientDataError(f"need at least 5 values for a boxplot, got {n}")
    half = n // 2
    q1, med, q3 = _median(v[:half]), _median(v), _median(v[n - half:])
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo) & (v <= hi)]
    outliers = tuple(float(x) for x in v[(v < lo) | (v > hi)])
    return min(float(inside.min()), q1), q1, med, q3, max(float(inside.max()), q3), outliers


def _groups(results):
    groups = {}
    for r in sorted(results, key=lambda r: r.key):
        groups.setdefault((r.situation, r.filter), []).append(r)
    return groups


def summarize(results, metrics=METRICS) -> list:
    """One BoxplotSummary per (situation, filter, metric), in canonical order."""
    if isinstance(metrics, str):
        metrics = (metrics,)
    out = []
    for (sid, method), group in _groups(results).items():
        for metric in metrics:
            values = [r.record.get(metric) for r in group]
            out.append(BoxplotSummary(metric, method, sid, *five_number_summary(values)))
    return out


class ConflictRow(NamedTuple):
    situation: int
    metric: str
    win_fraction: dict
    replications: int
    unstable: Optional[bool]

    @property
    def winner(self):
        return max(self.win_fraction, key=self.win_fraction.get)


def conflict_report(results, filters=None, threshold: float = 0.8) -> list:
    """Fraction of replications in which each filter has the best value, per situation and metric.

    Ties share the win equally. A metric is unstable when no filter wins more
    than threshold of the replications; with a single replication stability
    is undefined (None).
    """
    chosen = None if filters is None else {Method(f) for f in filters}
    by_coord = {}
    for r in results:
        if chosen is None or r.filter in chosen:
            by_coord.setdefault((r.situation, r.replication), {})[r.filter] = r.record
    rows = []
    for sid in sorted({s for s, _ in by_coord}):
        reps = [recs for (s, _), recs in sorted(by_coord.items()) if s == sid]
        methods = [m for m in Method if any(m in recs for recs in reps)]
        for metric in METRICS:
            wins = dict.fromkeys(methods, 0.0)
            for recs in reps:
                vals = {m: recs[m].get(metric) for m in methods if m in recs}
                best = [m for m in vals if not any(better(metric, vals[o], vals[m]) for o in vals)]
                for m in best:
                    wins[m] += 1.0 / len(best)
            n = len(reps)
            frac = {m: w / n for m, w in wins.items()}
            unstable = None if n < 2 else max(frac.values()) <= threshold
            rows.append(ConflictRow(sid, metric, frac, n, unstable))
    return rows
