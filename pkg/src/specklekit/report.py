"""Results/summary CSV files and self-contained SVG boxplot panels."""
from __future__ import annotations

import csv
import io
import math
from html import escape
from pathlib import Path

from .filters import Method
from .io import FormatError, atomic_write_text, format_real
from .metrics import METRICS, MetricRecord
from .montecarlo import ReplicationResult

__all__ = [
    "RESULTS_HEADER",
    "SUMMARY_HEADER",
    "result_row",
    "parse_result_row",
    "results_csv",
    "read_results_csv",
    "summary_csv",
    "conflict_csv",
    "record_csv",
    "boxplot_svg",
]

RESULTS_HEADER = ("situation", "filter", "replication", "seed") + METRICS
SUMMARY_HEADER = ("situation", "filter", "metric", "min", "q1", "median", "q3", "max", "n_outliers")
METRIC_TITLES = {
    "enl": "Equivalent number of looks",
    "line_pres": "Line preservation",
    "edge_gradient": "Edge gradient",
    "edge_variance": "Edge variance",
}


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def result_row(r: ReplicationResult) -> list:
    return [r.situation, r.filter.value, r.replication, r.seed] + [format_real(x) for x in r.record.as_tuple()]


def parse_result_row(row) -> ReplicationResult:
    if len(row) != len(RESULTS_HEADER):
        raise FormatError(f"results row has {len(row)} fields, expected {len(RESULTS_HEADER)}")
    sid, method, rep, seed = int(row[0]), Method(row[1]), int(row[2]), int(row[3])
    return ReplicationResult(sid, method, rep, seed, MetricRecord(*(float(x) for x in row[4:])))


def results_csv(results) -> str:
    return _csv_text(RESULTS_HEADER, [result_row(r) for r in sorted(results, key=lambda r: r.key)])


def read_results_csv(path) -> list:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or tuple(rows[0]) != RESULTS_HEADER:
        raise FormatError(f"{path}: missing results header")
    return [parse_result_row(r) for r in rows[1:]]


def summary_csv(summaries) -> str:
    rows = [[s.situation, s.filter.value, s.metric, *(format_real(x) for x in (s.min, s.q1, s.median, s.q3, s.max)),
             len(s.outliers)] for s in summaries]
    return _csv_text(SUMMARY_HEADER, rows)


def conflict_csv(rows) -> str:
    methods = [m for m in Method if any(m in r.win_fraction for r in rows)]
    header = ["situation", "metric", "replications"] + [f"win_{m.value}" for m in methods] + ["unstable"]
    body = []
    for r in rows:
        flag = "undefined" if r.unstable is None else str(r.unstable).lower()
        body.append([r.situation, r.metric, r.replications]
                    + [format_real(r.win_fraction.get(m, 0.0)) for m in methods] + [flag])
    return _csv_text(header, body)


def record_csv(record: MetricRecord) -> str:
    return _csv_text(METRICS, [[format_real(x) for x in record.as_tuple()]])


def write_text(path, text: str) -> None:
    atomic_write_text(Path(path), text)


# --------------------------------------------------------------------------
# SVG
# --------------------------------------------------------------------------

def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(t)
        t += step
    return ticks


def boxplot_svg(summaries, metric: str) -> str:
    """Horizontal boxplots, one row per (situation, filter), labelled e.g. 'L0', 'G3', 'H6'."""
    rows = sorted((s for s in summaries if s.metric == metric),
                  key=lambda s: (s.situation, list(Method).index(s.filter)))
    if not rows:
        raise ValueError(f"no summaries for metric {metric!r}")
    values = [v for s in rows for v in (s.min, s.max, *s.outliers)]
    ticks = _nice_ticks(min(values), max(values))
    lo, hi = ticks[0], ticks[-1]
    left, right, top, row_h = 60, 30, 40, 18
    width = 640
    plot_w = width - left - right
    height = top + row_h * len(rows) + 40

    def x(v):
        return left + (v - lo) / (hi - lo) * plot_w if hi > lo else left

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">'
           f'{escape(METRIC_TITLES.get(metric, metric))}</text>']
    axis_y = top + row_h * len(rows) + 4
    out.append(f'<line x1="{left}" y1="{axis_y}" x2="{left + plot_w}" y2="{axis_y}" stroke="black"/>')
    for t in ticks:
        out.append(f'<line x1="{x(t):.2f}" y1="{axis_y}" x2="{x(t):.2f}" y2="{axis_y + 4}" stroke="black"/>')
        out.append(f'<text x="{x(t):.2f}" y="{axis_y + 16}" text-anchor="middle">{t:g}</text>')
    for i, s in enumerate(rows):
        cy = top + row_h * i + row_h / 2
        h = row_h * 0.6
        label = f"{s.filter.code}{s.situation}"
        out.append(f'<text x="{left - 8}" y="{cy + 4:.1f}" text-anchor="end">{label}</text>')
        out.append(f'<line x1="{x(s.min):.2f}" y1="{cy:.1f}" x2="{x(s.q1):.2f}" y2="{cy:.1f}" stroke="black"/>')
        out.append(f'<line x1="{x(s.q3):.2f}" y1="{cy:.1f}" x2="{x(s.max):.2f}" y2="{cy:.1f}" stroke="black"/>')
        for v in (s.min, s.max):
            out.append(f'<line x1="{x(v):.2f}" y1="{cy - h / 4:.1f}" x2="{x(v):.2f}" y2="{cy + h / 4:.1f}" '
                       f'stroke="black"/>')
        out.append(f'<rect x="{x(s.q1):.2f}" y="{cy - h / 2:.1f}" width="{max(x(s.q3) - x(s.q1), 0.5):.2f}" '
                   f'height="{h:.1f}" fill="#dde6f0" stroke="black"/>')
        out.append(f'<line x1="{x(s.median):.2f}" y1="{cy - h / 2:.1f}" x2="{x(s.median):.2f}" '
                   f'y2="{cy + h / 2:.1f}" stroke="black" stroke-width="2"/>')
        for v in s.outliers:
            out.append(f'<circle cx="{x(v):.2f}" cy="{cy:.1f}" r="2" fill="none" stroke="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
