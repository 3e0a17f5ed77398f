import numpy as np
import pytest

from specklekit.distributions import make_rng
from specklekit.estimation import DegenerateSampleError
from specklekit.filters import FilterSpec, Method, apply_filter
from specklekit.metrics import (HIGHER_IS_BETTER, METRICS, MetricRecord, assess, better, line_contrast,
                                metric_edge, metric_enl, metric_line)
from specklekit.phantom import PhantomLayout, Rect, Situation, build_phantom, corrupt, situation_truth

from conftest import TEST_SEED


@pytest.fixture
def layout():
    return PhantomLayout()


@pytest.fixture
def truth(layout):
    return build_phantom(layout)


def test_enl_on_unfiltered_situation0(layout):
    z = corrupt(layout, Situation.from_table(0, layout, 4), make_rng(TEST_SEED))
    assert metric_enl(z, layout.homogeneous_block) == pytest.approx(4, abs=0.2)


def test_enl_scale_invariant(layout):
    z = corrupt(layout, Situation.from_table(0, layout, 1), make_rng(TEST_SEED))
    assert metric_enl(4 * z, layout.homogeneous_block) == metric_enl(z, layout.homogeneous_block)
    assert metric_enl(3.3 * z, layout.homogeneous_block) == pytest.approx(
        metric_enl(z, layout.homogeneous_block), rel=1e-12)


def test_lee_raises_enl_on_situation0(layout):
    z = corrupt(layout, Situation.from_table(0, layout, 1), make_rng(TEST_SEED))
    out = apply_filter(z, FilterSpec(Method.LEE, 7, 1))
    assert metric_enl(out, layout.homogeneous_block) > 10


def test_truth_line_contrast(layout, truth):
    r = layout.rois()
    assert line_contrast(truth, r.line, r.line_left, r.line_right) == 1610
    assert metric_line(truth, r.line, r.line_left, r.line_right, 1610) == 0


def test_line_smoothed_away(layout, truth):
    r = layout.rois()
    blurred = truth.copy()
    blurred[r.line.slices] = 230
    assert metric_line(blurred, r.line, r.line_left, r.line_right, 1610) == 1380


def test_edge_on_truth(layout, truth):
    e = layout.rois().primary_edge
    assert metric_edge(truth, e.inside, e.outside) == (690.0, 0.0)


def test_edge_identical_bands():
    img = make_rng(1).gamma(1, 1, (10, 10))
    r = Rect(0, 10, 2, 5)
    assert metric_edge(img, r, r) == (0.0, 0.0)


def test_empty_roi_errors():
    with pytest.raises(ValueError):
        metric_edge(np.ones((5, 5)), Rect(0, 0, 0, 1), Rect(0, 5, 0, 1))


def test_assess_truth(layout, truth):
    rec = assess(truth, layout, truth)
    assert rec.line_preservation == 0 and rec.edge_variance == 0 and rec.edge_gradient == 690
    assert rec.enl == float("inf")


def test_metric_enl_constant_block_errors(layout, truth):
    with pytest.raises(DegenerateSampleError):
        metric_enl(truth, layout.homogeneous_block)
    with pytest.raises(DegenerateSampleError):
        assess(np.zeros_like(truth), layout, truth)


def test_assess_deterministic(layout):
    s = Situation.from_table(1, layout, 1)
    z = corrupt(layout, s, make_rng(TEST_SEED))
    f = apply_filter(z, FilterSpec(Method.LEE))
    t = situation_truth(layout, s)
    assert assess(f, layout, t) == assess(f.copy(), layout, t)


def test_assess_regression_fixture(layout):
    """Seeded Situation 1, Lee 7x7, L=1: frozen after the first verified run."""
    s = Situation.from_table(1, layout, 1)
    z = corrupt(layout, s, make_rng(TEST_SEED))
    rec = assess(apply_filter(z, FilterSpec(Method.LEE, 7, 1)), layout, situation_truth(layout, s))
    assert rec.as_tuple() == pytest.approx(FROZEN_SITUATION1_LEE, rel=1e-12)


def test_metrics_ignore_pixels_outside_rois(layout):
    s = Situation.from_table(2, layout, 1)
    z = corrupt(layout, s, make_rng(TEST_SEED))
    t = situation_truth(layout, s)
    rois = layout.rois()
    outside = np.ones(z.shape, dtype=bool)
    for r in (rois.homogeneous_block, rois.line, rois.line_left, rois.line_right,
              rois.primary_edge.inside, rois.primary_edge.outside):
        outside[r.slices] = False
    z2 = z.copy()
    z2[outside] = 1e6
    assert assess(z, layout, t) == assess(z2, layout, t)


def test_all_edges_averages(layout, truth):
    img = truth.copy()
    img[layout.homogeneous_block.slices] += make_rng(0).normal(0, 1, img[layout.homogeneous_block.slices].shape)
    rec = assess(img, layout, truth, all_edges=True)
    assert rec.edge_gradient == 690 and rec.edge_variance == 0


def test_direction_of_merit():
    assert HIGHER_IS_BETTER == {"enl"}
    assert better("enl", 30, 20) and not better("enl", 20, 30)
    for m in METRICS[1:]:
        assert better(m, 1, 2) and not better(m, 2, 1)


def test_record_nonnegative(layout):
    for sid in range(7):
        s = Situation.from_table(sid, layout, 1)
        z = corrupt(layout, s, make_rng(TEST_SEED + sid))
        rec = assess(z, layout, situation_truth(layout, s))
        assert rec.enl > 0 and min(rec.as_tuple()[1:]) >= 0 and np.all(np.isfinite(rec.as_tuple()))


FROZEN_SITUATION1_LEE = (0.3069292652558997, 791.1735947836427, 586.1680045972323, 730775.7931182422)
