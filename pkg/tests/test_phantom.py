import dataclasses

import numpy as np
import pytest

from specklekit.distributions import G0, ConstantGamma, make_rng
from specklekit.phantom import (TABLE1, LayoutError, PhantomLayout, Rect, Situation, build_phantom, corrupt,
                                feature_mask, layout_from_dict, layout_to_dict, load_layout, save_layout,
                                situation_truth)

from conftest import TEST_SEED


@pytest.fixture
def layout():
    return PhantomLayout().validate()


def test_homogeneous_block_is_background(layout):
    img = build_phantom(layout)
    assert np.all(img[layout.homogeneous_block.slices] == 230)
    assert layout.homogeneous_block.size >= 10_000


def test_widest_strip_is_foreground(layout):
    img = build_phantom(layout)
    s = layout.strips[-1]
    assert s.col1 - s.col0 == 13
    assert np.all(img[s.slices] == 920)


def test_phantom_is_binary(layout):
    assert set(np.unique(build_phantom(layout))) == {230.0, 920.0}


def test_strip_geometry(layout):
    img = build_phantom(layout)
    row = img[100]
    runs = np.diff(np.flatnonzero(np.diff(np.concatenate([[0], row == 920, [0]]))))[::2]
    assert list(runs) == [1, 3, 5, 7, 9, 11, 13]
    for r, c in layout.points:
        assert img[r, c] == 920
        neighbours = img[r - 1:r + 2, c - 1:c + 2].copy()
        neighbours[1, 1] = 230
        assert np.all(neighbours == 230)


def test_roi_registry(layout):
    rois = layout.rois()
    mask = feature_mask(layout)
    assert not mask[rois.homogeneous_block.slices].any()
    assert mask[rois.line.slices].all()
    assert rois.line_left.col0 == rois.line.col0 - 1 and rois.line_right.col0 == rois.line.col0 + 1
    assert not mask[rois.line_left.slices].any() and not mask[rois.line_right.slices].any()
    e = rois.primary_edge
    assert e.strip_width == 13
    assert mask[e.inside.slices].all() and not mask[e.outside.slices].any()
    assert (e.inside.col0, e.inside.col1, e.outside.col0, e.outside.col1) == (129, 132, 124, 127)
    assert [p.strip_width for p in rois.edges] == [5, 7, 9, 11, 13]


def test_overlapping_strips_rejected():
    bad = PhantomLayout(strip_columns=(20, 21, 48, 65, 84, 105, 128))
    with pytest.raises(LayoutError) as e:
        bad.validate()
    assert any("overlap" in v for v in e.value.violations)


def test_all_violations_listed():
    bad = PhantomLayout(strip_columns=(20, 33, 48, 65, 84, 105, 250), homogeneous_block=Rect(8, 121, 100, 249),
                        contrast_ratio=0.5)
    with pytest.raises(LayoutError) as e:
        bad.validate()
    assert len(e.value.violations) >= 2


def test_homogeneous_block_touching_feature_rejected():
    with pytest.raises(LayoutError, match="homogeneous_block"):
        PhantomLayout(homogeneous_block=Rect(8, 121, 130, 249)).validate()


def test_layout_round_trip(tmp_path, layout):
    path = tmp_path / "layout.txt"
    save_layout(layout, path)
    assert load_layout(path) == layout
    assert layout_from_dict(layout_to_dict(layout)) == layout
    with pytest.raises(LayoutError):
        layout_from_dict({"widht": "3"})


def test_table1_background_means():
    expected = {1: 230, 2: 50, 3: 230, 4: 50, 5: 230, 6: 50}
    for sid, (alpha, gamma) in TABLE1.items():
        assert gamma / (-alpha - 1) == expected[sid]


def test_situation_models(layout):
    s0 = Situation.from_table(0, layout, 2)
    assert s0.background == ConstantGamma(230, 2) and s0.foreground == ConstantGamma(920, 2)
    s3 = Situation.from_table(3, layout, 1)
    assert s3.background == G0(-4, 690, 1) and s3.foreground == G0(-4, 2760, 1)
    assert s3.foreground.mean == 4 * s3.background.mean
    with pytest.raises(ValueError):
        Situation.from_table(7, layout)


def test_situation_truth_uses_situation_mean(layout):
    truth = situation_truth(layout, Situation.from_table(2, layout))
    assert set(np.unique(truth)) == {50.0, 200.0}


def test_corrupt_background_mean_situation3(layout):
    z = corrupt(layout, Situation.from_table(3, layout, 1), make_rng(TEST_SEED))
    bg = z[~feature_mask(layout)]
    assert bg.size >= 10_000
    se = bg.std(ddof=1) / np.sqrt(bg.size)
    assert abs(bg.mean() - 230) < 4 * se


def test_corrupt_many_looks_approaches_phantom(layout):
    z = corrupt(layout, Situation.from_table(0, layout, 1e4), make_rng(TEST_SEED))
    assert np.max(np.abs(z / build_phantom(layout) - 1)) < 0.05


def test_corrupt_deterministic(layout):
    s = Situation.from_table(5, layout, 1)
    a = corrupt(layout, s, make_rng(42))
    b = corrupt(layout, s, make_rng(42))
    assert a.tobytes() == b.tobytes()


def test_foreground_swap_changes_only_features(layout):
    s = Situation.from_table(4, layout, 1)
    swapped = dataclasses.replace(s, foreground=ConstantGamma(600, 1))
    a = corrupt(layout, s, make_rng(9))
    b = corrupt(layout, swapped, make_rng(9))
    mask = feature_mask(layout)
    assert np.array_equal(a[~mask], b[~mask])
    assert not np.array_equal(a[mask], b[mask])
