"""Selection strategies against brute-force sort and area oracles."""

from __future__ import annotations

import numpy as np
import pytest

from bevshare.grid import AabbBEV, FeatureMap, GridSpec
from bevshare.selection import (
    PriorMap,
    SelectionMatrix,
    build_prior_map,
    budget_select,
    gtfs_features,
    topk_select,
)

from conftest import make_spec


def _tied_scores(rng, rows=16, cols=16):
    # quantized scores force plenty of ties so the tie rule is exercised
    return rng.integers(0, 5, size=(rows, cols)) / 4.0


def _oracle_topk(scores, k):
    flat = scores.ravel()
    order = sorted(range(flat.size), key=lambda i: (-flat[i], i))
    mask = np.zeros(flat.size, dtype=bool)
    mask[order[: min(k, flat.size)]] = True
    return mask.reshape(scores.shape)


def test_topk_matches_sort_oracle(rng):
    for _ in range(500):
        scores = _tied_scores(rng)
        k = int(rng.integers(0, scores.size + 1))
        sel = topk_select(scores, k)
        assert np.array_equal(sel.binary, _oracle_topk(scores, k))
        assert sel.count == min(k, scores.size)
        assert sel.strategy == "topk"


def test_topk_edge_cases(rng):
    scores = rng.uniform(size=(4, 4))
    assert topk_select(scores, 0).count == 0
    assert topk_select(scores, 100).count == 16
    with pytest.raises(ValueError):
        topk_select(scores, -1)
    with pytest.raises(ValueError):
        topk_select(scores.ravel(), 2)


def test_topk_tie_rule_prefers_low_row_col():
    scores = np.zeros((3, 3))
    sel = topk_select(scores, 4)
    # all scores equal: selection fills in row-major order
    want = np.array([[1, 1, 1], [1, 0, 0], [0, 0, 0]], dtype=bool)
    assert np.array_equal(sel.binary, want)


def test_budget_select_matches_oracle(rng):
    bpc = 20
    for _ in range(500):
        scores = _tied_scores(rng)
        base = topk_select(scores, int(rng.integers(1, 200)))
        budget = int(rng.integers(0, 4000))
        out = budget_select(base, scores, budget, bpc)
        if base.count * bpc <= budget:
            assert out is base
            continue
        keep = budget // bpc
        flat = scores.ravel()
        chosen = np.nonzero(base.binary.ravel())[0]
        order = sorted(chosen, key=lambda i: (-flat[i], i))
        want = np.zeros(flat.size, dtype=bool)
        want[order[:keep]] = True
        assert np.array_equal(out.binary, want.reshape(scores.shape))
        assert out.count == keep
        assert out.strategy == "budget-trimmed"


def test_budget_select_validation(rng):
    scores = rng.uniform(size=(4, 4))
    sel = topk_select(scores, 5)
    with pytest.raises(ValueError):
        budget_select(sel, scores, -1, 8)
    with pytest.raises(ValueError):
        budget_select(sel, scores, 100, 0)
    with pytest.raises(ValueError):
        budget_select(sel, np.zeros((2, 2)), 10, 8)


def test_selection_matrix_count_enforced():
    mask = np.array([[True, False], [True, True]])
    with pytest.raises(ValueError):
        SelectionMatrix(mask, 2, "topk")
    sel = SelectionMatrix.from_mask(mask, "topk")
    assert sel.count == 3


def _cells(prior):
    return set(zip(*np.nonzero(prior.binary)))


def test_build_prior_map_hand_rectangles():
    spec = GridSpec(rows=10, cols=10, x_min=0.0, x_max=10.0, y_min=0.0, y_max=10.0)
    prior, skipped = build_prior_map([AabbBEV(1.2, 2.2, 3.8, 4.4)], spec)
    assert skipped == 0
    # half-open rows [1, 3), cols [2, 4)
    assert _cells(prior) == {(r, c) for r in (1, 2) for c in (2, 3)}


def test_build_prior_map_thin_box_covers_one_cell():
    spec = GridSpec(rows=10, cols=10, x_min=0.0, x_max=10.0, y_min=0.0, y_max=10.0)
    prior, skipped = build_prior_map([AabbBEV(2.3, 5.1, 2.4, 5.2)], spec)
    assert skipped == 0
    assert _cells(prior) == {(2, 5)}


def test_build_prior_map_clips_and_skips():
    spec = GridSpec(rows=4, cols=4, x_min=0.0, x_max=4.0, y_min=0.0, y_max=4.0)
    boxes = [
        # rows [-2, 1) clip to {0}; cols [1, 2) stay {1}
        AabbBEV(-2.0, 1.5, 1.5, 2.5),
        AabbBEV(10.0, 10.0, 12.0, 12.0),  # fully outside
    ]
    prior, skipped = build_prior_map(boxes, spec)
    assert skipped == 1
    assert _cells(prior) == {(0, 1)}


def test_build_prior_map_area_oracle(rng):
    # cell count of an in-grid box equals its half-open rectangle area
    spec = GridSpec(rows=20, cols=20, x_min=0.0, x_max=20.0, y_min=0.0, y_max=20.0)
    for _ in range(200):
        x1, y1 = rng.uniform(1, 14, size=2)
        x2 = x1 + rng.uniform(0.5, 5)
        y2 = y1 + rng.uniform(0.5, 5)
        prior, skipped = build_prior_map([AabbBEV(x1, y1, x2, y2)], spec)
        rows_covered = max(int(x2) - int(x1), 1)
        cols_covered = max(int(y2) - int(y1), 1)
        assert skipped == 0
        assert int(prior.binary.sum()) == rows_covered * cols_covered


def test_gtfs_features_masks_outside_prior(rng):
    spec = make_spec(rows=6, cols=6, half=3.0)
    values = rng.standard_normal((3, 6, 6))
    mask = np.zeros((6, 6), dtype=bool)
    mask[1:3, 2:5] = True
    out = gtfs_features(PriorMap(mask), FeatureMap(values, spec))
    assert np.array_equal(out.values[:, mask], values[:, mask])
    assert np.all(out.values[:, ~mask] == 0.0)
    with pytest.raises(ValueError):
        gtfs_features(PriorMap(np.zeros((3, 3), dtype=bool)),
                      FeatureMap(values, spec))
