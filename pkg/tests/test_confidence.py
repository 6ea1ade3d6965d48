"""Attention fusion, the fixed classification head, and confidence maps."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bevshare.confidence import (
    ConfidenceMap,
    HeadParams,
    afm_fuse,
    generate_confidence,
    mask_features,
    prior_head,
    scaled_dot_attention,
)
from bevshare.grid import FeatureMap

from conftest import make_spec


def _maps(rng, n=3, channels=4, rows=6, cols=5):
    spec = make_spec(rows=rows, cols=cols, half=3.0)
    return [
        FeatureMap(rng.standard_normal((channels, rows, cols)), spec)
        for _ in range(n)
    ], spec


def test_attention_hand_example():
    q = np.array([[1.0, 0.0]])
    k = np.array([[1.0, 0.0], [0.0, 1.0]])
    v = np.array([[1.0, 0.0], [0.0, 1.0]])
    out = scaled_dot_attention(q, k, v)
    # logits are (1/sqrt2, 0); softmax weights follow directly
    e = math.exp(1.0 / math.sqrt(2.0))
    w0 = e / (e + 1.0)
    np.testing.assert_allclose(out, [[w0, 1.0 - w0]], atol=1e-12)


def test_attention_weights_sum_to_one(rng):
    for _ in range(20):
        q = rng.standard_normal((7, 5))
        k = rng.standard_normal((9, 5))
        ones = np.ones((9, 1))
        out = scaled_dot_attention(q, k, ones)
        np.testing.assert_allclose(out, 1.0, atol=1e-9)


def test_attention_key_value_permutation_invariant(rng):
    q = rng.standard_normal((4, 6))
    k = rng.standard_normal((8, 6))
    v = rng.standard_normal((8, 3))
    perm = rng.permutation(8)
    base = scaled_dot_attention(q, k, v)
    shuffled = scaled_dot_attention(q, k[perm], v[perm])
    np.testing.assert_allclose(shuffled, base, atol=1e-9)


def test_attention_shape_validation():
    with pytest.raises(ValueError):
        scaled_dot_attention(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        scaled_dot_attention(np.zeros((2, 3)), np.zeros((4, 3)), np.zeros((5, 2)))
    with pytest.raises(ValueError):
        scaled_dot_attention(np.zeros(3), np.zeros((4, 3)), np.zeros((4, 2)))


def test_afm_fuse_matches_per_cell_attention(rng):
    maps, spec = _maps(rng)
    fused = afm_fuse(maps, ego_idx=1)
    ordered = [maps[1], maps[0], maps[2]]
    for r in range(spec.rows):
        for c in range(spec.cols):
            tokens = np.stack([m.values[:, r, c] for m in ordered])
            want = scaled_dot_attention(tokens[:1], tokens, tokens)[0]
            np.testing.assert_allclose(fused.values[:, r, c], want, atol=1e-12)


def test_afm_fuse_single_map_pass_through(rng):
    maps, _ = _maps(rng, n=1)
    fused = afm_fuse(maps, ego_idx=0)
    assert np.array_equal(fused.values, maps[0].values)


def test_afm_fuse_non_ego_order_irrelevant(rng):
    maps, _ = _maps(rng, n=4)
    a = afm_fuse(maps, ego_idx=0)
    swapped = [maps[0], maps[3], maps[2], maps[1]]
    b = afm_fuse(swapped, ego_idx=0)
    np.testing.assert_allclose(a.values, b.values, atol=1e-9)


def test_afm_fuse_validation(rng):
    maps, _ = _maps(rng)
    with pytest.raises(ValueError):
        afm_fuse([], ego_idx=0)
    with pytest.raises(IndexError):
        afm_fuse(maps, ego_idx=5)
    other_spec = make_spec(rows=6, cols=5, half=9.0)
    mismatched = FeatureMap(np.zeros((4, 6, 5)), other_spec)
    with pytest.raises(ValueError):
        afm_fuse([maps[0], mismatched], ego_idx=0)


def test_evidence_head_margin_formula(rng):
    spec = make_spec(rows=4, cols=4, half=2.0)
    values = rng.standard_normal((3, 4, 4))
    head = HeadParams.evidence_head(3, scale=10.0, bias=-2.0)
    logits = prior_head(FeatureMap(values, spec), head).logits
    np.testing.assert_allclose(logits[0], 0.0, atol=1e-15)
    np.testing.assert_allclose(logits[1], 10.0 * values[0] - 2.0, atol=1e-12)


def test_head_params_validation():
    with pytest.raises(ValueError):
        HeadParams(np.zeros((3, 4)), np.zeros(2))
    with pytest.raises(ValueError):
        HeadParams(np.zeros((2, 4)), np.zeros(3))


def test_generate_confidence_logistic_oracle(rng):
    spec = make_spec(rows=5, cols=6, half=3.0)
    values = rng.standard_normal((2, 5, 6))
    head = HeadParams.evidence_head(2, scale=4.0, bias=0.5)
    conf = generate_confidence(FeatureMap(values, spec), head, t=0.5)
    for r in range(5):
        for c in range(6):
            margin = 4.0 * values[0, r, c] + 0.5
            want = 1.0 / (1.0 + math.exp(-margin))
            assert conf.scores[r, c] == pytest.approx(want, abs=1e-12)
            assert conf.binary[r, c] == (conf.scores[r, c] >= 0.5)


def test_threshold_monotonicity(rng):
    spec = make_spec(rows=8, cols=8, half=4.0)
    values = rng.standard_normal((1, 8, 8))
    head = HeadParams.evidence_head(1, scale=3.0, bias=0.0)
    fm = FeatureMap(values, spec)
    prev = generate_confidence(fm, head, t=0.0).binary
    for t in (0.25, 0.5, 0.75, 1.0):
        cur = generate_confidence(fm, head, t=t).binary
        assert np.all(prev | ~cur)  # cur is a subset of prev
        prev = cur


def test_generate_confidence_threshold_range():
    spec = make_spec(rows=2, cols=2, half=1.0)
    fm = FeatureMap(np.zeros((1, 2, 2)), spec)
    head = HeadParams.evidence_head(1, scale=1.0, bias=0.0)
    with pytest.raises(ValueError):
        generate_confidence(fm, head, t=1.5)


def test_confidence_map_consistency_enforced():
    scores = np.array([[0.2, 0.8]])
    with pytest.raises(ValueError):
        ConfidenceMap(scores=scores, binary=np.array([[True, True]]), threshold=0.5)
    with pytest.raises(ValueError):
        ConfidenceMap(scores=np.array([[1.5, 0.0]]),
                      binary=np.array([[True, False]]), threshold=0.5)


def test_mask_features_zeroes_below_threshold(rng):
    spec = make_spec(rows=4, cols=4, half=2.0)
    values = rng.standard_normal((3, 4, 4))
    scores = rng.uniform(0, 1, size=(4, 4))
    conf = ConfidenceMap(scores=scores, binary=scores >= 0.5, threshold=0.5)
    masked = mask_features(conf, FeatureMap(values, spec))
    kept = conf.binary
    assert np.array_equal(masked.values[:, kept], values[:, kept])
    assert np.all(masked.values[:, ~kept] == 0.0)
