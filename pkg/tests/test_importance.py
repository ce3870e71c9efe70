import itertools

import numpy as np
import pytest

from imbtrees import (InvalidParameter, SamplingPlan, TreeSettings,
                      Unstratified, ensemble_importance, evaluate_triple,
                      fit_ctree, generate_synthetic, normalize_means,
                      permutation_loss, undersample)
from imbtrees.engine import AccuracyTriple

from conftest import hand_tree, make_dataset

TABLE_UNSTRAT_MEANS = {
    "AGE": 0.0658, "LiBa": 0.0549, "ETH": 0.0152,
    "SEX": 0.0047, "MLU": 0.2672, "PRN": 0.3144,
}


def _six_row():
    d = make_dataset({"x": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]},
                     ["s", "s", "l", "l", "l", "l"])
    tree = hand_tree(d, ("num", "x", 1.5, ("leaf", 1.0, 2), ("leaf", 0.0, 4)))
    return d, tree


def test_exhaustive_oracle_six_rows():
    d, tree = _six_row()
    base = evaluate_triple(tree, d, 0.5).balanced
    xs = d.num_vals[:, 0]
    total = 0.0
    for perm in itertools.permutations(range(6)):
        pred_small = xs[list(perm)] <= 1.5
        total += base - AccuracyTriple.from_masks(pred_small, d.y_small).balanced
    exact = total / 720
    assert exact == pytest.approx(0.5)
    mc = permutation_loss(tree, d, "x", seed=0, repeats=2000)
    assert abs(mc - exact) <= 0.02


def test_sampling_oracle_ten_rows():
    d = make_dataset({"x": [float(v) for v in range(10)], "z": [0.1] * 10},
                     ["s"] * 3 + ["l"] * 7)
    tree = hand_tree(d, ("num", "x", 2.5, ("leaf", 1.0, 3), ("leaf", 0.0, 7)))
    base = evaluate_triple(tree, d, 0.5).balanced
    g = np.random.default_rng(99)
    xs = d.num_vals[:, 0]
    total = 0.0
    n_draws = 100_000
    for _ in range(n_draws):
        pred_small = xs[g.permutation(10)] <= 2.5
        total += base - AccuracyTriple.from_masks(pred_small, d.y_small).balanced
    oracle = total / n_draws
    impl = permutation_loss(tree, d, "x", seed=5, repeats=200)
    assert abs(impl - oracle) <= 0.05  # ~3 sigma of a 200-draw mean


def test_unused_predictor_loss_is_exactly_zero():
    d = make_dataset({"x": [float(v) for v in range(10)], "z": [float(v % 3) for v in range(10)]},
                     ["s"] * 3 + ["l"] * 7)
    tree = hand_tree(d, ("num", "x", 2.5, ("leaf", 1.0, 3), ("leaf", 0.0, 7)))
    assert permutation_loss(tree, d, "z", seed=1, repeats=17) == 0.0


def test_constant_predictor_loss_is_exactly_zero():
    d = make_dataset({"x": [float(v) for v in range(10)], "c": [2.5] * 10},
                     ["s"] * 3 + ["l"] * 7)
    tree = hand_tree(d, ("num", "c", 2.5, ("leaf", 1.0, 5), ("leaf", 0.0, 5)))
    # the tree uses c, but permuting a constant column changes nothing
    assert permutation_loss(tree, d, "c", seed=2, repeats=9) == 0.0


def test_loss_deterministic_in_seed():
    d, tree = _six_row()
    a = permutation_loss(tree, d, "x", seed=11, repeats=25)
    b = permutation_loss(tree, d, "x", seed=11, repeats=25)
    c = permutation_loss(tree, d, "x", seed=12, repeats=25)
    assert a == b
    assert abs(a - c) < 0.25  # two seeds differ by Monte Carlo noise only


def test_normalization_reproduces_reported_means():
    norm = normalize_means(TABLE_UNSTRAT_MEANS)
    assert norm["PRN"] == 100.0
    assert norm["MLU"] == pytest.approx(85.0, abs=0.1)
    assert norm["AGE"] == pytest.approx(0.0658 / 0.3144 * 100.0)
    assert norm["SEX"] == pytest.approx(1.5, abs=0.1)


def test_identical_positive_means_all_hundred():
    norm = normalize_means({"a": 0.2, "b": 0.2, "c": 0.2})
    assert set(norm.values()) == {100.0}


def test_normalization_preserves_negative_sign():
    norm = normalize_means({"a": 0.5, "b": -0.1})
    assert norm["a"] == 100.0
    assert norm["b"] == pytest.approx(-20.0)


def test_all_zero_flagged():
    d, _ = _six_row()
    root = hand_tree(d, ("leaf", 1 / 3, 6))
    report = ensemble_importance([root, root], d, seed=0)
    assert report.all_zero
    assert all(e.mean_loss == 0.0 for e in report.entries)
    assert all(e.normalized is None for e in report.entries)


def test_zero_fill_scales_means_not_profile():
    d = generate_synthetic(
        240, 0.3,
        signal=[("sig", "categorical", 2.2, ("a", "b", "c")), ("w", "numeric", 1.2)],
        noise_predictors=1, seed=14,
    )
    settings = TreeSettings(min_split=12, min_bucket=5, n_perm=199)
    trees = [
        fit_ctree(undersample(d, SamplingPlan(1.0, 0.5, Unstratified(), seed=s), 0),
                  settings)
        for s in range(4)
    ]
    plain = ensemble_importance(trees, d, seed=9, zero_fill=0)
    padded = ensemble_importance(trees, d, seed=9, zero_fill=12)
    for name in d.predictor_names:
        assert padded.mean(name) == pytest.approx(plain.mean(name) * 4 / 16, rel=1e-12)
        if plain.normalized(name) is not None:
            assert padded.normalized(name) == pytest.approx(
                plain.normalized(name), rel=1e-12)
    assert padded.zero_fill == 12
    assert padded.tree_count == 4


def test_exactly_one_predictor_at_hundred():
    d = generate_synthetic(
        240, 0.3, signal=[("sig", "categorical", 2.2, ("a", "b", "c"))],
        noise_predictors=2, seed=15,
    )
    settings = TreeSettings(min_split=12, min_bucket=5, n_perm=199)
    trees = [
        fit_ctree(undersample(d, SamplingPlan(1.0, 0.5, Unstratified(), seed=s), 0),
                  settings)
        for s in range(3)
    ]
    report = ensemble_importance(trees, d, seed=21)
    tops = [e for e in report.entries if e.normalized == 100.0]
    assert len(tops) == 1
    assert tops[0].mean_loss == max(e.mean_loss for e in report.entries)


def test_ensemble_importance_validation():
    d, tree = _six_row()
    with pytest.raises(InvalidParameter):
        ensemble_importance([], d, seed=0)
    with pytest.raises(InvalidParameter):
        ensemble_importance([tree], d, seed=0, zero_fill=-1)
    with pytest.raises(InvalidParameter):
        permutation_loss(tree, d, "x", seed=0, repeats=0)
