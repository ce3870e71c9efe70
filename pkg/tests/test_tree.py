import math
from fractions import Fraction

import numpy as np
import pytest

from imbtrees import (DegenerateInput, InvalidParameter, SamplingPlan,
                      TreeSettings, UnknownLevel, Unstratified, evaluate_triple,
                      fit_ctree, generate_synthetic, leaf_frequencies, predict,
                      to_text, undersample)
from imbtrees.sampling import FEASIBLE, TrainingSet
from imbtrees.tree import Internal, Leaf

from conftest import make_dataset, reference_dataset

EXACT_P = Fraction(4252, 184756)  # two-sided hypergeometric tail, |c_A - 5| >= 3


def full_training(d, seed=0):
    plan = SamplingPlan(1.0, 1.0, Unstratified(), seed=seed)
    return TrainingSet(d, np.arange(d.n_rows, dtype=np.int64), plan, 0, 0, FEASIBLE)


def spec_example_dataset():
    # level A: 8 small / 2 large; level B: 2 small / 8 large
    cols = {"g": ["A"] * 8 + ["B"] * 2 + ["A"] * 2 + ["B"] * 8}
    y = ["s"] * 10 + ["l"] * 10
    return make_dataset(cols, y, levels={"g": ("A", "B")})


def test_categorical_split_exact_pvalue():
    d = spec_example_dataset()
    settings = TreeSettings(alpha=0.05, min_split=4, min_bucket=2, exact_max_rows=20)
    tree = fit_ctree(full_training(d), settings)
    assert tree.depth() == 1
    assert tree.root.p_adj == float(EXACT_P)  # J=1, enumeration is exact
    assert tree.root.p_adj == pytest.approx(0.023, abs=5e-4)


def test_categorical_split_monte_carlo_close_to_exact():
    d = spec_example_dataset()
    settings = TreeSettings(alpha=0.05, min_split=4, min_bucket=2,
                            exact_max_rows=0, n_perm=9999)
    tree = fit_ctree(full_training(d), settings)
    assert tree.depth() == 1
    assert abs(tree.root.p_adj - float(EXACT_P)) <= 0.02


def test_perfectly_separable_numeric():
    g = np.random.default_rng(3)
    x = np.concatenate([g.uniform(-2, -0.1, 50), g.uniform(0.1, 2, 50)])
    y = ["neg" if v < 0 else "pos" for v in x]
    d = make_dataset({"x": [float(v) for v in x]}, y)
    tree = fit_ctree(full_training(d), TreeSettings(min_split=10, min_bucket=5, n_perm=999))
    assert tree.depth() == 1
    assert isinstance(tree.root, Internal)
    triple = evaluate_triple(tree, d, 0.5)
    assert triple.balanced == 1.0
    # cutpoint is stored as the largest left-side training value
    assert tree.root.cut == float(x[x < 0].max())


def test_constant_predictor_gives_root_leaf():
    d = make_dataset({"x": [1.0] * 30}, ["a"] * 10 + ["b"] * 20)
    tree = fit_ctree(full_training(d), TreeSettings(min_split=5, min_bucket=2))
    assert tree.depth() == 0
    assert isinstance(tree.root, Leaf)
    assert tree.root.freq_small == pytest.approx(10 / 30)


def test_degenerate_one_class():
    d = make_dataset({"x": [float(i) for i in range(30)]}, ["a"] * 10 + ["b"] * 20)
    rows = np.flatnonzero(~d.y_small)
    plan = SamplingPlan(1.0, 1.0, Unstratified(), seed=0)
    ts = TrainingSet(d, rows, plan, 0, 0, FEASIBLE)
    with pytest.raises(DegenerateInput):
        fit_ctree(ts)


def test_infeasible_training_set_rejected():
    d = make_dataset({"x": [float(i) for i in range(30)]}, ["a"] * 10 + ["b"] * 20)
    plan = SamplingPlan(1.0, 1.0, Unstratified(), seed=0)
    ts = TrainingSet(d, np.empty(0, dtype=np.int64), plan, 0, 10, "infeasible")
    with pytest.raises(DegenerateInput):
        fit_ctree(ts)


def _signal_dataset(seed=6, n=240):
    return generate_synthetic(
        n, 0.35,
        signal=[("grp", "categorical", 2.0, ("x", "y", "z")), ("val", "numeric", 1.2)],
        noise_predictors=1, seed=seed,
    )


def test_leaves_partition_training_rows():
    d = _signal_dataset()
    tree = fit_ctree(full_training(d), TreeSettings(min_split=15, min_bucket=6, n_perm=499))
    assert sum(l.n for l in tree.leaves) == tree.n_train
    assert all(l.n >= 6 for l in tree.leaves)
    for l in tree.leaves:
        assert l.freq_small + l.freq_large == 1.0


def test_max_depth_zero_forces_root_tree():
    d = _signal_dataset()
    tree = fit_ctree(full_training(d), TreeSettings(min_split=15, min_bucket=6,
                                                    n_perm=499, max_depth=0))
    assert tree.depth() == 0


def test_fit_deterministic():
    d = _signal_dataset()
    ts = undersample(d, SamplingPlan(0.9, 0.6, Unstratified(), seed=4), 1)
    settings = TreeSettings(min_split=15, min_bucket=6, n_perm=499)
    assert to_text(fit_ctree(ts, settings)) == to_text(fit_ctree(ts, settings))


def test_predict_threshold_rules():
    # leaf with freq_small just below 1/2 flips between thresholds
    cols = {"g": ["A"] * 25 + ["B"] * 25}
    y = (["s"] * 12 + ["l"] * 13) + (["l"] * 25)
    d = make_dataset(cols, y, levels={"g": ("A", "B")})
    tree = fit_ctree(full_training(d), TreeSettings(min_split=5, min_bucket=2,
                                                    exact_max_rows=0, n_perm=999))
    assert tree.depth() == 1
    row = {"g": "A"}
    assert leaf_frequencies(tree, row) == (0.48, 0.52)
    assert predict(tree, row, threshold=0.5) == "l"  # large label is "l"
    assert predict(tree, row, threshold=0.45) == "s"
    assert predict(tree, row, threshold=1.0) == "l"  # only pure leaves at 1.0


def test_predict_tie_at_threshold_goes_small():
    cols = {"g": ["A"] * 20 + ["B"] * 20}
    y = (["s"] * 10 + ["l"] * 10) + (["l"] * 18 + ["s"] * 2)
    d = make_dataset(cols, y, levels={"g": ("A", "B")})
    tree = fit_ctree(full_training(d), TreeSettings(min_split=5, min_bucket=2,
                                                    exact_max_rows=0, n_perm=999))
    assert tree.depth() == 1
    assert leaf_frequencies(tree, {"g": "A"})[0] == 0.5
    assert predict(tree, {"g": "A"}, threshold=0.5) == "s"


def test_predict_unknown_level():
    d = spec_example_dataset()
    tree = fit_ctree(full_training(d), TreeSettings(min_split=4, min_bucket=2,
                                                    exact_max_rows=20))
    with pytest.raises(UnknownLevel):
        predict(tree, {"g": "C"})
    with pytest.raises(InvalidParameter):
        predict(tree, {"g": "A"}, threshold=0.0)


def test_leaf_frequencies_root_tree_paper_counts():
    d = reference_dataset()
    tree = fit_ctree(full_training(d), TreeSettings(max_depth=0))
    fs, fl = leaf_frequencies(tree, {"SEX": "f"})
    assert round(fs, 4) == 0.0859  # 528/6146
    assert round(fl, 4) == 0.9141
    assert (fs, fl) == leaf_frequencies(tree, {"SEX": "f"})


def test_threshold_monotonicity():
    d = _signal_dataset(seed=11)
    ts = undersample(d, SamplingPlan(1.0, 0.5, Unstratified(), seed=2), 0)
    tree = fit_ctree(ts, TreeSettings(min_split=12, min_bucket=5, n_perm=499))
    thresholds = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05]
    triples = [evaluate_triple(tree, d, t) for t in thresholds]
    for prev, cur in zip(triples, triples[1:]):
        # threshold decreases left to right
        assert cur.acc_small >= prev.acc_small
        assert cur.acc_large <= prev.acc_large


def test_unseen_level_routes_to_larger_child():
    # training rows only contain levels a/b; level c exists in the schema
    cols = {"g": ["a"] * 30 + ["b"] * 30 + ["c"] * 1}
    y = ["s"] * 24 + ["l"] * 6 + ["l"] * 30 + ["l"] * 1
    d = make_dataset(cols, y, levels={"g": ("a", "b", "c")})
    rows = np.flatnonzero(d.encoded_column("g") != 2)
    plan = SamplingPlan(1.0, 1.0, Unstratified(), seed=0)
    ts = TrainingSet(d, rows, plan, 0, 0, FEASIBLE)
    tree = fit_ctree(ts, TreeSettings(min_split=6, min_bucket=3, exact_max_rows=0,
                                      n_perm=999))
    assert tree.depth() == 1
    # both children have 30 rows: tie routes the unseen level left
    assert 2 in tree.root.left_levels
    freqs = tree.freq_small_dataset(d)
    left_leaf = tree.root.left
    assert freqs[-1] == left_leaf.freq_small


def test_serialization_golden():
    d = generate_synthetic(
        120, 0.4,
        signal=[("grp", "categorical", 2.2, ("x", "y", "z")), ("val", "numeric", 1.4)],
        noise_predictors=1, seed=2024,
    )
    ts = undersample(d, SamplingPlan(1.0, 0.8, Unstratified(), seed=77), 2)
    tree = fit_ctree(ts, TreeSettings(min_split=12, min_bucket=5, n_perm=999))
    assert to_text(tree) == (
        "tree v1\n"
        "trained n=103 classes=minor/major\n"
        "cell psmall=1.0 plarge=0.8 mode=unstrat rep=2 retry=0\n"
        "settings alpha=0.05 min_split=12 min_bucket=5 n_perm=999\n"
        "node[0] val <= 0.03498128429733757 n=103 p_adj=0.003 stat=26.845332646034485\n"
        "  leaf[1] n=43 n_small=2 freq_small=0.046511627906976744\n"
        "  leaf[2] n=60 n_small=32 freq_small=0.5333333333333333\n"
    )


def test_root_only_on_independent_data():
    # statistical property: at alpha=0.05 with Bonferroni, splits on
    # class-independent data are rare; frozen seeds make this exact
    root_only = 0
    for run in range(100):
        d = generate_synthetic(
            80, 0.5,
            signal=[("a", "numeric", 0.0), ("b", "categorical", 0.0, ("u", "v", "w")),
                    ("c", "numeric", 0.0)],
            seed=1000 + run,
        )
        ts = undersample(d, SamplingPlan(1.0, 1.0, Unstratified(), seed=run), 0)
        tree = fit_ctree(ts, TreeSettings(alpha=0.05, min_split=10, min_bucket=4,
                                          n_perm=499))
        if tree.depth() == 0:
            root_only += 1
    assert root_only >= 85  # >= 90% with +/- 5 tolerance


def test_exact_enumeration_used_below_threshold():
    # a 10-row node with exact_max_rows=10: p-value must be a multiple of
    # 1/C(10, s) (enumeration), not of 1/(n_perm+1)
    cols = {"g": ["A"] * 5 + ["B"] * 5}
    y = ["s"] * 4 + ["l"] + ["l"] * 4 + ["s"]
    d = make_dataset(cols, y, levels={"g": ("A", "B")})
    tree = fit_ctree(full_training(d), TreeSettings(alpha=0.9999, min_split=4,
                                                    min_bucket=2, exact_max_rows=10,
                                                    n_perm=7))
    assert isinstance(tree.root, Internal)
    p = tree.root.p_adj  # J == 1
    assert p == pytest.approx(round(p * math.comb(10, 5)) / math.comb(10, 5), abs=1e-12)


def test_pure_leaf_frequencies():
    g = np.random.default_rng(3)
    x = np.concatenate([g.uniform(-2, -0.1, 50), g.uniform(0.1, 2, 50)])
    y = ["neg" if v < 0 else "pos" for v in x]
    d = make_dataset({"x": [float(v) for v in x]}, y)
    tree = fit_ctree(full_training(d), TreeSettings(min_split=10, min_bucket=5, n_perm=999))
    fs, fl = leaf_frequencies(tree, {"x": -1.0})
    assert (fs, fl) in ((1.0, 0.0), (0.0, 1.0))
    assert leaf_frequencies(tree, {"x": 1.0}) == (1.0 - fs, 1.0 - fl)
