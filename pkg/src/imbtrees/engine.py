"""Grid orchestration: repeated undersampling, interpretability filtering,
balanced-accuracy selection, ensembling and threshold sweeps.

Every grid cell is an independent work unit seeded by
substream(master_seed, cell, index), so results are identical across runs
and across any parallel schedule.  Model selection always scores balanced
accuracy on the full sample at threshold 0.5; the threshold lists only
affect the reported sweeps, never which trees are kept.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import rng
from .data import CATEGORICAL, NUMERIC, Dataset
from .errors import InvalidParameter, LengthMismatch, MissingClass
from .sampling import (FEASIBLE, INFEASIBLE, Mode, SamplingPlan, TrainingSet,
                       Unstratified, draw)
from .tree import Leaf, Tree, TreeSettings, fit_ctree

__all__ = [
    "AccuracyTriple", "balanced_accuracy", "CatCondition", "NumCondition",
    "ForbiddenPattern", "is_interpretable", "GridSpec", "ScoredTree",
    "EnsembleModel", "ensemble_predict", "CellResult", "run_cell", "run_grid",
    "threshold_sweep", "evaluate_triple", "best_grid_tree",
    "fit_full_sample_tree", "pooled_trees",
]


@dataclass(frozen=True)
class AccuracyTriple:
    acc_small: float
    acc_large: float
    balanced: float

    @staticmethod
    def from_masks(pred_small: np.ndarray, truth_small: np.ndarray) -> "AccuracyTriple":
        ns = int(np.count_nonzero(truth_small))
        nl = int(truth_small.shape[0]) - ns
        if ns == 0 or nl == 0:
            raise MissingClass("truth does not contain both classes")
        acc_s = int(np.count_nonzero(pred_small & truth_small)) / ns
        acc_l = int(np.count_nonzero(~pred_small & ~truth_small)) / nl
        return AccuracyTriple(acc_s, acc_l, (acc_s + acc_l) / 2.0)


ZERO_TRIPLE = AccuracyTriple(0.0, 0.0, 0.0)


def balanced_accuracy(predictions: Sequence, truth: Sequence,
                      labels: Optional[tuple[str, str]] = None) -> AccuracyTriple:
    """Per-class accuracies and their mean.

    labels is (small_label, large_label); when omitted it is derived from
    the truth counts (ascending, lexicographic tie-break), mirroring the
    dataset convention.
    """
    if len(predictions) != len(truth):
        raise LengthMismatch(
            f"{len(predictions)} predictions for {len(truth)} truth values"
        )
    if labels is None:
        distinct = sorted(set(truth))
        if len(distinct) != 2:
            raise MissingClass("truth does not contain exactly two classes")
        counts = {v: 0 for v in distinct}
        for v in truth:
            counts[v] += 1
        a, b = distinct
        labels = (a, b) if counts[a] <= counts[b] else (b, a)
    small, large = labels
    bad = set(truth) - {small, large}
    if bad:
        raise InvalidParameter(f"truth contains labels outside {labels}: {sorted(bad)}")
    truth_small = np.fromiter((v == small for v in truth), dtype=bool, count=len(truth))
    pred_small = np.fromiter((v == small for v in predictions), dtype=bool,
                             count=len(predictions))
    return AccuracyTriple.from_masks(pred_small, truth_small)


# Interpretability filtering -------------------------------------------------

@dataclass(frozen=True)
class CatCondition:
    predictor: str
    levels: frozenset

    def __post_init__(self):
        object.__setattr__(self, "levels", frozenset(self.levels))


@dataclass(frozen=True)
class NumCondition:
    predictor: str
    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if self.lo > self.hi:
            raise InvalidParameter(f"{self.predictor}: empty interval [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class ForbiddenPattern:
    """Conjunction of per-predictor conditions a tree path must never imply."""

    conditions: tuple

    def __post_init__(self):
        object.__setattr__(self, "conditions", tuple(self.conditions))
        if not self.conditions:
            raise InvalidParameter("a forbidden pattern needs at least one condition")


def _num_implies(bounds: Optional[tuple[float, float]], cond: NumCondition) -> bool:
    # path intervals are (lo, hi]: lo from "x > c" edges, hi from "x <= c"
    plo, phi = bounds if bounds is not None else (-math.inf, math.inf)
    if cond.lo != -math.inf and not plo >= cond.lo:
        return False
    if cond.hi != math.inf:
        if cond.hi_closed:
            if not phi <= cond.hi:
                return False
        elif not phi < cond.hi:
            return False
    return True


def is_interpretable(tree: Tree, patterns: Sequence[ForbiddenPattern]) -> bool:
    """True unless some root-to-leaf path implies some forbidden conjunction."""
    if not patterns:
        return True
    spec_by_name = {p.name: p for p in tree.schema}

    def violated(cat_allowed: dict, num_bounds: dict) -> bool:
        for pat in patterns:
            ok = True
            for cond in pat.conditions:
                spec = spec_by_name.get(cond.predictor)
                if isinstance(cond, CatCondition):
                    if spec is None or spec.kind != CATEGORICAL:
                        ok = False
                        break
                    level_codes = frozenset(
                        spec.levels.index(l) for l in cond.levels if l in spec.levels
                    )
                    region = cat_allowed.get(cond.predictor)
                    if region is None:
                        region = frozenset(range(len(spec.levels)))
                    if not region <= level_codes:
                        ok = False
                        break
                else:
                    if spec is None or spec.kind != NUMERIC:
                        ok = False
                        break
                    if not _num_implies(num_bounds.get(cond.predictor), cond):
                        ok = False
                        break
            if ok:
                return True
        return False

    def walk(node, cat_allowed: dict, num_bounds: dict) -> bool:
        """True if an offending root-to-leaf path exists under `node`."""
        if isinstance(node, Leaf):
            return violated(cat_allowed, num_bounds)
        name = node.pred_name
        if node.kind == CATEGORICAL:
            spec = tree.schema[node.pred_index]
            current = cat_allowed.get(name, frozenset(range(len(spec.levels))))
            right_levels = frozenset(range(len(spec.levels))) - node.left_levels
            for child, region in ((node.left, node.left_levels),
                                  (node.right, right_levels)):
                if walk(child, cat_allowed | {name: current & region}, num_bounds):
                    return True
            return False
        plo, phi = num_bounds.get(name, (-math.inf, math.inf))
        for child, bounds in ((node.left, (plo, min(phi, node.cut))),
                              (node.right, (max(plo, node.cut), phi))):
            if walk(child, cat_allowed, num_bounds | {name: bounds}):
                return True
        return False

    return not walk(tree.root, {}, {})


# Ensembles -------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleModel:
    """Ordered trees combined by averaging leaf small-class frequencies."""

    members: tuple[Tree, ...]
    threshold: float = 0.5

    def __post_init__(self):
        if not self.members:
            raise InvalidParameter("an ensemble needs at least one member")
        if not (0.0 < self.threshold <= 1.0):
            raise InvalidParameter(f"threshold={self.threshold}: must be in (0, 1]")

    def freq_small_dataset(self, d: Dataset) -> np.ndarray:
        acc = np.zeros(d.n_rows, dtype=np.float64)
        for t in self.members:
            acc += t.freq_small_dataset(d)
        return acc / len(self.members)


def ensemble_predict(e: EnsembleModel, row) -> str:
    """Average the members' leaf freq_small; small iff mean >= e.threshold."""
    from .tree import leaf_frequencies
    total = 0.0
    for t in e.members:
        total += leaf_frequencies(t, row)[0]
    mean = total / len(e.members)
    small, large = e.members[0].class_labels
    return small if mean >= e.threshold else large


# Grid ------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    psmall_values: tuple[float, ...]
    plarge_values: tuple[float, ...]
    repetitions: int = 100
    k_best: int = 3
    mode: Mode = Unstratified()
    thresholds: tuple[float, ...] = (0.5,)
    patterns: tuple[ForbiddenPattern, ...] = ()
    master_seed: int = 0
    tree_settings: TreeSettings = TreeSettings()

    def __post_init__(self):
        object.__setattr__(self, "psmall_values", tuple(self.psmall_values))
        object.__setattr__(self, "plarge_values", tuple(self.plarge_values))
        object.__setattr__(self, "thresholds", tuple(self.thresholds))
        object.__setattr__(self, "patterns", tuple(self.patterns))
        if not self.psmall_values or not self.plarge_values:
            raise InvalidParameter("psmall/plarge value lists must be nonempty")
        if self.k_best < 1:
            raise InvalidParameter("k_best must be >= 1")
        if self.repetitions < self.k_best:
            raise InvalidParameter("repetitions must be >= k_best")
        if not self.thresholds:
            raise InvalidParameter("thresholds must be nonempty")
        for t in self.thresholds:
            if not (0.0 < t <= 1.0):
                raise InvalidParameter(f"threshold {t}: must be in (0, 1]")

    def cells(self) -> list[tuple[int, float, float]]:
        """(cell_index, psmall, plarge) in report order: psmall outer."""
        out = []
        i = 0
        for ps in self.psmall_values:
            for pl in self.plarge_values:
                out.append((i, ps, pl))
                i += 1
        return out


@dataclass(frozen=True)
class ScoredTree:
    tree: Tree
    triple: AccuracyTriple
    rep: int


@dataclass(frozen=True)
class CellResult:
    cell_index: int
    psmall: float
    plarge: float
    mode_tag: str
    status: str                       # feasible | infeasible
    n_repetitions: int
    n_infeasible_reps: int
    n_filtered: int
    kept: tuple[ScoredTree, ...]      # k_best best, balanced desc, rep asc
    ensemble: Optional[EnsembleModel]
    ensemble_triple: Optional[AccuracyTriple]
    best_sweep: tuple[AccuracyTriple, ...]
    ensemble_sweep: tuple[AccuracyTriple, ...]
    no_interpretable: bool = False

    @property
    def best(self) -> Optional[ScoredTree]:
        return self.kept[0] if self.kept else None

    @property
    def best_triple(self) -> Optional[AccuracyTriple]:
        return self.kept[0].triple if self.kept else None


def _model_freqs(model: Union[Tree, EnsembleModel], d: Dataset) -> np.ndarray:
    return model.freq_small_dataset(d)


def evaluate_triple(model: Union[Tree, EnsembleModel], d: Dataset,
                    threshold: float = 0.5) -> AccuracyTriple:
    """Balanced accuracy of a model on the full dataset at one threshold."""
    freqs = _model_freqs(model, d)
    return AccuracyTriple.from_masks(freqs >= threshold, d.y_small)


def threshold_sweep(model: Union[Tree, EnsembleModel], d: Dataset,
                    thresholds: Sequence[float]) -> tuple[AccuracyTriple, ...]:
    """One accuracy triple per threshold, evaluated on the full dataset."""
    if not thresholds:
        raise InvalidParameter("thresholds must be nonempty")
    for t in thresholds:
        if not (0.0 < t <= 1.0):
            raise InvalidParameter(f"threshold {t}: must be in (0, 1]")
    freqs = _model_freqs(model, d)
    return tuple(
        AccuracyTriple.from_masks(freqs >= t, d.y_small) for t in thresholds
    )


def run_cell(d: Dataset, psmall: float, plarge: float, cell_index: int,
             grid: GridSpec) -> CellResult:
    """Run one grid cell: repeat sampling, fit, filter, keep the k best."""
    plan = SamplingPlan(
        psmall=psmall, plarge=plarge, mode=grid.mode,
        seed=rng.substream(grid.master_seed, rng.TAG_CELL, cell_index),
    )
    kept: list[ScoredTree] = []
    n_infeasible = 0
    n_filtered = 0
    for rep in range(grid.repetitions):
        ts = draw(d, plan, rep)
        if ts.status == INFEASIBLE:
            n_infeasible += 1
            continue
        tree = fit_ctree(ts, grid.tree_settings)
        if not is_interpretable(tree, grid.patterns):
            n_filtered += 1
            continue
        triple = evaluate_triple(tree, d, 0.5)
        kept.append(ScoredTree(tree, triple, rep))
        # balanced desc, repetition asc; stable sort keeps earlier reps first
        kept.sort(key=lambda s: (-s.triple.balanced, s.rep))
        del kept[grid.k_best:]

    if n_infeasible == grid.repetitions:
        return CellResult(
            cell_index, psmall, plarge, grid.mode.tag, INFEASIBLE,
            grid.repetitions, n_infeasible, 0, (), None, None, (), (),
        )
    if not kept:
        return CellResult(
            cell_index, psmall, plarge, grid.mode.tag, FEASIBLE,
            grid.repetitions, n_infeasible, n_filtered, (), None, None, (), (),
            no_interpretable=True,
        )
    ensemble = EnsembleModel(tuple(s.tree for s in kept), threshold=0.5)
    return CellResult(
        cell_index, psmall, plarge, grid.mode.tag, FEASIBLE,
        grid.repetitions, n_infeasible, n_filtered, tuple(kept),
        ensemble, evaluate_triple(ensemble, d, 0.5),
        threshold_sweep(kept[0].tree, d, grid.thresholds),
        threshold_sweep(ensemble, d, grid.thresholds),
    )


def run_grid(d: Dataset, grid: GridSpec, threads: int = 1) -> list[CellResult]:
    """All cells in report order.  Cells are independent; any thread count
    yields identical results."""
    cells = grid.cells()
    if threads <= 1:
        return [run_cell(d, ps, pl, i, grid) for i, ps, pl in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(run_cell, d, ps, pl, i, grid) for i, ps, pl in cells]
        return [f.result() for f in futs]


def best_grid_tree(results: Sequence[CellResult]) -> Optional[ScoredTree]:
    """Best tree across the grid: balanced accuracy at 0.5, ties resolved by
    cell order then repetition (strict > while scanning)."""
    best = None
    for res in results:
        if res.best is not None:
            if best is None or res.best.triple.balanced > best.triple.balanced:
                best = res.best
    return best


def fit_full_sample_tree(d: Dataset, grid: GridSpec) -> Tree:
    """Tree fit on all observations (psmall = plarge = 1, no resampling)."""
    plan = SamplingPlan(1.0, 1.0, Unstratified(),
                        seed=rng.substream(grid.master_seed, rng.TAG_FULL_FIT))
    ts = TrainingSet(d, np.arange(d.n_rows, dtype=np.int64), plan, 0, 0, FEASIBLE)
    return fit_ctree(ts, grid.tree_settings)


def pooled_trees(results: Sequence[CellResult], k_best: int) -> tuple[list[Tree], int]:
    """All kept trees in cell order plus the zero-fill count for importance:
    infeasible cells contribute k_best zero losses each."""
    trees: list[Tree] = []
    zero_fill = 0
    for res in results:
        if res.status == INFEASIBLE:
            zero_fill += k_best
        else:
            trees.extend(s.tree for s in res.kept)
    return trees, zero_fill
