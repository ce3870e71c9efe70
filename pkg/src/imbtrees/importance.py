"""Permutation-loss variable importance over tree ensembles.

The loss of a predictor for one tree is the drop in balanced accuracy on
the full sample (threshold 0.5) after the predictor's column is uniformly
permuted.  Losses are averaged over the supplied trees, optionally padded
with zero losses for infeasible grid cells, and normalized so the largest
mean reads 100%.  Losses may be negative (a permutation can accidentally
help); normalization preserves sign and never clamps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import rng
from .data import CATEGORICAL, Dataset
from .engine import AccuracyTriple, evaluate_triple
from .errors import InvalidParameter
from .tree import Tree


@dataclass(frozen=True)
class PredictorImportance:
    name: str
    mean_loss: float
    normalized: Optional[float]  # percent of the largest mean; None if undefined


@dataclass(frozen=True)
class ImportanceReport:
    entries: tuple[PredictorImportance, ...]
    tree_count: int
    zero_fill: int
    all_zero: bool

    def mean(self, name: str) -> float:
        for e in self.entries:
            if e.name == name:
                return e.mean_loss
        raise KeyError(name)

    def normalized(self, name: str) -> Optional[float]:
        for e in self.entries:
            if e.name == name:
                return e.normalized
        raise KeyError(name)


def _permuted_freqs(tree: Tree, d: Dataset, pred_index: int, key: int) -> np.ndarray:
    kind, col = d.columns[d.schema[pred_index].name]
    perm = rng.permutation(key, d.n_rows)
    if kind == CATEGORICAL:
        cat = d.cat_codes.copy()
        cat[:, col] = cat[perm, col]
        return tree.freq_small_batch(cat, d.num_vals)
    num = d.num_vals.copy()
    num[:, col] = num[perm, col]
    return tree.freq_small_batch(d.cat_codes, num)


def permutation_loss(tree: Tree, d: Dataset, predictor: str, seed: int,
                     repeats: int = 1) -> float:
    """Balanced-accuracy drop after permuting one predictor's column.

    One permutation draw by default; `repeats` averages several draws for
    variance reduction.  A predictor the tree never splits on, or a
    constant column, yields exactly 0.0.
    """
    if repeats < 1:
        raise InvalidParameter("repeats must be >= 1")
    pred_index = d.predictor_index(predictor)
    base = evaluate_triple(tree, d, 0.5).balanced
    total = 0.0
    for r in range(repeats):
        key = rng.substream(seed, rng.TAG_DRAW, r)
        freqs = _permuted_freqs(tree, d, pred_index, key)
        permuted = AccuracyTriple.from_masks(freqs >= 0.5, d.y_small).balanced
        total += base - permuted
    return total / repeats


def normalize_means(means: Mapping[str, float]) -> dict[str, Optional[float]]:
    """Each mean as a percentage of the largest one.

    Defined only when the largest mean is positive; otherwise every value
    maps to None (the all-zero / all-negative degenerate cases).
    """
    top = max(means.values(), default=0.0)
    if top <= 0.0:
        return {name: None for name in means}
    return {name: value / top * 100.0 for name, value in means.items()}


def ensemble_importance(trees: Sequence[Tree], d: Dataset, seed: int,
                        zero_fill: int = 0, repeats: int = 1) -> ImportanceReport:
    """Mean permutation losses over `trees` plus `zero_fill` zero losses per
    predictor, normalized by the largest mean."""
    if not trees:
        raise InvalidParameter("ensemble_importance needs at least one tree")
    if zero_fill < 0:
        raise InvalidParameter("zero_fill must be >= 0")
    names = d.predictor_names
    denom = len(trees) + zero_fill
    means: dict[str, float] = {}
    for j, name in enumerate(names):
        total = 0.0
        for t_index, tree in enumerate(trees):
            total += permutation_loss(
                tree, d, name,
                rng.substream(seed, rng.TAG_IMPORTANCE, t_index, j),
                repeats=repeats,
            )
        means[name] = total / denom
    normalized = normalize_means(means)
    all_zero = all(v == 0.0 for v in means.values())
    entries = tuple(
        PredictorImportance(name, means[name], normalized[name]) for name in names
    )
    return ImportanceReport(entries, len(trees), zero_fill, all_zero)
