"""Conditional-inference-style tree learning.

Recursive binary partitioning with the split decision separated into two
stages per node, so predictor selection is not biased toward many-valued
predictors:

1. association testing: each non-constant predictor gets an independence
   test against the class (chi-square statistic for categorical columns,
   the standardized class-sum linear statistic for numeric ones), calibrated
   by Monte Carlo permutation of the class labels (exhaustive enumeration on
   small nodes), then Bonferroni-adjusted over the number of tested
   predictors.  If the smallest adjusted p-value is not below alpha the node
   becomes a leaf; otherwise the winning predictor is split.
2. partition search: among the winner's binary partitions (exhaustive level
   subsets up to `exhaustive_subset_levels` levels, greedy class-rate
   ordering above; all distinct cutpoints for numeric), the candidate
   maximizing the 2x2 chi-square wins, subject to min_bucket on both sides.

Determinism rules baked in: permutation draws come from a substream keyed by
(tree key, node id, predictor index); equal adjusted p-values pick the
first predictor in schema order; equal partition statistics pick the first
candidate in enumeration order (for numeric, that is the smallest
cutpoint); numeric cutpoints are stored as the largest left-side value with
rule ``x <= cut``; categorical levels unseen in the node's rows are routed
toward the child that took more training rows (tie: left).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from . import kernels, rng, stats
from .data import CATEGORICAL, NUMERIC, Dataset, PredictorSpec
from .errors import (DegenerateInput, InvalidParameter, MissingValue,
                     SchemaMismatch, UnknownLevel)
from .sampling import TrainingSet


@dataclass(frozen=True)
class TreeSettings:
    alpha: float = 0.05
    min_split: int = 20
    min_bucket: int = 7
    max_depth: Optional[int] = None
    n_perm: int = 9999
    exact_max_rows: int = 10
    exhaustive_subset_levels: int = 10

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise InvalidParameter(f"alpha={self.alpha}: must be in (0, 1)")
        if self.min_split < 2:
            raise InvalidParameter("min_split must be >= 2")
        if self.min_bucket < 1:
            raise InvalidParameter("min_bucket must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise InvalidParameter("max_depth must be >= 0")
        if self.n_perm < 1:
            raise InvalidParameter("n_perm must be >= 1")
        if self.exact_max_rows < 0:
            raise InvalidParameter("exact_max_rows must be >= 0")
        if self.exhaustive_subset_levels < 1:
            raise InvalidParameter("exhaustive_subset_levels must be >= 1")


@dataclass(frozen=True)
class Leaf:
    node_id: int
    slot: int
    n: int
    n_small: int
    freq_small: float
    freq_large: float


@dataclass(frozen=True)
class Internal:
    node_id: int
    pred_index: int
    pred_name: str
    kind: str
    n: int
    p_adj: float
    stat: float
    left: "Node"
    right: "Node"
    cut: float = math.nan                       # numeric splits
    left_levels: frozenset = frozenset()        # categorical splits, level codes


Node = Union[Leaf, Internal]


@dataclass(frozen=True)
class Provenance:
    """Where a tree came from: grid cell, repetition, seed."""

    psmall: float
    plarge: float
    mode_tag: str
    seed: int
    rep: int
    retry: int


@dataclass(frozen=True)
class _FlatTree:
    """Array form of the tree consumed by the routing kernels."""

    kind: np.ndarray        # int8: 0 leaf, 1 categorical, 2 numeric
    findex: np.ndarray      # int32 column index within its matrix
    cut: np.ndarray         # float64
    moff: np.ndarray        # int32 offset into memb
    left: np.ndarray        # int32 node id
    right: np.ndarray       # int32 node id
    leaf_slot: np.ndarray   # int32, -1 for internals
    memb: np.ndarray        # uint8 level membership pool
    leaf_freq_small: np.ndarray  # float64 per leaf slot


@dataclass(frozen=True)
class Tree:
    root: Node
    settings: TreeSettings
    provenance: Provenance
    schema: tuple[PredictorSpec, ...]
    class_labels: tuple[str, str]
    n_train: int
    leaves: tuple[Leaf, ...]
    _flat: _FlatTree = field(repr=False, compare=False)
    _columns: Mapping[str, tuple[str, int]] = field(repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return int(self._flat.kind.shape[0])

    def depth(self) -> int:
        def walk(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(walk(node.left), walk(node.right))
        return walk(self.root)

    def used_predictors(self) -> frozenset[str]:
        names = set()

        def walk(node):
            if isinstance(node, Internal):
                names.add(node.pred_name)
                walk(node.left)
                walk(node.right)
        walk(self.root)
        return frozenset(names)

    def leaf_slots(self, cat_mat: np.ndarray, num_mat: np.ndarray) -> np.ndarray:
        """Leaf slot per row of the encoded matrices (kernel-backed)."""
        f = self._flat
        return kernels.route_arrays(
            f.kind, f.findex, f.cut, f.moff, f.left, f.right, f.leaf_slot,
            f.memb, np.ascontiguousarray(cat_mat, dtype=np.int32),
            np.ascontiguousarray(num_mat, dtype=np.float64),
        )

    def freq_small_batch(self, cat_mat: np.ndarray, num_mat: np.ndarray) -> np.ndarray:
        return self._flat.leaf_freq_small[self.leaf_slots(cat_mat, num_mat)]

    def freq_small_dataset(self, d: Dataset) -> np.ndarray:
        if tuple(p.name for p in d.schema) != tuple(p.name for p in self.schema):
            raise SchemaMismatch("dataset schema does not match the tree's schema")
        return self.freq_small_batch(d.cat_codes, d.num_vals)


def _provenance_of(t: TrainingSet) -> Provenance:
    return Provenance(
        psmall=t.plan.psmall, plarge=t.plan.plarge, mode_tag=t.plan.mode.tag,
        seed=t.plan.seed, rep=t.rep, retry=t.retry,
    )


class _Fitter:
    def __init__(self, training: TrainingSet, settings: TreeSettings, tree_key: int):
        d = training.dataset
        self.schema = d.schema
        self.columns = d.columns
        self.settings = settings
        self.tree_key = tree_key
        rows = np.asarray(training.rows, dtype=np.int64)
        self.cat = np.ascontiguousarray(d.cat_codes[rows], dtype=np.int32)
        self.num = np.ascontiguousarray(d.num_vals[rows], dtype=np.float64)
        self.mask = np.ascontiguousarray(d.y_small[rows], dtype=np.uint8)
        self.n = rows.shape[0]
        self.next_id = 0
        self.leaves: list[Leaf] = []

    def _take_id(self) -> int:
        nid = self.next_id
        self.next_id += 1
        return nid

    def _leaf(self, nid: int, idx: np.ndarray) -> Leaf:
        n = idx.shape[0]
        ns = int(self.mask[idx].sum())
        freq_small = ns / n
        leaf = Leaf(nid, len(self.leaves), n, ns, freq_small, 1.0 - freq_small)
        self.leaves.append(leaf)
        return leaf

    def _node_column(self, j: int, idx: np.ndarray) -> np.ndarray:
        kind, col = self.columns[self.schema[j].name]
        mat = self.cat if kind == CATEGORICAL else self.num
        return mat[idx, col]

    def _test_predictor(self, j: int, idx: np.ndarray, node_id: int):
        """Permutation p-value of predictor j at this node, or None if untestable."""
        spec = self.schema[j]
        mask = np.ascontiguousarray(self.mask[idx])
        n = idx.shape[0]
        s = int(mask.sum())
        values = self._node_column(j, idx)
        st = self.settings
        key = rng.substream(self.tree_key, rng.TAG_NODE, node_id, rng.TAG_PREDICTOR, j)
        exact_ok = n <= st.exact_max_rows and stats.exact_feasible(n, s)

        if spec.kind == CATEGORICAL:
            codes = np.ascontiguousarray(values, dtype=np.int32)
            k = len(spec.levels)
            m = np.bincount(codes, minlength=k)
            if np.count_nonzero(m) < 2:
                return None
            c = np.bincount(codes[mask == 1], minlength=k)
            stat_obs = stats.chisq_from_counts(c, m, s, n)
            if exact_ok:
                p = stats.exact_pvalue_categorical(codes, k, mask, stat_obs)
            else:
                hits = kernels.perm_count_categorical(codes, k, mask, stat_obs, st.n_perm, key)
                p = (1 + hits) / (st.n_perm + 1)
            return p, stat_obs

        x = np.ascontiguousarray(values, dtype=np.float64)
        if x.min() == x.max():
            return None
        t_obs, mu, sigma = stats.numeric_test_moments(x, mask)
        dev_obs = abs(t_obs - mu)
        if exact_ok:
            p = stats.exact_pvalue_numeric(x, mask, mu, dev_obs)
        else:
            hits = kernels.perm_count_numeric(x, mask, mu, dev_obs, st.n_perm, key)
            p = (1 + hits) / (st.n_perm + 1)
        return p, (dev_obs / sigma if sigma > 0.0 else 0.0)

    def _select_predictor(self, idx: np.ndarray, node_id: int):
        """Most significant predictor after Bonferroni adjustment.

        Returns (pred_index, p_adj, stat) or None if nothing is testable.
        Ties on the adjusted p-value keep the first predictor in schema
        order (strict < while scanning).
        """
        tested = []
        for j in range(len(self.schema)):
            res = self._test_predictor(j, idx, node_id)
            if res is not None:
                tested.append((j, res[0], res[1]))
        if not tested:
            return None
        n_tests = len(tested)
        best = None
        for j, p, stat in tested:
            p_adj = min(1.0, p * n_tests)
            if best is None or p_adj < best[1]:
                best = (j, p_adj, stat)
        return best

    def _partition_categorical(self, j: int, idx: np.ndarray):
        spec = self.schema[j]
        codes = self._node_column(j, idx)
        k = len(spec.levels)
        n = idx.shape[0]
        mask = self.mask[idx]
        s = int(mask.sum())
        m = np.bincount(codes, minlength=k)
        c = np.bincount(codes[mask == 1], minlength=k)
        present = [l for l in range(k) if m[l] > 0]
        kp = len(present)
        mb = self.settings.min_bucket

        candidates = []
        if kp <= self.settings.exhaustive_subset_levels:
            # present[0] pinned to the right side: each bipartition appears once
            for b in range(1, 1 << (kp - 1)):
                left = [present[i] for i in range(1, kp) if (b >> (i - 1)) & 1]
                candidates.append(left)
        else:
            # greedy: order by descending small-class rate, scan prefixes
            order = sorted(present, key=lambda l: (-(int(c[l]) / int(m[l])), l))
            candidates = [order[:t] for t in range(1, kp)]

        best = None
        for left in candidates:
            nl = int(sum(int(m[l]) for l in left))
            if nl < mb or n - nl < mb:
                continue
            a = int(sum(int(c[l]) for l in left))
            stat = stats.chisq_2x2(a, nl, s, n)
            if best is None or stat > best[0]:
                best = (stat, left, nl)
        if best is None:
            return None
        stat, left, nl = best
        # levels absent from this node follow the larger child (tie: left)
        absent_left = nl >= n - nl
        left_set = set(left)
        if absent_left:
            left_set.update(l for l in range(k) if m[l] == 0)
        memb = np.zeros(k, dtype=np.uint8)
        memb[list(left_set)] = 1
        go_left = memb[codes] == 1
        return {
            "kind": CATEGORICAL,
            "stat": stat,
            "left_levels": frozenset(left_set),
            "cut": math.nan,
            "left_idx": idx[go_left],
            "right_idx": idx[~go_left],
        }

    def _partition_numeric(self, j: int, idx: np.ndarray):
        x = self._node_column(j, idx)
        n = idx.shape[0]
        mask = self.mask[idx]
        s = int(mask.sum())
        mb = self.settings.min_bucket
        order = np.argsort(x, kind="stable")
        xs = x[order]
        cum = np.cumsum(mask[order].astype(np.int64))

        pos = np.arange(1, n)
        valid = (xs[:-1] < xs[1:]) & (pos >= mb) & (pos <= n - mb)
        pos = pos[valid]
        if pos.shape[0] == 0:
            return None
        a = cum[pos - 1]
        nl = pos.astype(np.int64)
        b = nl - a
        cc = s - a
        dd = (n - nl) - cc
        diff = (a * dd - b * cc).astype(np.float64)
        num = float(n) * (diff * diff)
        den = nl.astype(np.float64) * (n - nl).astype(np.float64) * float(s) * float(n - s)
        statv = num / den
        best = int(np.argmax(statv))  # first maximum: smallest cutpoint wins
        cut = float(xs[pos[best] - 1])
        go_left = x <= cut
        return {
            "kind": NUMERIC,
            "stat": float(statv[best]),
            "left_levels": frozenset(),
            "cut": cut,
            "left_idx": idx[go_left],
            "right_idx": idx[~go_left],
        }

    def build(self, idx: np.ndarray, depth: int) -> Node:
        nid = self._take_id()
        st = self.settings
        n = idx.shape[0]
        ns = int(self.mask[idx].sum())
        if (n < st.min_split or ns == 0 or ns == n
                or (st.max_depth is not None and depth >= st.max_depth)):
            return self._leaf(nid, idx)
        choice = self._select_predictor(idx, nid)
        if choice is None or choice[1] >= st.alpha:
            return self._leaf(nid, idx)
        j, p_adj, _stat = choice
        spec = self.schema[j]
        part = (self._partition_categorical(j, idx)
                if spec.kind == CATEGORICAL else self._partition_numeric(j, idx))
        if part is None:
            return self._leaf(nid, idx)
        left = self.build(part["left_idx"], depth + 1)
        right = self.build(part["right_idx"], depth + 1)
        return Internal(
            node_id=nid, pred_index=j, pred_name=spec.name, kind=part["kind"],
            n=n, p_adj=p_adj, stat=part["stat"], left=left, right=right,
            cut=part["cut"], left_levels=part["left_levels"],
        )


def _flatten(root: Node, schema, columns, leaves) -> _FlatTree:
    n_nodes = 0

    def count(node):
        nonlocal n_nodes
        n_nodes += 1
        if isinstance(node, Internal):
            count(node.left)
            count(node.right)
    count(root)

    kind = np.zeros(n_nodes, dtype=np.int8)
    findex = np.zeros(n_nodes, dtype=np.int32)
    cut = np.zeros(n_nodes, dtype=np.float64)
    moff = np.zeros(n_nodes, dtype=np.int32)
    left = np.zeros(n_nodes, dtype=np.int32)
    right = np.zeros(n_nodes, dtype=np.int32)
    leaf_slot = np.full(n_nodes, -1, dtype=np.int32)
    pool: list[int] = []

    def fill(node):
        nid = node.node_id
        if isinstance(node, Leaf):
            kind[nid] = 0
            leaf_slot[nid] = node.slot
            return
        spec_kind, col = columns[node.pred_name]
        if node.kind == CATEGORICAL:
            kind[nid] = 1
            moff[nid] = len(pool)
            k = len(schema[node.pred_index].levels)
            pool.extend(1 if l in node.left_levels else 0 for l in range(k))
        else:
            kind[nid] = 2
            cut[nid] = node.cut
        findex[nid] = col
        left[nid] = node.left.node_id
        right[nid] = node.right.node_id
        fill(node.left)
        fill(node.right)
    fill(root)

    freq = np.array([lf.freq_small for lf in leaves], dtype=np.float64)
    flat = _FlatTree(kind, findex, cut, moff, left, right, leaf_slot,
                     np.array(pool, dtype=np.uint8), freq)
    for arr in (flat.kind, flat.findex, flat.cut, flat.moff, flat.left,
                flat.right, flat.leaf_slot, flat.memb, flat.leaf_freq_small):
        arr.setflags(write=False)
    return flat


def fit_ctree(training: TrainingSet, settings: Optional[TreeSettings] = None,
              seed: Optional[int] = None) -> Tree:
    """Fit a tree on a training set.

    The permutation-test substream is derived from the training set's
    provenance (plan seed, repetition, retry) unless an explicit seed is
    given.  Both classes must be present; infeasible training sets are
    rejected.
    """
    settings = settings if settings is not None else TreeSettings()
    if not training.feasible:
        raise DegenerateInput("cannot fit on an infeasible training set")
    if training.n_rows == 0:
        raise DegenerateInput("empty training set")
    if seed is not None:
        tree_key = rng.substream(seed, rng.TAG_FIT)
    else:
        tree_key = rng.substream(
            training.plan.seed, rng.TAG_FIT, training.rep, training.retry
        )
    fitter = _Fitter(training, settings, tree_key)
    ns = int(fitter.mask.sum())
    if ns == 0 or ns == fitter.n:
        raise DegenerateInput("one class absent from the training set")
    root = fitter.build(np.arange(fitter.n, dtype=np.int64), 0)
    leaves = tuple(fitter.leaves)
    flat = _flatten(root, fitter.schema, fitter.columns, leaves)
    return Tree(
        root=root, settings=settings, provenance=_provenance_of(training),
        schema=fitter.schema, class_labels=training.dataset.class_labels,
        n_train=fitter.n, leaves=leaves, _flat=flat, _columns=dict(fitter.columns),
    )


def _route_row(tree: Tree, row: Mapping) -> Leaf:
    node = tree.root
    while isinstance(node, Internal):
        spec = tree.schema[node.pred_index]
        if spec.name not in row:
            raise SchemaMismatch(f"row is missing predictor {spec.name!r}")
        v = row[spec.name]
        if v is None or (isinstance(v, str) and v.strip() == ""):
            raise MissingValue(f"row has no value for predictor {spec.name!r}")
        if spec.kind == CATEGORICAL:
            try:
                code = spec.levels.index(v)
            except ValueError:
                raise UnknownLevel(
                    f"predictor {spec.name!r}: value {v!r} not a declared level"
                ) from None
            node = node.left if code in node.left_levels else node.right
        else:
            fv = float(v)
            if not math.isfinite(fv):
                raise SchemaMismatch(f"predictor {spec.name!r}: non-finite value")
            node = node.left if fv <= node.cut else node.right
    return node


def predict(tree: Tree, row: Mapping, threshold: float = 0.5) -> str:
    """Class label for one row: small iff the leaf's freq_small >= threshold."""
    if not (0.0 < threshold <= 1.0):
        raise InvalidParameter(f"threshold={threshold}: must be in (0, 1]")
    leaf = _route_row(tree, row)
    small, large = tree.class_labels
    return small if leaf.freq_small >= threshold else large


def leaf_frequencies(tree: Tree, row: Mapping) -> tuple[float, float]:
    """(freq_small, freq_large) of the leaf the row routes to."""
    leaf = _route_row(tree, row)
    return leaf.freq_small, leaf.freq_large


def _format_float(v: float) -> str:
    return repr(float(v))


def to_text(tree: Tree) -> str:
    """Deterministic human-readable rendering (golden-file friendly)."""
    p = tree.provenance
    lines = [
        "tree v1",
        f"trained n={tree.n_train} classes={tree.class_labels[0]}/{tree.class_labels[1]}",
        (f"cell psmall={_format_float(p.psmall)} plarge={_format_float(p.plarge)}"
         f" mode={p.mode_tag} rep={p.rep} retry={p.retry}"),
        (f"settings alpha={_format_float(tree.settings.alpha)}"
         f" min_split={tree.settings.min_split} min_bucket={tree.settings.min_bucket}"
         f" n_perm={tree.settings.n_perm}"),
    ]

    def walk(node: Node, indent: int):
        pad = "  " * indent
        if isinstance(node, Leaf):
            lines.append(
                f"{pad}leaf[{node.node_id}] n={node.n} n_small={node.n_small}"
                f" freq_small={_format_float(node.freq_small)}"
            )
            return
        spec = tree.schema[node.pred_index]
        if node.kind == CATEGORICAL:
            shown = "|".join(spec.levels[l] for l in sorted(node.left_levels))
            cond = f"{node.pred_name} in {{{shown}}}"
        else:
            cond = f"{node.pred_name} <= {_format_float(node.cut)}"
        lines.append(
            f"{pad}node[{node.node_id}] {cond} n={node.n}"
            f" p_adj={_format_float(node.p_adj)} stat={_format_float(node.stat)}"
        )
        walk(node.left, indent + 1)
        walk(node.right, indent + 1)

    walk(tree.root, 0)
    return "\n".join(lines) + "\n"
