"""Two-sided undersampling with optional stratification.

Three regimes produce training sets from a dataset, all without replacement
and all deterministic in (plan.seed, repetition, retry):

* unstratified: round_half_up(p_class * n_class) rows uniformly per class;
* proportional: the same rounding applied per stratum of one categorical
  predictor, so its level proportions survive the undersampling;
* minimum-criterion: unstratified draws redrawn (fresh substream per
  attempt) until every observed level of the predictor reaches a minimum
  count in the union of the two class parts, or the attempt budget is
  exhausted, in which case the training set is flagged infeasible instead
  of raising.

Rounding is half-up on the float64 product, applied per class or per
stratum; proportional per-class totals are therefore sums of stratum
roundings and may drift a few rows from round(p * n_class).  A stratum
whose target rounds to 0 contributes nothing - that silent loss of rare
levels is exactly what the minimum-criterion mode exists to detect.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import rng
from .data import CATEGORICAL, Dataset, round_half_up
from .errors import EmptySample, InvalidParameter


@dataclass(frozen=True)
class Unstratified:
    tag: str = field(default="unstrat", init=False)


@dataclass(frozen=True)
class Proportional:
    predictor: str

    @property
    def tag(self) -> str:
        return f"prop_{self.predictor}"


@dataclass(frozen=True)
class MinCriterion:
    predictor: str
    min_count: int
    max_retries: int = 10

    def __post_init__(self):
        if self.min_count < 1:
            raise InvalidParameter("min_count must be >= 1")
        if self.max_retries < 1:
            raise InvalidParameter("max_retries must be >= 1")

    @property
    def tag(self) -> str:
        return f"min{self.min_count}_{self.predictor}"


Mode = Union[Unstratified, Proportional, MinCriterion]


@dataclass(frozen=True)
class SamplingPlan:
    """One grid cell's sampling configuration."""

    psmall: float
    plarge: float
    mode: Mode
    seed: int

    def __post_init__(self):
        if not (0.0 < self.psmall <= 1.0):
            raise InvalidParameter(f"psmall={self.psmall}: must be in (0, 1]")
        if not (0.0 < self.plarge <= 1.0):
            raise InvalidParameter(f"plarge={self.plarge}: must be in (0, 1]")


FEASIBLE = "feasible"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class TrainingSet:
    """Sampled rows plus provenance.  rows index into dataset order, ascending."""

    dataset: Dataset
    rows: np.ndarray
    plan: SamplingPlan
    rep: int
    retry: int
    status: str

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])


def _class_rows(d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    return np.flatnonzero(d.y_small), np.flatnonzero(~d.y_small)


def _draw_class(ids: np.ndarray, p: float, key: int, which: str) -> np.ndarray:
    target = round_half_up(p * ids.shape[0])
    if target < 1:
        raise EmptySample(
            f"{which}-class target round({p} * {ids.shape[0]}) is 0"
        )
    return ids[rng.subset(key, ids.shape[0], target)]


def _draw_unstratified(d: Dataset, plan: SamplingPlan, key: int) -> np.ndarray:
    small_ids, large_ids = _class_rows(d)
    part_small = _draw_class(small_ids, plan.psmall, rng.substream(key, rng.TAG_CLASS, 0), "small")
    part_large = _draw_class(large_ids, plan.plarge, rng.substream(key, rng.TAG_CLASS, 1), "large")
    return np.sort(np.concatenate([part_small, part_large]))


def _attempt_key(plan: SamplingPlan, rep: int, retry: int) -> int:
    return rng.substream(plan.seed, rng.TAG_REP, rep, rng.TAG_RETRY, retry)


def undersample(d: Dataset, plan: SamplingPlan, rep: int) -> TrainingSet:
    """Unstratified undersample: uniform without replacement within each class."""
    if not isinstance(plan.mode, Unstratified):
        raise InvalidParameter("undersample requires an unstratified plan")
    rows = _draw_unstratified(d, plan, _attempt_key(plan, rep, 0))
    return TrainingSet(d, rows, plan, rep, 0, FEASIBLE)


def undersample_proportional(d: Dataset, plan: SamplingPlan, rep: int) -> TrainingSet:
    """Per-stratum undersample retaining the level proportions of one predictor."""
    mode = plan.mode
    if not isinstance(mode, Proportional):
        raise InvalidParameter("undersample_proportional requires a proportional plan")
    spec = d.spec(mode.predictor)
    if spec.kind != CATEGORICAL:
        raise InvalidParameter(f"stratifying predictor {mode.predictor!r} must be categorical")
    codes = d.encoded_column(mode.predictor)
    key = _attempt_key(plan, rep, 0)

    parts = []
    for cls, (ids, p) in enumerate(
        zip(_class_rows(d), (plan.psmall, plan.plarge))
    ):
        cls_codes = codes[ids]
        took = 0
        for level in range(len(spec.levels)):
            stratum = ids[cls_codes == level]
            target = round_half_up(p * stratum.shape[0])
            if target < 1:
                continue
            pick = rng.subset(
                rng.substream(key, rng.TAG_CLASS, cls, rng.TAG_STRATUM, level),
                stratum.shape[0], target,
            )
            parts.append(stratum[pick])
            took += target
        if took == 0:
            which = "small" if cls == 0 else "large"
            raise EmptySample(f"every {which}-class stratum rounded to 0 rows")
    return TrainingSet(d, np.sort(np.concatenate(parts)), plan, rep, 0, FEASIBLE)


def undersample_min_criterion(d: Dataset, plan: SamplingPlan, rep: int) -> TrainingSet:
    """Unstratified undersampling redrawn until a minimum-count criterion holds.

    The criterion: every level of the predictor observed in the full dataset
    must reach min_count rows in the union of the sampled class parts.
    After max_retries failed attempts the result is flagged infeasible
    (empty row set); callers report such cells as 0.0.
    """
    mode = plan.mode
    if not isinstance(mode, MinCriterion):
        raise InvalidParameter("undersample_min_criterion requires a min_criterion plan")
    spec = d.spec(mode.predictor)
    if spec.kind != CATEGORICAL:
        raise InvalidParameter(f"stratifying predictor {mode.predictor!r} must be categorical")
    codes = d.encoded_column(mode.predictor)
    k = len(spec.levels)
    observed = np.flatnonzero(np.bincount(codes, minlength=k) > 0)

    for retry in range(mode.max_retries):
        rows = _draw_unstratified(d, plan, _attempt_key(plan, rep, retry))
        counts = np.bincount(codes[rows], minlength=k)
        if np.all(counts[observed] >= mode.min_count):
            return TrainingSet(d, rows, plan, rep, retry, FEASIBLE)
    return TrainingSet(
        d, np.empty(0, dtype=np.int64), plan, rep, mode.max_retries, INFEASIBLE
    )


def draw(d: Dataset, plan: SamplingPlan, rep: int) -> TrainingSet:
    """Dispatch on the plan's sampling mode."""
    if isinstance(plan.mode, Unstratified):
        return undersample(d, plan, rep)
    if isinstance(plan.mode, Proportional):
        return undersample_proportional(d, plan, rep)
    return undersample_min_criterion(d, plan, rep)


def balance_ratio(d: Dataset, psmall: float) -> float:
    """Size of the undersampled small part relative to the large class,
    psmall * n_small / n_large.

    Choosing plarge near this value gives class parts of similar size; the
    exact formula value is reported, with no rounding applied.
    """
    return psmall * d.n_small / d.n_large
