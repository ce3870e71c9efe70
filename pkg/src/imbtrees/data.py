"""Dataset model, delimited-file ingestion, and synthetic data generation.

A dataset is a validated, immutable table of tokens: typed predictor columns
plus a binary class column.  The two class labels are ordered by count
(ascending, ties broken by lexicographic order), and everything downstream
works in terms of the resulting small/large distinction.

Columns are stored encoded for the kernels: categorical values as int32
codes into the declared level list, numeric values as float64.  Arrays are
marked read-only; datasets are safe to share across worker threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import rng
from .errors import (InvalidParameter, MissingValue, NotBinary,
                     SchemaMismatch, UnknownLevel)

CATEGORICAL = "categorical"
NUMERIC = "numeric"


def round_half_up(x: float) -> int:
    """The package-wide rounding rule: floor(x + 0.5) on the float64 value."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class PredictorSpec:
    """One typed predictor column.  Categorical specs carry an ordered level list."""

    name: str
    kind: str
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, NUMERIC):
            raise InvalidParameter(f"predictor {self.name}: unknown kind {self.kind!r}")
        object.__setattr__(self, "levels", tuple(self.levels))
        if self.kind == CATEGORICAL:
            if len(self.levels) < 2:
                raise InvalidParameter(
                    f"predictor {self.name}: categorical needs >= 2 levels"
                )
            if len(set(self.levels)) != len(self.levels):
                raise InvalidParameter(f"predictor {self.name}: duplicate levels")
        elif self.levels:
            raise InvalidParameter(f"predictor {self.name}: numeric takes no levels")


@dataclass(frozen=True)
class SchemaConfig:
    """Names the class column and types every predictor column."""

    class_name: str
    predictors: tuple[PredictorSpec, ...]

    def __post_init__(self):
        names = [p.name for p in self.predictors]
        if len(set(names)) != len(names):
            raise InvalidParameter("duplicate predictor names in schema")
        if self.class_name in names:
            raise InvalidParameter("class column cannot also be a predictor")
        if not self.predictors:
            raise InvalidParameter("schema declares no predictors")


@dataclass(frozen=True)
class Dataset:
    """Validated immutable token table with the small/large class split."""

    schema: tuple[PredictorSpec, ...]
    class_name: str
    class_labels: tuple[str, str]  # (small_label, large_label)
    y_small: np.ndarray            # bool, True = small class
    cat_codes: np.ndarray          # int32, one column per categorical predictor
    num_vals: np.ndarray           # float64, one column per numeric predictor
    n_small: int
    n_large: int
    # name -> (kind, column index within its matrix)
    columns: Mapping[str, tuple[str, int]] = field(repr=False)

    @property
    def n_rows(self) -> int:
        return self.y_small.shape[0]

    @property
    def predictor_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.schema)

    def spec(self, name: str) -> PredictorSpec:
        for p in self.schema:
            if p.name == name:
                return p
        raise SchemaMismatch(f"no predictor named {name!r}")

    def predictor_index(self, name: str) -> int:
        for i, p in enumerate(self.schema):
            if p.name == name:
                return i
        raise SchemaMismatch(f"no predictor named {name!r}")

    def encoded_column(self, name: str) -> np.ndarray:
        kind, j = self.columns[name]
        return self.cat_codes[:, j] if kind == CATEGORICAL else self.num_vals[:, j]

    def decoded_column(self, name: str) -> list:
        kind, j = self.columns[name]
        if kind == CATEGORICAL:
            levels = self.spec(name).levels
            return [levels[c] for c in self.cat_codes[:, j]]
        return [float(v) for v in self.num_vals[:, j]]

    def row(self, i: int) -> dict:
        out = {}
        for p in self.schema:
            kind, j = self.columns[p.name]
            if kind == CATEGORICAL:
                out[p.name] = p.levels[self.cat_codes[i, j]]
            else:
                out[p.name] = float(self.num_vals[i, j])
        out[self.class_name] = self.class_labels[0] if self.y_small[i] else self.class_labels[1]
        return out


def _order_labels(labels: Sequence[str], counts: Mapping[str, int]) -> tuple[str, str]:
    """(small, large) by ascending count, lexicographic tie-break."""
    a, b = sorted(labels)
    if counts[a] < counts[b]:
        return a, b
    if counts[b] < counts[a]:
        return b, a
    return a, b


def dataset_from_columns(schema: SchemaConfig,
                         predictor_values: Mapping[str, Sequence],
                         class_values: Sequence[str]) -> Dataset:
    """Validate raw decoded columns and build a Dataset."""
    n = len(class_values)
    labels = sorted(set(class_values))
    if len(labels) != 2:
        raise NotBinary(
            f"class column {schema.class_name!r} has {len(labels)} distinct labels, need 2"
        )
    counts = {lab: 0 for lab in labels}
    for v in class_values:
        counts[v] += 1
    small, large = _order_labels(labels, counts)

    cat_specs = [p for p in schema.predictors if p.kind == CATEGORICAL]
    num_specs = [p for p in schema.predictors if p.kind == NUMERIC]
    cat = np.zeros((n, len(cat_specs)), dtype=np.int32)
    num = np.zeros((n, len(num_specs)), dtype=np.float64)
    columns: dict[str, tuple[str, int]] = {}

    for j, p in enumerate(cat_specs):
        columns[p.name] = (CATEGORICAL, j)
        index = {lvl: i for i, lvl in enumerate(p.levels)}
        vals = predictor_values[p.name]
        if len(vals) != n:
            raise SchemaMismatch(f"column {p.name!r}: {len(vals)} values for {n} rows")
        for i, v in enumerate(vals):
            code = index.get(v)
            if code is None:
                raise UnknownLevel(
                    f"column {p.name!r}, row {i + 1}: value {v!r} not a declared level"
                )
            cat[i, j] = code

    for j, p in enumerate(num_specs):
        columns[p.name] = (NUMERIC, j)
        vals = predictor_values[p.name]
        if len(vals) != n:
            raise SchemaMismatch(f"column {p.name!r}: {len(vals)} values for {n} rows")
        for i, v in enumerate(vals):
            fv = float(v)
            if not math.isfinite(fv):
                raise SchemaMismatch(
                    f"column {p.name!r}, row {i + 1}: non-finite value {v!r}"
                )
            num[i, j] = fv

    y = np.fromiter((v == small for v in class_values), dtype=bool, count=n)
    for arr in (cat, num, y):
        arr.setflags(write=False)
    return Dataset(
        schema=schema.predictors,
        class_name=schema.class_name,
        class_labels=(small, large),
        y_small=y,
        cat_codes=cat,
        num_vals=num,
        n_small=counts[small],
        n_large=counts[large],
        columns=columns,
    )


def load_dataset(path, schema: SchemaConfig, delimiter: str = ",") -> Dataset:
    """Load a delimited UTF-8 text file (header row first) against a schema.

    Cells are stripped of surrounding whitespace; a cell that is empty after
    stripping raises MissingValue.  Columns present in the file but not in
    the schema are ignored.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        pos = {name: i for i, name in enumerate(header)}
        needed = [p.name for p in schema.predictors] + [schema.class_name]
        missing = [name for name in needed if name not in pos]
        if missing:
            raise SchemaMismatch(f"{path}: missing columns {', '.join(missing)}")

        raw_cols: dict[str, list] = {name: [] for name in needed}
        for lineno, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise SchemaMismatch(
                    f"{path}:{lineno}: {len(record)} fields, header has {len(header)}"
                )
            for name in needed:
                cell = record[pos[name]].strip()
                if cell == "":
                    raise MissingValue(f"{path}:{lineno}: empty cell in column {name!r}")
                raw_cols[name].append(cell)

    class_values = raw_cols.pop(schema.class_name)
    if not class_values:
        raise SchemaMismatch(f"{path}: no data rows")
    for p in schema.predictors:
        if p.kind == NUMERIC:
            parsed = []
            for i, cell in enumerate(raw_cols[p.name]):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise SchemaMismatch(
                        f"{path}:{i + 2}: column {p.name!r}: {cell!r} is not numeric"
                    ) from None
            raw_cols[p.name] = parsed
    return dataset_from_columns(schema, raw_cols, class_values)


def _format_numeric(v: float) -> str:
    return repr(float(v))


def write_dataset(d: Dataset, path, delimiter: str = ",") -> None:
    """Write a dataset so that load_dataset(write_dataset(d)) == d."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        names = list(d.predictor_names) + [d.class_name]
        writer.writerow(names)
        decoded = {name: d.decoded_column(name) for name in d.predictor_names}
        small, large = d.class_labels
        for i in range(d.n_rows):
            row = []
            for p in d.schema:
                v = decoded[p.name][i]
                row.append(v if p.kind == CATEGORICAL else _format_numeric(v))
            row.append(small if d.y_small[i] else large)
            writer.writerow(row)


def class_counts(d: Dataset) -> tuple[int, int]:
    """(n_small, n_large)."""
    return d.n_small, d.n_large


@dataclass(frozen=True)
class SignalSpec:
    """A synthetic predictor: class-conditional effect of the given strength.

    Numeric: standard normal base, small-class mean shifted by `effect`.
    Categorical: uniform levels in the large class; small-class level
    weights tilted monotonically, proportional to exp(effect * (i/(k-1) - 1/2)).
    effect = 0 makes the column independent of the class by construction.
    """

    name: str
    kind: str
    effect: float
    levels: tuple[str, ...] = ("a", "b", "c")


def _as_signal(entry) -> SignalSpec:
    if isinstance(entry, SignalSpec):
        return entry
    name, kind, effect = entry[0], entry[1], float(entry[2])
    levels = tuple(entry[3]) if len(entry) > 3 else ("a", "b", "c")
    return SignalSpec(name, kind, effect, levels)


def synthetic_specs(signal: Iterable, noise_predictors: int) -> list[SignalSpec]:
    """Signal specs plus generated noise specs (alternating numeric and
    3-level categorical, all effect 0), validated."""
    if noise_predictors < 0:
        raise InvalidParameter("noise_predictors must be >= 0")
    specs = [_as_signal(e) for e in signal]
    for i in range(1, noise_predictors + 1):
        kind = NUMERIC if i % 2 == 1 else CATEGORICAL
        specs.append(SignalSpec(f"noise{i}", kind, 0.0))
    if not specs:
        raise InvalidParameter("need at least one predictor")
    for sp in specs:
        if not math.isfinite(sp.effect):
            raise InvalidParameter(f"predictor {sp.name}: non-finite effect")
    return specs


def synthetic_schema(signal: Iterable, noise_predictors: int) -> SchemaConfig:
    """The schema generate_synthetic will produce for these arguments."""
    preds = []
    for sp in synthetic_specs(signal, noise_predictors):
        if sp.kind == NUMERIC:
            preds.append(PredictorSpec(sp.name, NUMERIC))
        else:
            preds.append(PredictorSpec(sp.name, CATEGORICAL, sp.levels))
    return SchemaConfig(class_name="class", predictors=tuple(preds))


def generate_synthetic(n: int, imbalance: float, signal: Iterable = (),
                       noise_predictors: int = 0, seed: int = 0) -> Dataset:
    """Deterministic synthetic imbalanced dataset.

    imbalance is the target n_small/n_large ratio in (0, 1].  Noise
    predictors are appended after the signal ones, alternating numeric and
    3-level categorical, all with effect 0.  Bit-identical output for
    identical arguments.
    """
    if n < 20:
        raise InvalidParameter(f"n={n}: need at least 20 rows")
    if not (0.0 < imbalance <= 1.0):
        raise InvalidParameter(f"imbalance={imbalance}: must be in (0, 1]")
    specs = synthetic_specs(signal, noise_predictors)

    n_small = round_half_up(n * imbalance / (1.0 + imbalance))
    n_large = n - n_small
    if n_small < 1 or n_large < 1:
        raise InvalidParameter(
            f"imbalance={imbalance} with n={n} leaves an empty class"
        )

    # Rows are generated class-sorted then shuffled once, so per-column draws
    # stay aligned with the class regardless of predictor count.
    y_sorted = np.zeros(n, dtype=bool)
    y_sorted[:n_small] = True
    order = rng.permutation(rng.substream(seed, rng.TAG_SHUFFLE), n)

    nd = NormalDist()
    values: dict[str, list] = {}
    schema_preds = []
    for col, sp in enumerate(specs):
        key = rng.substream(seed, rng.TAG_COLUMN, col)
        u = rng.uniform_array(key, 0, n)
        if sp.kind == NUMERIC:
            base = np.array([nd.inv_cdf(v) for v in u], dtype=np.float64)
            x = base + sp.effect * y_sorted
            values[sp.name] = [float(v) for v in x[order]]
            schema_preds.append(PredictorSpec(sp.name, NUMERIC))
        else:
            k = len(sp.levels)
            w_small = np.exp(sp.effect * (np.arange(k) / (k - 1) - 0.5))
            cum_small = np.cumsum(w_small / w_small.sum())
            cum_large = np.cumsum(np.full(k, 1.0 / k))
            code_small = np.searchsorted(cum_small, u, side="right")
            code_large = np.searchsorted(cum_large, u, side="right")
            codes = np.where(y_sorted, code_small, code_large)
            codes = np.minimum(codes, k - 1)
            values[sp.name] = [sp.levels[c] for c in codes[order]]
            schema_preds.append(PredictorSpec(sp.name, CATEGORICAL, sp.levels))

    labels = np.where(y_sorted[order], "minor", "major")
    schema = SchemaConfig(class_name="class", predictors=tuple(schema_preds))
    return dataset_from_columns(schema, values, [str(v) for v in labels])
