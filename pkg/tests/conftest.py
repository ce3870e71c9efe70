import numpy as np
import pytest

from imbtrees import (CATEGORICAL, NUMERIC, PredictorSpec, SchemaConfig,
                      dataset_from_columns)


def make_dataset(columns, class_values, class_name="class", levels=None):
    """Build a dataset from decoded columns.

    columns: {name: list}; values that are str build categorical predictors
    (levels inferred and sorted unless given via `levels[name]`), numbers
    build numeric ones.
    """
    levels = levels or {}
    preds = []
    for name, vals in columns.items():
        if all(isinstance(v, str) for v in vals):
            lv = levels.get(name) or tuple(sorted(set(vals)))
            preds.append(PredictorSpec(name, CATEGORICAL, tuple(lv)))
        else:
            preds.append(PredictorSpec(name, NUMERIC))
    schema = SchemaConfig(class_name=class_name, predictors=tuple(preds))
    return dataset_from_columns(schema, columns, class_values)


def reference_dataset(n_small=528, n_large=5618, male_small=152, male_male_large=1615):
    """Reference imbalanced dataset: 528/5618 class counts, one two-level
    predictor with 4379/1767 level totals spread across classes
    proportionally."""
    male_large = male_male_large
    sex = (["m"] * male_small + ["f"] * (n_small - male_small)
           + ["m"] * male_large + ["f"] * (n_large - male_large))
    y = ["zero"] * n_small + ["realized"] * n_large
    return make_dataset({"SEX": sex}, y, levels={"SEX": ("f", "m")})


def hand_tree(d, spec):
    """Build a Tree directly from a nested node description (tests only).

    spec forms:
      ("leaf", freq_small, n)
      ("cat", predictor, [left level labels], left_spec, right_spec)
      ("num", predictor, cut, left_spec, right_spec)
    """
    from imbtrees.tree import (Internal, Leaf, Provenance, Tree, TreeSettings,
                               _flatten)

    leaves = []
    counter = [0]

    def build(s):
        nid = counter[0]
        counter[0] += 1
        if s[0] == "leaf":
            _, freq, n = s
            ns = int(round(freq * n))
            leaf = Leaf(nid, len(leaves), n, ns, freq, 1.0 - freq)
            leaves.append(leaf)
            return leaf
        kind, name = s[0], s[1]
        j = d.predictor_index(name)
        left = build(s[3])
        right = build(s[4])
        n = left.n + right.n
        if kind == "cat":
            pspec = d.schema[j]
            codes = frozenset(pspec.levels.index(l) for l in s[2])
            return Internal(nid, j, name, CATEGORICAL, n, 0.01, 1.0,
                            left, right, left_levels=codes)
        return Internal(nid, j, name, NUMERIC, n, 0.01, 1.0,
                        left, right, cut=float(s[2]))

    root = build(spec)
    flat = _flatten(root, d.schema, d.columns, leaves)
    return Tree(
        root=root, settings=TreeSettings(),
        provenance=Provenance(1.0, 1.0, "hand", 0, 0, 0),
        schema=d.schema, class_labels=d.class_labels,
        n_train=sum(l.n for l in leaves), leaves=tuple(leaves),
        _flat=flat, _columns=dict(d.columns),
    )


@pytest.fixture
def tiny_imbalanced():
    rng = np.random.default_rng(1234)
    n_small, n_large = 12, 48
    x = np.concatenate([rng.normal(1.5, 1, n_small), rng.normal(0, 1, n_large)])
    cat = (["hi"] * n_small + ["lo"] * n_large)
    swap = rng.random(n_small + n_large) < 0.2
    cat = [("lo" if c == "hi" else "hi") if s else c for c, s in zip(cat, swap)]
    y = ["pos"] * n_small + ["neg"] * n_large
    return make_dataset({"xnum": [float(v) for v in x], "xcat": cat}, y)
