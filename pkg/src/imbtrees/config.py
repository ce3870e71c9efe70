"""Run configuration: a strict sectioned key-value format.

Sections: [data], [synthetic], [grid], [ctree], [importance], [output].
Keys may repeat where a list is natural (categorical, numeric, signal,
mode, forbid).  Unknown sections or keys are errors, as are values outside
their documented domains; every message names the offending key.  stdlib
configparser is not used because it rejects repeated keys.

Forbidden-pattern syntax (the `forbid` key, repeatable): conditions joined
by `&`, each one of

    NAME in lvl1|lvl2        categorical subset
    NAME in [a,b]            closed numeric interval
    NAME <= v | < v | >= v | > v

Patterns are bound against the schema at load time; unknown predictors or
kind mismatches are config errors.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .data import (CATEGORICAL, NUMERIC, PredictorSpec, SchemaConfig,
                   SignalSpec, synthetic_schema)
from .engine import CatCondition, ForbiddenPattern, NumCondition
from .errors import ConfigError, InvalidParameter
from .sampling import MinCriterion, Mode, Proportional, Unstratified
from .tree import TreeSettings

_SECTIONS = {
    "data": {"file", "delimiter", "class", "categorical", "numeric"},
    "synthetic": {"n", "imbalance", "seed", "signal", "noise", "out"},
    "grid": {"psmall", "plarge", "repetitions", "k_best", "thresholds",
             "mode", "forbid", "seed"},
    "ctree": {"alpha", "min_split", "min_bucket", "n_perm", "max_depth",
              "exact_max_rows"},
    "importance": {"enabled", "repeats"},
    "output": {"dir"},
}

_REPEATABLE = {("data", "categorical"), ("data", "numeric"),
               ("synthetic", "signal"), ("grid", "mode"), ("grid", "forbid")}


def parse_sections(text: str) -> dict[str, list[tuple[str, str]]]:
    """Raw parse: section -> ordered (key, value) pairs.  Syntax errors and
    unknown sections/keys raise ConfigError."""
    sections: dict[str, list[tuple[str, str]]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            m = re.fullmatch(r"\[([A-Za-z_][A-Za-z0-9_]*)\]", line)
            if not m:
                raise ConfigError(f"line {lineno}: malformed section header {line!r}")
            name = m.group(1)
            if name not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            if name in sections:
                raise ConfigError(f"line {lineno}: duplicate section [{name}]")
            sections[name] = []
            current = name
            continue
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if key not in _SECTIONS[current]:
            raise ConfigError(f"line {lineno}: unknown key [{current}] {key}")
        if (current, key) not in _REPEATABLE and any(k == key for k, _ in sections[current]):
            raise ConfigError(f"line {lineno}: duplicate key [{current}] {key}")
        sections[current].append((key, value))
    return sections


class _Section:
    def __init__(self, name: str, pairs: list[tuple[str, str]]):
        self.name = name
        self.pairs = pairs

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        for k, v in self.pairs:
            if k == key:
                return v
        return default

    def get_all(self, key: str) -> list[str]:
        return [v for k, v in self.pairs if k == key]

    def require(self, key: str) -> str:
        v = self.get(key)
        if v is None:
            raise ConfigError(f"[{self.name}] {key} is required")
        return v

    def ref(self, key: str) -> str:
        return f"[{self.name}] {key}"


def _parse_int(sec: _Section, key: str, default: Optional[int] = None,
               minimum: Optional[int] = None) -> Optional[int]:
    raw = sec.get(key)
    if raw is None:
        return default
    try:
        v = int(raw)
    except ValueError:
        raise ConfigError(f"{sec.ref(key)}: {raw!r} is not an integer") from None
    if minimum is not None and v < minimum:
        raise ConfigError(f"{sec.ref(key)}: must be >= {minimum}")
    return v


def _parse_float(sec: _Section, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{sec.ref(key)}: {raw!r} is not a number") from None


def _parse_fraction_list(sec: _Section, key: str, raw: str) -> tuple[float, ...]:
    toks = raw.split()
    if not toks:
        raise ConfigError(f"{sec.ref(key)}: empty list")
    vals = []
    for t in toks:
        v = _parse_float(sec, key, t)
        if not (0.0 < v <= 1.0):
            raise ConfigError(f"{sec.ref(key)}: {t} is outside (0, 1]")
        vals.append(v)
    return tuple(vals)


def _parse_bool(sec: _Section, key: str, default: bool) -> bool:
    raw = sec.get(key)
    if raw is None:
        return default
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{sec.ref(key)}: {raw!r} is not a boolean")


def _parse_schema(sec: _Section) -> SchemaConfig:
    class_name = sec.require("class")
    preds: list[PredictorSpec] = []
    for raw in sec.get_all("categorical"):
        if ":" not in raw:
            raise ConfigError(f"{sec.ref('categorical')}: expected name:lvl1|lvl2, got {raw!r}")
        name, levels = raw.split(":", 1)
        lv = tuple(s.strip() for s in levels.split("|"))
        if any(not s for s in lv):
            raise ConfigError(f"{sec.ref('categorical')}: empty level in {raw!r}")
        try:
            preds.append(PredictorSpec(name.strip(), CATEGORICAL, lv))
        except InvalidParameter as exc:
            raise ConfigError(f"{sec.ref('categorical')}: {exc}") from None
    for raw in sec.get_all("numeric"):
        preds.append(PredictorSpec(raw.strip(), NUMERIC))
    try:
        return SchemaConfig(class_name=class_name, predictors=tuple(preds))
    except InvalidParameter as exc:
        raise ConfigError(f"[data]: {exc}") from None


@dataclass(frozen=True)
class SynthSpec:
    n: int
    imbalance: float
    seed: Optional[int]
    signals: tuple[SignalSpec, ...]
    noise: int
    out: Optional[str]


def _parse_signal(sec: _Section, raw: str) -> SignalSpec:
    parts = raw.split(":")
    if len(parts) < 3:
        raise ConfigError(
            f"{sec.ref('signal')}: expected name:kind:effect[:lvl1|lvl2...], got {raw!r}"
        )
    name, kind, effect = parts[0].strip(), parts[1].strip(), parts[2].strip()
    if kind not in (CATEGORICAL, NUMERIC):
        raise ConfigError(f"{sec.ref('signal')}: kind must be categorical or numeric")
    eff = _parse_float(sec, "signal", effect)
    if kind == CATEGORICAL:
        levels = tuple(s.strip() for s in parts[3].split("|")) if len(parts) > 3 else ("a", "b", "c")
        if len(levels) < 2 or any(not s for s in levels):
            raise ConfigError(f"{sec.ref('signal')}: bad level list in {raw!r}")
        return SignalSpec(name, CATEGORICAL, eff, levels)
    if len(parts) > 3:
        raise ConfigError(f"{sec.ref('signal')}: numeric signal takes no levels")
    return SignalSpec(name, NUMERIC, eff)


def _parse_synthetic(sec: _Section) -> SynthSpec:
    n = _parse_int(sec, "n", minimum=20)
    if n is None:
        raise ConfigError("[synthetic] n is required")
    imbalance = _parse_float(sec, "imbalance", sec.require("imbalance"))
    if not (0.0 < imbalance <= 1.0):
        raise ConfigError(f"{sec.ref('imbalance')}: must be in (0, 1]")
    signals = tuple(_parse_signal(sec, raw) for raw in sec.get_all("signal"))
    noise = _parse_int(sec, "noise", default=0, minimum=0)
    if not signals and noise == 0:
        raise ConfigError("[synthetic]: need at least one signal or noise predictor")
    return SynthSpec(
        n=n, imbalance=imbalance, seed=_parse_int(sec, "seed"),
        signals=signals, noise=noise, out=sec.get("out"),
    )


def _parse_mode(sec: _Section, raw: str, schema: SchemaConfig) -> Mode:
    parts = [p.strip() for p in raw.split(":")]
    kind = parts[0]

    def strat_predictor(name: str) -> str:
        for p in schema.predictors:
            if p.name == name:
                if p.kind != CATEGORICAL:
                    raise ConfigError(
                        f"{sec.ref('mode')}: stratifying predictor {name!r} is not categorical"
                    )
                return name
        raise ConfigError(f"{sec.ref('mode')}: unknown predictor {name!r}")

    if kind == "unstratified":
        if len(parts) != 1:
            raise ConfigError(f"{sec.ref('mode')}: unstratified takes no arguments")
        return Unstratified()
    if kind == "proportional":
        if len(parts) != 2:
            raise ConfigError(f"{sec.ref('mode')}: expected proportional:PREDICTOR")
        return Proportional(strat_predictor(parts[1]))
    if kind == "min_criterion":
        if len(parts) not in (3, 4):
            raise ConfigError(
                f"{sec.ref('mode')}: expected min_criterion:PREDICTOR:MIN[:RETRIES]"
            )
        pred = strat_predictor(parts[1])
        try:
            m = int(parts[2])
            retries = int(parts[3]) if len(parts) == 4 else 10
            return MinCriterion(pred, m, retries)
        except (ValueError, InvalidParameter) as exc:
            raise ConfigError(f"{sec.ref('mode')}: {exc}") from None
    raise ConfigError(f"{sec.ref('mode')}: unknown mode {kind!r}")


_COMPARE_RE = re.compile(r"^(\S+)\s*(<=|>=|<|>)\s*(\S+)$")
_INTERVAL_RE = re.compile(r"^(\S+)\s+in\s+\[\s*([^,\]]+)\s*,\s*([^,\]]+)\s*\]$")
_SUBSET_RE = re.compile(r"^(\S+)\s+in\s+(\S+)$")


def _parse_condition(sec: _Section, token: str, schema: SchemaConfig):
    specs = {p.name: p for p in schema.predictors}

    def spec_of(name, want_kind):
        sp = specs.get(name)
        if sp is None:
            raise ConfigError(f"{sec.ref('forbid')}: unknown predictor {name!r}")
        if sp.kind != want_kind:
            raise ConfigError(
                f"{sec.ref('forbid')}: predictor {name!r} is {sp.kind}, condition wants {want_kind}"
            )
        return sp

    m = _COMPARE_RE.match(token)
    if m:
        name, op, val = m.groups()
        spec_of(name, NUMERIC)
        v = _parse_float(sec, "forbid", val)
        if op == "<=":
            return NumCondition(name, hi=v, hi_closed=True)
        if op == "<":
            return NumCondition(name, hi=v, hi_closed=False)
        if op == ">=":
            return NumCondition(name, lo=v, lo_closed=True)
        return NumCondition(name, lo=v, lo_closed=False)
    m = _INTERVAL_RE.match(token)
    if m:
        name, lo, hi = m.groups()
        spec_of(name, NUMERIC)
        vlo = _parse_float(sec, "forbid", lo)
        vhi = _parse_float(sec, "forbid", hi)
        if not (math.isfinite(vlo) and math.isfinite(vhi)) or vlo > vhi:
            raise ConfigError(f"{sec.ref('forbid')}: bad interval [{lo},{hi}]")
        return NumCondition(name, lo=vlo, hi=vhi)
    m = _SUBSET_RE.match(token)
    if m:
        name, levels = m.groups()
        sp = spec_of(name, CATEGORICAL)
        lv = [s.strip() for s in levels.split("|")]
        unknown = [s for s in lv if s not in sp.levels]
        if unknown:
            raise ConfigError(
                f"{sec.ref('forbid')}: {name!r} has no level(s) {', '.join(unknown)}"
            )
        return CatCondition(name, frozenset(lv))
    raise ConfigError(f"{sec.ref('forbid')}: cannot parse condition {token!r}")


def _parse_pattern(sec: _Section, raw: str, schema: SchemaConfig) -> ForbiddenPattern:
    tokens = [t.strip() for t in raw.split("&")]
    if any(not t for t in tokens):
        raise ConfigError(f"{sec.ref('forbid')}: empty condition in {raw!r}")
    return ForbiddenPattern(tuple(_parse_condition(sec, t, schema) for t in tokens))


def _parse_delimiter(sec: _Section) -> str:
    raw = sec.get("delimiter", ",")
    if raw.lower() == "tab":
        return "\t"
    if len(raw) != 1:
        raise ConfigError(f"{sec.ref('delimiter')}: must be one character or 'tab'")
    return raw


def _parse_tree_settings(sec: Optional[_Section]) -> TreeSettings:
    if sec is None:
        return TreeSettings()
    kwargs = {}
    alpha_raw = sec.get("alpha")
    if alpha_raw is not None:
        kwargs["alpha"] = _parse_float(sec, "alpha", alpha_raw)
    for key in ("min_split", "min_bucket", "n_perm", "exact_max_rows"):
        v = _parse_int(sec, key)
        if v is not None:
            kwargs[key] = v
    depth_raw = sec.get("max_depth")
    if depth_raw is not None and depth_raw.lower() != "none":
        kwargs["max_depth"] = _parse_int(sec, "max_depth")
    try:
        return TreeSettings(**kwargs)
    except InvalidParameter as exc:
        raise ConfigError(f"[ctree]: {exc}") from None


@dataclass(frozen=True)
class RunConfig:
    source: str                        # "file" | "synthetic"
    file_path: Optional[Path]
    delimiter: str
    schema: SchemaConfig
    synth: Optional[SynthSpec]
    psmall_values: tuple[float, ...]
    plarge_values: tuple[float, ...]
    repetitions: int
    k_best: int
    thresholds: tuple[float, ...]
    modes: tuple[Mode, ...]
    patterns: tuple[ForbiddenPattern, ...]
    master_seed: int
    tree_settings: TreeSettings
    importance_enabled: bool
    importance_repeats: int
    out_dir: Path = field(default=Path("out"))


def _synthetic_schema(spec: SynthSpec) -> SchemaConfig:
    try:
        return synthetic_schema(spec.signals, spec.noise)
    except InvalidParameter as exc:
        raise ConfigError(f"[synthetic]: {exc}") from None


def load_config(path) -> RunConfig:
    """Parse and validate a run configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    base = path.parent
    sections = parse_sections(text)

    data_sec = _Section("data", sections.get("data", []))
    synth_sec = _Section("synthetic", sections["synthetic"]) if "synthetic" in sections else None
    grid_sec = _Section("grid", sections.get("grid", []))
    ctree_sec = _Section("ctree", sections["ctree"]) if "ctree" in sections else None
    imp_sec = _Section("importance", sections.get("importance", []))
    out_sec = _Section("output", sections.get("output", []))

    file_raw = data_sec.get("file")
    if file_raw is not None and synth_sec is not None:
        raise ConfigError("[data] file and [synthetic] are mutually exclusive")
    if file_raw is None and synth_sec is None:
        raise ConfigError("need [data] file or a [synthetic] section")

    delimiter = _parse_delimiter(data_sec)
    if file_raw is not None:
        source = "file"
        file_path = base / file_raw if not Path(file_raw).is_absolute() else Path(file_raw)
        schema = _parse_schema(data_sec)
        synth = None
    else:
        source = "synthetic"
        file_path = None
        for key in ("class", "categorical", "numeric"):
            if data_sec.get(key) is not None or data_sec.get_all(key):
                raise ConfigError(f"[data] {key} is not used with a synthetic source")
        synth = _parse_synthetic(synth_sec)
        schema = _synthetic_schema(synth)

    if grid_sec.get("psmall") is None or grid_sec.get("plarge") is None:
        raise ConfigError("[grid] psmall and plarge are required")
    psmall = _parse_fraction_list(grid_sec, "psmall", grid_sec.require("psmall"))
    plarge = _parse_fraction_list(grid_sec, "plarge", grid_sec.require("plarge"))
    repetitions = _parse_int(grid_sec, "repetitions", default=100, minimum=1)
    k_best = _parse_int(grid_sec, "k_best", default=3, minimum=1)
    if repetitions < k_best:
        raise ConfigError("[grid] repetitions: must be >= k_best")
    thr_raw = grid_sec.get("thresholds", "0.5")
    thresholds = _parse_fraction_list(grid_sec, "thresholds", thr_raw)
    mode_raws = grid_sec.get_all("mode") or ["unstratified"]
    modes = tuple(_parse_mode(grid_sec, raw, schema) for raw in mode_raws)
    if len(set(m.tag for m in modes)) != len(modes):
        raise ConfigError("[grid] mode: duplicate modes")
    patterns = tuple(
        _parse_pattern(grid_sec, raw, schema) for raw in grid_sec.get_all("forbid")
    )
    master_seed = _parse_int(grid_sec, "seed", default=0)

    return RunConfig(
        source=source,
        file_path=file_path,
        delimiter=delimiter,
        schema=schema,
        synth=synth,
        psmall_values=psmall,
        plarge_values=plarge,
        repetitions=repetitions,
        k_best=k_best,
        thresholds=thresholds,
        modes=modes,
        patterns=patterns,
        master_seed=master_seed,
        tree_settings=_parse_tree_settings(ctree_sec),
        importance_enabled=_parse_bool(imp_sec, "enabled", True),
        importance_repeats=_parse_int(imp_sec, "repeats", default=1, minimum=1),
        out_dir=Path(out_sec.get("dir", "out")),
    )
