"""Deterministic TSV report rendering.

Accuracies print with 4 decimals, round half up on the exact binary value
(decimal.Decimal, no float re-rounding), matching the tables' precision.
Cells that produced no model (infeasible sampling, or every tree filtered)
print literally `0.0`, so they stay distinguishable from a genuine 0.0000.
"""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal
from typing import Optional, Sequence

from .engine import AccuracyTriple, CellResult
from .importance import ImportanceReport

ABSENT = "0.0"


def format_accuracy(x: float) -> str:
    return str(Decimal(x).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


def format_fraction(x: float) -> str:
    """Grid fractions like 0.07/0.85 print as given (shortest repr)."""
    return repr(float(x))


def format_percent(x: Optional[float]) -> str:
    return "NA" if x is None else str(Decimal(x).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _triple_cells(triple: Optional[AccuracyTriple]) -> list[str]:
    if triple is None:
        return [ABSENT, ABSENT, ABSENT]
    return [format_accuracy(triple.acc_large), format_accuracy(triple.acc_small),
            format_accuracy(triple.balanced)]


def render_grid_report(per_mode: Sequence[tuple[str, Sequence[CellResult]]],
                       which: str) -> str:
    """Grid report: one row per (plarge, psmall) cell, one accuracy
    column group (large, small, balanced) per sampling mode.

    which: "best" for best-tree triples, "ensemble" for ensemble triples.
    """
    header = ["plarge", "psmall"]
    for tag, _ in per_mode:
        header += [f"acc_large:{tag}", f"acc_small:{tag}", f"balanced:{tag}"]
    lines = ["\t".join(header)]
    n_cells = len(per_mode[0][1])
    for i in range(n_cells):
        first = per_mode[0][1][i]
        row = [format_fraction(first.plarge), format_fraction(first.psmall)]
        for _, results in per_mode:
            res = results[i]
            triple = res.best_triple if which == "best" else res.ensemble_triple
            row += _triple_cells(triple)
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def render_threshold_report(thresholds: Sequence[float],
                            rows: Sequence[tuple[str, Optional[Sequence[AccuracyTriple]]]]) -> str:
    """Threshold report: one row per model, balanced accuracy per threshold."""
    header = ["model"] + [format_fraction(t) for t in thresholds]
    lines = ["\t".join(header)]
    for label, sweep in rows:
        if sweep is None:
            cells = [ABSENT] * len(thresholds)
        else:
            cells = [format_accuracy(t.balanced) for t in sweep]
        lines.append("\t".join([label] + cells))
    return "\n".join(lines) + "\n"


def render_importance_report(rows: Sequence[tuple[str, ImportanceReport]]) -> str:
    """Importance report: one row per sampling mode, mean permutation loss
    per predictor, then normalized percent per predictor."""
    if not rows:
        raise ValueError("importance report needs at least one mode")
    names = [e.name for e in rows[0][1].entries]
    header = (["mode"] + [f"mean:{n}" for n in names]
              + [f"norm_pct:{n}" for n in names])
    lines = ["\t".join(header)]
    for tag, report in rows:
        by_name = {e.name: e for e in report.entries}
        cells = [tag]
        cells += [format_accuracy(by_name[n].mean_loss) for n in names]
        cells += [format_percent(by_name[n].normalized) for n in names]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
