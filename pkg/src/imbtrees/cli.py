"""Command-line front end.

    imbtrees run   --config cfg [--seed N] [--out DIR] [--threads N|auto]
    imbtrees synth --config cfg [--seed N]

`run` loads or generates the dataset, runs the undersampling grid for every
configured mode, and writes grid_best.tsv, grid_ensemble.tsv,
thresholds.tsv and (unless disabled) importance.tsv into the output
directory.  `synth` materializes the [synthetic] section as a dataset file.

Exit codes: 0 success, 2 configuration error, 3 data error.  Reports are
byte-identical for identical (config, seed), regardless of --threads.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import rng
from .config import RunConfig, load_config
from .data import generate_synthetic, load_dataset, write_dataset
from .engine import (GridSpec, best_grid_tree, fit_full_sample_tree,
                     pooled_trees, run_grid, threshold_sweep)
from .errors import ConfigError, DataError, ImbtreesError
from .importance import ensemble_importance
from .report import (render_grid_report, render_importance_report,
                     render_threshold_report)


def _parse_threads(raw: str) -> int:
    if raw == "auto":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"--threads {raw!r}: expected an integer or 'auto'") from None
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    return n


def _load_data(cfg: RunConfig):
    if cfg.source == "file":
        return load_dataset(cfg.file_path, cfg.schema, cfg.delimiter)
    synth = cfg.synth
    seed = synth.seed if synth.seed is not None else cfg.master_seed
    return generate_synthetic(synth.n, synth.imbalance, synth.signals,
                              synth.noise, seed=seed)


def cmd_run(cfg: RunConfig, threads: int, out_dir: Path) -> int:
    d = _load_data(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)

    per_mode = []
    for mode in cfg.modes:
        grid = GridSpec(
            psmall_values=cfg.psmall_values,
            plarge_values=cfg.plarge_values,
            repetitions=cfg.repetitions,
            k_best=cfg.k_best,
            mode=mode,
            thresholds=cfg.thresholds,
            patterns=cfg.patterns,
            master_seed=cfg.master_seed,
            tree_settings=cfg.tree_settings,
        )
        results = run_grid(d, grid, threads)
        per_mode.append((mode.tag, grid, results))
        for res in results:
            if res.no_interpretable:
                print(
                    f"warning: cell plarge={res.plarge} psmall={res.psmall} "
                    f"mode={res.mode_tag}: every tree was filtered as uninterpretable",
                    file=sys.stderr,
                )

    written = []

    def emit(name: str, text: str):
        target = out_dir / name
        target.write_text(text, encoding="utf-8")
        written.append(target)

    mode_results = [(tag, results) for tag, _, results in per_mode]
    emit("grid_best.tsv", render_grid_report(mode_results, "best"))
    emit("grid_ensemble.tsv", render_grid_report(mode_results, "ensemble"))

    # threshold report rows: per mode the grid's best tree, plus one tree
    # fit on all observations (mode-independent, so computed once).
    full_tree = fit_full_sample_tree(d, per_mode[0][1])
    threshold_rows = []
    for tag, _grid, results in per_mode:
        best = best_grid_tree(results)
        sweep = threshold_sweep(best.tree, d, cfg.thresholds) if best else None
        threshold_rows.append((f"best_undersampled:{tag}", sweep))
    threshold_rows.append(
        ("all_observations", threshold_sweep(full_tree, d, cfg.thresholds))
    )
    emit("thresholds.tsv", render_threshold_report(cfg.thresholds, threshold_rows))

    if cfg.importance_enabled:
        imp_rows = []
        for tag, grid, results in per_mode:
            trees, zero_fill = pooled_trees(results, cfg.k_best)
            if not trees:
                print(f"warning: mode {tag}: no trees for importance", file=sys.stderr)
                continue
            report = ensemble_importance(
                trees, d,
                seed=rng.substream(cfg.master_seed, rng.TAG_IMPORTANCE),
                zero_fill=zero_fill, repeats=cfg.importance_repeats,
            )
            imp_rows.append((tag, report))
        if imp_rows:
            emit("importance.tsv", render_importance_report(imp_rows))

    for target in written:
        print(target)
    return 0


def cmd_synth(cfg: RunConfig, seed_override) -> int:
    if cfg.synth is None:
        raise ConfigError("synth needs a [synthetic] section")
    if cfg.synth.out is None:
        raise ConfigError("[synthetic] out is required by the synth command")
    seed = cfg.synth.seed if cfg.synth.seed is not None else cfg.master_seed
    if seed_override is not None:
        seed = seed_override
    d = generate_synthetic(cfg.synth.n, cfg.synth.imbalance, cfg.synth.signals,
                           cfg.synth.noise, seed=seed)
    out = Path(cfg.synth.out)
    if out.parent != Path("."):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(d, out, cfg.delimiter)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imbtrees",
        description="Undersampled conditional-inference-tree ensembles "
                    "for imbalanced binary classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "synth"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configured master seed")
        if name == "run":
            p.add_argument("--out", default=None, help="override the output directory")
            p.add_argument("--threads", default="1", help="worker threads (int or 'auto')")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None and args.command == "run":
            cfg = replace_seed(cfg, args.seed)
        if args.command == "run":
            threads = _parse_threads(args.threads)
            out_dir = Path(args.out) if args.out is not None else cfg.out_dir
            return cmd_run(cfg, threads, out_dir)
        return cmd_synth(cfg, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ImbtreesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def replace_seed(cfg: RunConfig, seed: int) -> RunConfig:
    from dataclasses import replace
    return replace(cfg, master_seed=seed)


if __name__ == "__main__":
    raise SystemExit(main())
