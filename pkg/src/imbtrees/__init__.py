"""Undersampled conditional-inference-tree ensembles for imbalanced binary
classification: repeated two-sided undersampling over a (psmall, plarge)
grid with optional stratification, permutation-test tree learning,
threshold-adjusted prediction, balanced-accuracy model selection, and
normalized permutation-loss variable importance.
"""

from .data import (CATEGORICAL, NUMERIC, Dataset, PredictorSpec, SchemaConfig,
                   SignalSpec, class_counts, dataset_from_columns,
                   generate_synthetic, load_dataset, round_half_up,
                   write_dataset)
from .engine import (AccuracyTriple, CatCondition, CellResult, EnsembleModel,
                     ForbiddenPattern, GridSpec, NumCondition, ScoredTree,
                     balanced_accuracy, best_grid_tree, ensemble_predict,
                     evaluate_triple, fit_full_sample_tree, is_interpretable,
                     pooled_trees, run_cell, run_grid, threshold_sweep)
from .errors import (ConfigError, DataError, DegenerateInput, EmptySample,
                     ImbtreesError, InvalidParameter, LengthMismatch,
                     MissingClass, MissingValue, NoInterpretableTree,
                     NotBinary, SchemaMismatch, UnknownLevel)
from .importance import (ImportanceReport, PredictorImportance,
                         ensemble_importance, normalize_means,
                         permutation_loss)
from .kernels import backend_name
from .sampling import (MinCriterion, Proportional, SamplingPlan, TrainingSet,
                       Unstratified, balance_ratio, draw, undersample,
                       undersample_min_criterion, undersample_proportional)
from .tree import (Internal, Leaf, Tree, TreeSettings, fit_ctree,
                   leaf_frequencies, predict, to_text)

__version__ = "0.1.0"

__all__ = [
    "CATEGORICAL", "NUMERIC", "Dataset", "PredictorSpec", "SchemaConfig",
    "SignalSpec", "class_counts", "dataset_from_columns", "generate_synthetic",
    "load_dataset", "round_half_up", "write_dataset",
    "AccuracyTriple", "CatCondition", "CellResult", "EnsembleModel",
    "ForbiddenPattern", "GridSpec", "NumCondition", "ScoredTree",
    "balanced_accuracy", "best_grid_tree", "ensemble_predict",
    "evaluate_triple", "fit_full_sample_tree", "is_interpretable",
    "pooled_trees", "run_cell", "run_grid", "threshold_sweep",
    "ConfigError", "DataError", "DegenerateInput", "EmptySample",
    "ImbtreesError", "InvalidParameter", "LengthMismatch", "MissingClass",
    "MissingValue", "NoInterpretableTree", "NotBinary", "SchemaMismatch",
    "UnknownLevel",
    "ImportanceReport", "PredictorImportance", "ensemble_importance",
    "normalize_means", "permutation_loss",
    "backend_name",
    "MinCriterion", "Proportional", "SamplingPlan", "TrainingSet",
    "Unstratified", "balance_ratio", "draw", "undersample", "undersample_min_criterion",
    "undersample_proportional",
    "Internal", "Leaf", "Tree", "TreeSettings", "fit_ctree",
    "leaf_frequencies", "predict", "to_text",
    "__version__",
]
