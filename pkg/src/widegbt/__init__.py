"""Gradient boosted trees with a widened ensemble output.

The ensemble produces q raw score columns which a fixed q x d matrix maps
into the d-dimensional label space before the loss; q = d with the identity
matrix recovers standard second-order gradient boosting.
"""

from .beta import BETA_KINDS, BetaMatrix, BetaSpec, build_beta, widen
from .booster import (
    BoostParams,
    Ensemble,
    EvalTrace,
    load_model,
    predict,
    predict_labels,
    save_model,
    staged_predict,
    train,
)
from .dataset import (
    Dataset,
    DatasetError,
    SplitSpec,
    load_csv,
    load_libsvm,
    train_test_split,
    write_csv,
)
from .harness import (
    ExperimentReport,
    SearchSpace,
    TrialRecord,
    budgeted_gb,
    random_search,
    width_sweep,
)
from .metrics import MetricReport, error_rate, logloss, rmse
from .objective import (
    GradHess,
    WideObjective,
    grad_hess_binary,
    grad_hess_multiclass,
    grad_hess_squared,
    loss_value,
)
from .tree import Tree, TreeParams, fit_tree, predict_tree, presort_features

__version__ = "0.1.0"

__all__ = [
    "BETA_KINDS",
    "BetaMatrix",
    "BetaSpec",
    "BoostParams",
    "Dataset",
    "DatasetError",
    "Ensemble",
    "EvalTrace",
    "ExperimentReport",
    "GradHess",
    "MetricReport",
    "SearchSpace",
    "SplitSpec",
    "TrialRecord",
    "Tree",
    "TreeParams",
    "WideObjective",
    "budgeted_gb",
    "build_beta",
    "error_rate",
    "fit_tree",
    "grad_hess_binary",
    "grad_hess_multiclass",
    "grad_hess_squared",
    "load_csv",
    "load_libsvm",
    "load_model",
    "logloss",
    "loss_value",
    "predict",
    "predict_labels",
    "predict_tree",
    "presort_features",
    "random_search",
    "rmse",
    "save_model",
    "staged_predict",
    "train",
    "train_test_split",
    "widen",
    "width_sweep",
    "write_csv",
]
