"""Boosting loop, prediction and model persistence.

Each round evaluates the widened objective at the current raw scores F
(n x q) and fits one tree per output column j on the frozen gradient/hessian
columns, then applies F[:, j] += eta * tree_j(X).  Predictions are F mapped
into label space by the widening matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .beta import BetaMatrix, BetaSpec, build_beta, widen
from .dataset import Dataset
from .metrics import error_rate, logloss, rmse
from .objective import HESS_FLOOR, LOSS_KINDS, WideObjective
from .tree import Tree, TreeParams, fit_tree, predict_tree, presort_features

MODEL_FILE_VERSION = 1

TASK_FOR_LOSS = {
    "squared_error": "regression",
    "binary_logloss": "binary",
    "multiclass_logloss": "multiclass",
}
LOSS_FOR_TASK = {task: loss for loss, task in TASK_FOR_LOSS.items()}


@dataclass(frozen=True)
class BoostParams:
    """Training configuration: rounds, shrinkage, tree and widening settings."""

    rounds: int
    learning_rate: float = 0.1
    tree: TreeParams = field(default_factory=TreeParams)
    beta: BetaSpec = BetaSpec("I", 1, 1)
    loss_kind: str = "squared_error"
    base_score: float = 0.0

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        if not np.isfinite(self.base_score):
            raise ValueError("base_score must be finite")


@dataclass
class Ensemble:
    """Trained model: rounds x q trees, the widening matrix and metadata."""

    trees: list[list[Tree]]
    beta: BetaMatrix
    base_score: float
    params: BoostParams
    n_features: int
    task: str

    @property
    def q(self) -> int:
        return self.beta.q

    @property
    def d(self) -> int:
        return self.beta.d

    @property
    def rounds(self) -> int:
        return len(self.trees)

    @property
    def tree_count(self) -> int:
        return sum(len(r) for r in self.trees)


@dataclass
class EvalTrace:
    """Per-round series recorded during training.

    ``train_loss`` has rounds + 1 entries: the loss before any boosting,
    then after every round.  ``test_metric`` has one entry per round and is
    empty when no eval set was given.
    """

    train_loss: list[float] = field(default_factory=list)
    test_metric: list[float] = field(default_factory=list)
    metric_kind: str | None = None


def _metric_for(task: str, metric: str | None) -> str:
    if metric is not None:
        return metric
    return "rmse" if task == "regression" else "error_rate"


def _eval_metric(scores: np.ndarray, data: Dataset, metric_kind: str) -> float:
    if metric_kind == "error_rate":
        return error_rate(_labels_from_scores(scores, data.task), data.label_indices())
    if metric_kind == "rmse":
        return rmse(scores[:, 0], data.labels[:, 0])
    if metric_kind == "logloss":
        return logloss(scores, data.labels, data.task)
    raise ValueError(f"unknown metric {metric_kind!r}")


def _labels_from_scores(scores: np.ndarray, task: str) -> np.ndarray:
    if task == "binary":
        return (scores[:, 0] > 0.0).astype(np.int64)
    if task == "multiclass":
        return np.argmax(scores, axis=1)
    raise ValueError("labels undefined for regression scores")


def train(
    train_data: Dataset,
    params: BoostParams,
    eval_data: Dataset | None = None,
    eval_metric: str | None = None,
) -> tuple[Ensemble, EvalTrace]:
    """Run the boosting loop; returns the model and its per-round trace."""
    task = TASK_FOR_LOSS[params.loss_kind]
    if train_data.task != task:
        raise ValueError(
            f"loss {params.loss_kind!r} expects a {task} dataset, got {train_data.task!r}"
        )
    if params.beta.d != train_data.d:
        raise ValueError(
            f"beta maps to d={params.beta.d} but dataset labels have d={train_data.d}"
        )
    if eval_data is not None:
        if eval_data.task != train_data.task or eval_data.p != train_data.p:
            raise ValueError("eval dataset task/shape does not match training data")

    beta = build_beta(params.beta)
    obj = WideObjective(loss_kind=params.loss_kind, beta=beta)
    X, Y = train_data.features, train_data.labels
    n, q = train_data.n, params.beta.q
    F = np.full((n, q), params.base_score, dtype=np.float64)
    presort = presort_features(X)

    metric_kind = _metric_for(task, eval_metric)
    trace = EvalTrace(metric_kind=metric_kind if eval_data is not None else None)
    trace.train_loss.append(obj.loss_value(Y, F))
    F_eval = (
        np.full((eval_data.n, q), params.base_score, dtype=np.float64)
        if eval_data is not None
        else None
    )

    trees: list[list[Tree]] = []
    for r in range(params.rounds):
        gh = obj.grad_hess(Y, F)
        hess = np.maximum(gh.hess, HESS_FLOOR)
        round_trees: list[Tree] = []
        for j in range(q):
            tree = fit_tree(X, gh.grad[:, j], hess[:, j], params.tree, presort=presort)
            F[:, j] += params.learning_rate * predict_tree(tree, X, validate=False)
            if F_eval is not None:
                F_eval[:, j] += params.learning_rate * predict_tree(
                    tree, eval_data.features, validate=False
                )
            round_trees.append(tree)
        trees.append(round_trees)
        loss = obj.loss_value(Y, F)
        if not np.isfinite(loss):
            raise RuntimeError(f"non-finite training loss at round {r}")
        trace.train_loss.append(loss)
        if eval_data is not None and F_eval is not None:
            trace.test_metric.append(
                _eval_metric(widen(F_eval, beta), eval_data, metric_kind)
            )

    model = Ensemble(
        trees=trees,
        beta=beta,
        base_score=params.base_score,
        params=params,
        n_features=train_data.p,
        task=task,
    )
    return model, trace


def _raw_scores(model: Ensemble, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} feature columns, got shape {X.shape}"
        )
    if np.isnan(X).any():
        raise ValueError("NaN feature value at predict time")
    F = np.full((X.shape[0], model.q), model.base_score, dtype=np.float64)
    eta = model.params.learning_rate
    for round_trees in model.trees:
        for j, tree in enumerate(round_trees):
            F[:, j] += eta * predict_tree(tree, X, validate=False)
    return F


def predict(model: Ensemble, X: np.ndarray) -> np.ndarray:
    """Raw scores in label space (m x d)."""
    return widen(_raw_scores(model, X), model.beta)


def staged_predict(model: Ensemble, X: np.ndarray) -> Iterator[np.ndarray]:
    """Yield the m x d raw scores after each boosting round."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} feature columns, got shape {X.shape}"
        )
    if np.isnan(X).any():
        raise ValueError("NaN feature value at predict time")
    F = np.full((X.shape[0], model.q), model.base_score, dtype=np.float64)
    eta = model.params.learning_rate
    for round_trees in model.trees:
        for j, tree in enumerate(round_trees):
            F[:, j] += eta * predict_tree(tree, X, validate=False)
        yield widen(F, model.beta)


def predict_labels(model: Ensemble, X: np.ndarray) -> np.ndarray:
    """Hard labels: binary 1 iff score > 0; multiclass argmax, low index wins ties."""
    if model.task == "regression":
        raise ValueError("predict_labels is undefined for regression models")
    return _labels_from_scores(predict(model, X), model.task)


def save_model(model: Ensemble, path: str) -> None:
    """Serialize the model to the versioned JSON schema."""
    doc = {
        "version": MODEL_FILE_VERSION,
        "task": model.task,
        "params": {
            "rounds": model.params.rounds,
            "learning_rate": model.params.learning_rate,
            "loss_kind": model.params.loss_kind,
            "n_features": model.n_features,
            "tree": {
                "max_depth": model.params.tree.max_depth,
                "min_child_weight": model.params.tree.min_child_weight,
                "reg_lambda": model.params.tree.reg_lambda,
                "gamma": model.params.tree.gamma,
                "min_samples_leaf": model.params.tree.min_samples_leaf,
            },
        },
        "beta": {
            "spec": {
                "kind": model.beta.spec.kind,
                "q": model.beta.spec.q,
                "d": model.beta.spec.d,
                "seed": model.beta.spec.seed,
            },
            "values": [float(v) for v in model.beta.values.ravel()],
        },
        "base_score": model.base_score,
        "trees": [[{"nodes": t.to_node_dicts()} for t in r] for r in model.trees],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))


class ModelFormatError(ValueError):
    """Raised when a model file cannot be decoded against the schema."""


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ModelFormatError(f"{path}: model file missing key {key!r}")
    return doc[key]


def load_model(path: str) -> Ensemble:
    """Load a model saved by :func:`save_model`; rejects unknown versions."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a valid model file: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: model file must be a JSON object")
    version = _require(doc, "version", path)
    if version != MODEL_FILE_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported model file version {version!r} "
            f"(expected {MODEL_FILE_VERSION})"
        )
    try:
        task = _require(doc, "task", path)
        params_doc = _require(doc, "params", path)
        beta_doc = _require(doc, "beta", path)
        spec_doc = _require(beta_doc, "spec", path)
        spec = BetaSpec(
            kind=spec_doc["kind"],
            q=int(spec_doc["q"]),
            d=int(spec_doc["d"]),
            seed=int(spec_doc["seed"]),
        )
        values = np.asarray(beta_doc["values"], dtype=np.float64)
        if values.size != spec.q * spec.d:
            raise ModelFormatError(f"{path}: beta values do not match the spec shape")
        values = values.reshape(spec.q, spec.d)
        values.flags.writeable = False
        tree_doc = params_doc["tree"]
        params = BoostParams(
            rounds=int(params_doc["rounds"]),
            learning_rate=float(params_doc["learning_rate"]),
            tree=TreeParams(
                max_depth=int(tree_doc["max_depth"]),
                min_child_weight=float(tree_doc["min_child_weight"]),
                reg_lambda=float(tree_doc["reg_lambda"]),
                gamma=float(tree_doc["gamma"]),
                min_samples_leaf=int(tree_doc["min_samples_leaf"]),
            ),
            beta=spec,
            loss_kind=params_doc["loss_kind"],
            base_score=float(_require(doc, "base_score", path)),
        )
        trees = [
            [Tree.from_node_dicts(t["nodes"]) for t in round_doc]
            for round_doc in _require(doc, "trees", path)
        ]
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: model file violates schema: {exc}") from None
    if task != TASK_FOR_LOSS.get(params.loss_kind):
        raise ModelFormatError(f"{path}: task {task!r} inconsistent with loss kind")
    if any(len(r) != spec.q for r in trees):
        raise ModelFormatError(f"{path}: every round must contain exactly q={spec.q} trees")
    return Ensemble(
        trees=trees,
        beta=BetaMatrix(values=values, spec=spec),
        base_score=float(doc["base_score"]),
        params=params,
        n_features=int(params_doc["n_features"]),
        task=task,
    )
