"""Evaluation metrics: classification error rate, RMSE and mean log-loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import P_CLAMP, sigmoid, softmax_rows

METRIC_KINDS = ("error_rate", "rmse", "logloss")


@dataclass(frozen=True)
class MetricReport:
    metric_kind: str
    value: float
    n_eval: int

    def line(self) -> str:
        return f"{self.metric_kind} {self.value:.6g} n={self.n_eval}"


def error_rate(pred_labels: np.ndarray, true_labels: np.ndarray) -> float:
    """Fraction of label mismatches."""
    pred_labels = np.asarray(pred_labels).ravel()
    true_labels = np.asarray(true_labels).ravel()
    if pred_labels.size == 0:
        raise ValueError("error_rate of empty input")
    if pred_labels.shape != true_labels.shape:
        raise ValueError("prediction/label length mismatch")
    return float(np.mean(pred_labels != true_labels))


def rmse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Root mean squared difference."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.size == 0:
        raise ValueError("rmse of empty input")
    if pred.shape != truth.shape:
        raise ValueError("prediction/truth length mismatch")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def logloss(raw_scores: np.ndarray, Y: np.ndarray, task: str) -> float:
    """Mean per-sample negative log-likelihood of raw scores.

    Probabilities use the same stable transforms and clamps as the training
    objective: sigmoid for binary, row softmax for multiclass.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    scores = np.asarray(raw_scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = scores.reshape(-1, 1)
    if scores.shape[0] != Y.shape[0] or scores.shape[0] == 0:
        raise ValueError("score/label shape mismatch")
    if task == "binary":
        if scores.shape[1] != 1 or Y.shape[1] != 1:
            raise ValueError("binary logloss expects single-column scores and labels")
        P = np.clip(sigmoid(scores), P_CLAMP, 1.0 - P_CLAMP)
        per_sample = -(Y * np.log(P) + (1.0 - Y) * np.log(1.0 - P))
        return float(np.mean(per_sample))
    if task == "multiclass":
        if scores.shape != Y.shape:
            raise ValueError("multiclass logloss expects scores shaped like labels")
        P = np.clip(softmax_rows(scores), P_CLAMP, None)
        return float(np.mean(-np.sum(Y * np.log(P), axis=1)))
    raise ValueError(f"logloss undefined for task {task!r}")
