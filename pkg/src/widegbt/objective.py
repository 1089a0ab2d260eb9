"""Loss values, gradients and element-wise second derivatives of the widened losses.

All derivatives are taken with respect to the raw ensemble scores F (n x q);
the widening matrix enters through the chain rule.  With B the q x d matrix
and Z = F B:

* squared error:      L = 1/2 ||Y - Z||^2
                      grad = (Z - Y) B^T,  hess row = (B_1^2, ..., B_q^2)
* binary log-loss:    P = sigmoid(Z)
                      grad = (P - Y) B^T,  hess = (P (1-P)) (B*B)^T
* multiclass log-loss: P = row softmax(Z)
                      grad = (P - Y) B^T,  hess = P (B*B)^T - (P B^T)^2

Log-losses are negative log-likelihoods, so all three losses are minimized
and every hessian entry is nonnegative.  Only diagonal second derivatives are
computed; cross-terms are not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beta import BetaMatrix

LOSS_KINDS = ("squared_error", "binary_logloss", "multiclass_logloss")

# Probabilities are clamped away from 0 before logs; scores can grow with
# boosting rounds and saturate sigmoid/softmax exactly.
P_CLAMP = 1e-15

# Floor applied to hessians before leaf fitting (not by the raw API here).
HESS_FLOOR = 1e-16


@dataclass(frozen=True)
class GradHess:
    """Per-element gradient and second derivative, each shaped like F (n x q)."""

    grad: np.ndarray
    hess: np.ndarray


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, computed sign-split."""
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax_rows(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction."""
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class WideObjective:
    """Bundles a loss kind with the widening matrix it is evaluated through."""

    loss_kind: str
    beta: BetaMatrix

    def __post_init__(self) -> None:
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(
                f"unknown loss kind {self.loss_kind!r}; expected one of {LOSS_KINDS}"
            )
        d = self.beta.d
        if self.loss_kind in ("squared_error", "binary_logloss") and d != 1:
            raise ValueError(f"{self.loss_kind} requires d=1, got d={d}")
        if self.loss_kind == "multiclass_logloss" and d < 2:
            raise ValueError(f"multiclass_logloss requires d>=2, got d={d}")

    def loss_value(self, Y: np.ndarray, F: np.ndarray) -> float:
        return loss_value(self, Y, F)

    def grad_hess(self, Y: np.ndarray, F: np.ndarray) -> GradHess:
        if self.loss_kind == "squared_error":
            return grad_hess_squared(Y, F, self.beta)
        if self.loss_kind == "binary_logloss":
            return grad_hess_binary(Y, F, self.beta)
        return grad_hess_multiclass(Y, F, self.beta)


def _check_shapes(Y: np.ndarray, F: np.ndarray, beta: BetaMatrix) -> tuple[np.ndarray, np.ndarray]:
    Y = np.asarray(Y, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2 or F.shape[1] != beta.q:
        raise ValueError(f"F must be n x {beta.q}, got shape {F.shape}")
    if Y.ndim != 2 or Y.shape != (F.shape[0], beta.d):
        raise ValueError(f"Y must be {F.shape[0]} x {beta.d}, got shape {Y.shape}")
    return Y, F


def loss_value(obj: WideObjective, Y: np.ndarray, F: np.ndarray) -> float:
    """Total loss over all samples (a sum, not a mean)."""
    Y, F = _check_shapes(Y, F, obj.beta)
    Z = F @ obj.beta.values
    if obj.loss_kind == "squared_error":
        r = Y - Z
        return float(0.5 * np.sum(r * r))
    if obj.loss_kind == "binary_logloss":
        P = np.clip(sigmoid(Z), P_CLAMP, 1.0 - P_CLAMP)
        return float(-np.sum(Y * np.log(P) + (1.0 - Y) * np.log(1.0 - P)))
    P = np.clip(softmax_rows(Z), P_CLAMP, None)
    return float(-np.sum(Y * np.log(P)))


def grad_hess_squared(Y: np.ndarray, F: np.ndarray, beta: BetaMatrix) -> GradHess:
    Y, F = _check_shapes(Y, F, beta)
    B = beta.values
    grad = (F @ B - Y) @ B.T
    hess = np.ones((F.shape[0], 1)) @ (B * B).T
    return GradHess(grad=grad, hess=hess)


def grad_hess_binary(Y: np.ndarray, F: np.ndarray, beta: BetaMatrix) -> GradHess:
    Y, F = _check_shapes(Y, F, beta)
    if not np.all((Y == 0.0) | (Y == 1.0)):
        raise ValueError("binary labels must be 0 or 1")
    B = beta.values
    P = sigmoid(F @ B)
    grad = (P - Y) @ B.T
    hess = (P * (1.0 - P)) @ (B * B).T
    return GradHess(grad=grad, hess=hess)


def grad_hess_multiclass(Y: np.ndarray, F: np.ndarray, beta: BetaMatrix) -> GradHess:
    Y, F = _check_shapes(Y, F, beta)
    if not _rows_one_hot(Y):
        raise ValueError("multiclass labels must be one-hot rows")
    B = beta.values
    P = softmax_rows(F @ B)
    grad = (P - Y) @ B.T
    PB = P @ B.T
    # Each entry is a variance under the row distribution P, so it is
    # nonnegative up to roundoff; clip the roundoff.
    hess = np.maximum(P @ (B * B).T - PB * PB, 0.0)
    return GradHess(grad=grad, hess=hess)


def _rows_one_hot(Y: np.ndarray) -> bool:
    if not np.all((Y == 0.0) | (Y == 1.0)):
        return False
    return bool(np.all(Y.sum(axis=1) == 1.0))
