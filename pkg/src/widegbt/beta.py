"""Construction of the widening matrix that maps ensemble output to label space.

The ensemble produces raw scores with q columns; a fixed q x d matrix carries
them into the d-dimensional label space before the loss is evaluated.  Four
construction kinds are supported:

* ``I``   -- the d x d identity stacked over (q - d) rows of Uniform(0,1) draws.
* ``I_n`` -- same as ``I``, then every column divided by its sum.
* ``R``   -- every entry a Uniform(0,1) draw.
* ``R_n`` -- same as ``R``, then every column divided by its sum.

With q == d and kind ``I`` the matrix is exactly the identity and training
reduces to standard gradient boosting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BETA_KINDS = ("I", "I_n", "R", "R_n")


@dataclass(frozen=True)
class BetaSpec:
    """Recipe for a widening matrix: kind, shape (q x d) and RNG seed.

    Kinds ``I`` and ``I_n`` embed an identity block and therefore require
    q >= d; the all-random kinds also allow q < d (a "narrow" ensemble).
    """

    kind: str
    q: int
    d: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in BETA_KINDS:
            raise ValueError(f"unknown beta kind {self.kind!r}; expected one of {BETA_KINDS}")
        if self.q < 1 or self.d < 1:
            raise ValueError(f"beta dimensions must be positive, got q={self.q}, d={self.d}")
        if self.kind in ("I", "I_n") and self.q < self.d:
            raise ValueError(
                f"beta kind {self.kind!r} requires q >= d, got q={self.q}, d={self.d}"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class BetaMatrix:
    """A realized widening matrix together with the spec that produced it."""

    values: np.ndarray
    spec: BetaSpec

    @property
    def q(self) -> int:
        return self.spec.q

    @property
    def d(self) -> int:
        return self.spec.d


def _normalize_columns(values: np.ndarray) -> np.ndarray:
    sums = values.sum(axis=0)
    if np.any(sums == 0.0):
        raise ValueError("cannot normalize beta: a column sums to zero")
    return values / sums


def build_beta(spec: BetaSpec) -> BetaMatrix:
    """Construct the widening matrix for ``spec``.

    Deterministic: random entries come from a PCG64 generator seeded with
    ``spec.seed``, so the same spec always yields a bit-identical matrix.
    Uniform(0,1) draws are from the half-open interval [0, 1).
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    q, d = spec.q, spec.d
    if spec.kind in ("I", "I_n"):
        values = np.vstack([np.eye(d), rng.random((q - d, d))])
    else:
        values = rng.random((q, d))
    if spec.kind in ("I_n", "R_n"):
        values = _normalize_columns(values)
    values.flags.writeable = False
    return BetaMatrix(values=values, spec=spec)


def widen(F: np.ndarray, beta: BetaMatrix) -> np.ndarray:
    """Map raw ensemble scores (n x q) into label space (n x d)."""
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2 or F.shape[1] != beta.q:
        raise ValueError(f"expected scores with {beta.q} columns, got shape {F.shape}")
    return F @ beta.values
