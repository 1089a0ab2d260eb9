"""Shared fixtures: the UCI optical digits file and synthetic tabular data.

The digits matrix ships with scikit-learn, so tests exercise the real
benchmark file layout without any network access.  The two synthetic
generators mimic the shapes of the public survival (n=891, p=8) and census
(p=108, mostly binary features) benchmarks.
"""

from __future__ import annotations

import numpy as np
import pytest

from widegbt import Dataset, load_csv


@pytest.fixture(scope="session")
def digits_csv(tmp_path_factory) -> str:
    from sklearn.datasets import load_digits

    X, y = load_digits(return_X_y=True)
    path = tmp_path_factory.mktemp("data") / "digits.csv"
    with open(path, "w", encoding="utf-8") as fh:
        for row, label in zip(X, y):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")
    return str(path)


@pytest.fixture(scope="session")
def digits_dataset(digits_csv) -> Dataset:
    return load_csv(digits_csv, label_spec=-1, task="multiclass", has_header=False)


def synth_binary_dataset(
    n: int, p: int, n_informative: int, seed: int, n_binary: int = 0, noise: float = 0.5
) -> Dataset:
    """Binary-task dataset with a latent-logit signal over a feature subset.

    ``n_binary`` leading columns are thresholded to {0,1} to mimic one-hot
    encoded inputs.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    if n_binary:
        X[:, :n_binary] = (X[:, :n_binary] > 0.0).astype(np.float64)
    w = np.zeros(p)
    idx = rng.permutation(p)[:n_informative]
    w[idx] = rng.normal(size=n_informative) * 1.5
    logits = X @ w + rng.normal(size=n) * noise
    # interaction term so trees have depth-wise structure to find
    logits += 1.2 * X[:, idx[0]] * X[:, idx[-1]]
    y = (logits > np.median(logits)).astype(np.float64).reshape(-1, 1)
    return Dataset(features=X, labels=y, task="binary")


def titanic_like(seed: int = 0) -> Dataset:
    return synth_binary_dataset(n=891, p=8, n_informative=5, seed=seed, n_binary=3)


def adult_like(seed: int = 0) -> Dataset:
    return synth_binary_dataset(
        n=2000, p=108, n_informative=12, seed=seed, n_binary=100, noise=0.8
    )


def synth_regression_dataset(n: int, p: int, seed: int) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = X[:, 0] * 2.0 - np.abs(X[:, 1]) + 0.3 * X[:, 2] * X[:, 0] + rng.normal(size=n) * 0.2
    return Dataset(features=X, labels=y.reshape(-1, 1), task="regression")


def synth_multiclass_dataset(n: int, p: int, d: int, seed: int) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    W = rng.normal(size=(p, d))
    scores = X @ W + rng.normal(size=(n, d)) * 0.5
    labels = np.zeros((n, d))
    labels[np.arange(n), np.argmax(scores, axis=1)] = 1.0
    return Dataset(features=X, labels=labels, task="multiclass")


@pytest.fixture()
def tiny_regression() -> Dataset:
    return synth_regression_dataset(n=60, p=4, seed=11)


@pytest.fixture()
def tiny_binary() -> Dataset:
    return synth_binary_dataset(n=60, p=4, n_informative=3, seed=12)


@pytest.fixture()
def tiny_multiclass() -> Dataset:
    return synth_multiclass_dataset(n=60, p=4, d=3, seed=13)
