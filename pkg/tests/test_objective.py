import math

import mpmath as mp
import numpy as np
import pytest

from widegbt import BetaSpec, build_beta
from widegbt.beta import BetaMatrix
from widegbt.objective import (
    GradHess,
    WideObjective,
    grad_hess_binary,
    grad_hess_multiclass,
    grad_hess_squared,
    loss_value,
    sigmoid,
    softmax_rows,
)

from oracles import fd_grad, fd_hess


def beta_of(values) -> BetaMatrix:
    values = np.asarray(values, dtype=np.float64)
    return BetaMatrix(values=values, spec=BetaSpec("R", values.shape[0], values.shape[1], 0))


def random_instance(rng, loss_kind, kind):
    """Random (Y, F, beta) with dimensions inside the acceptance envelope."""
    n = int(rng.integers(1, 9))
    if loss_kind == "multiclass_logloss":
        d = int(rng.integers(2, 6))
    else:
        d = 1
    q_lo = d if kind in ("I", "I_n") else 1
    q = int(rng.integers(q_lo, 7))
    beta = build_beta(BetaSpec(kind, q, d, int(rng.integers(0, 2**32))))
    F = rng.normal(size=(n, q)) * 1.5
    if loss_kind == "squared_error":
        Y = rng.normal(size=(n, 1)) * 2.0
    elif loss_kind == "binary_logloss":
        Y = rng.integers(0, 2, size=(n, 1)).astype(np.float64)
    else:
        Y = np.zeros((n, d))
        Y[np.arange(n), rng.integers(0, d, size=n)] = 1.0
    return Y, F, beta


def numeric_loss(loss_kind, Y, beta):
    """Loss as a plain function of F, written independently of the module."""
    B = beta.values

    if loss_kind == "squared_error":
        return lambda F: float(0.5 * np.sum((Y - F @ B) ** 2))
    if loss_kind == "binary_logloss":
        def nll(F):
            z = F @ B
            p = 1.0 / (1.0 + np.exp(-z))
            return float(-np.sum(Y * np.log(p) + (1.0 - Y) * np.log(1.0 - p)))

        return nll

    def nll_mc(F):
        z = F @ B
        e = np.exp(z - z.max(axis=1, keepdims=True))
        p = e / e.sum(axis=1, keepdims=True)
        return float(-np.sum(Y * np.log(p)))

    return nll_mc


GRAD_HESS = {
    "squared_error": grad_hess_squared,
    "binary_logloss": grad_hess_binary,
    "multiclass_logloss": grad_hess_multiclass,
}


class TestLossValue:
    def test_squared_error_half_factor(self):
        obj = WideObjective("squared_error", beta_of([[1.0]]))
        assert loss_value(obj, np.array([[3.0]]), np.array([[0.0]])) == 4.5

    def test_binary_at_even_odds(self):
        obj = WideObjective("binary_logloss", beta_of([[1.0]]))
        val = loss_value(obj, np.array([[1.0]]), np.array([[0.0]]))
        assert val == pytest.approx(math.log(2.0), rel=1e-12)

    def test_multiclass_uniform(self):
        obj = WideObjective("multiclass_logloss", beta_of(np.eye(3)))
        val = loss_value(obj, np.array([[1.0, 0.0, 0.0]]), np.zeros((1, 3)))
        assert val == pytest.approx(math.log(3.0), rel=1e-12)

    def test_shape_mismatch(self):
        obj = WideObjective("squared_error", beta_of([[1.0], [1.0]]))
        with pytest.raises(ValueError):
            loss_value(obj, np.array([[1.0]]), np.array([[1.0]]))

    def test_loss_kind_dim_constraints(self):
        with pytest.raises(ValueError):
            WideObjective("binary_logloss", build_beta(BetaSpec("R", 3, 2, 0)))
        with pytest.raises(ValueError):
            WideObjective("multiclass_logloss", beta_of([[1.0]]))


class TestSquaredError:
    def test_reduces_to_residual(self):
        gh = grad_hess_squared(np.array([[3.0]]), np.array([[0.0]]), beta_of([[1.0]]))
        assert np.array_equal(gh.grad, [[-3.0]])
        assert np.array_equal(gh.hess, [[1.0]])

    def test_frozen_derived_example(self):
        # Oracle first: finite differences of 0.5*(y - F b)^2 reproduce the
        # frozen values before the analytic path is trusted.
        Y, F = np.array([[0.0]]), np.array([[1.0, 1.0]])
        beta = beta_of([[2.0], [1.0]])
        lf = numeric_loss("squared_error", Y, beta)
        np.testing.assert_allclose(fd_grad(lf, F, 1e-5), [[6.0, 3.0]], atol=1e-6)
        np.testing.assert_allclose(fd_hess(lf, F, 2e-4), [[4.0, 1.0]], atol=1e-5)
        gh = grad_hess_squared(Y, F, beta)
        assert np.array_equal(gh.grad, [[6.0, 3.0]])
        assert np.array_equal(gh.hess, [[4.0, 1.0]])

    def test_zero_gradient_at_fit(self):
        rng = np.random.default_rng(0)
        beta = build_beta(BetaSpec("R", 4, 1, 2))
        F = rng.normal(size=(5, 4))
        Y = F @ beta.values
        gh = grad_hess_squared(Y, F, beta)
        np.testing.assert_allclose(gh.grad, 0.0, atol=1e-12)

    def test_hess_rows_are_beta_squared(self):
        beta = build_beta(BetaSpec("R", 3, 1, 4))
        gh = grad_hess_squared(np.zeros((6, 1)), np.zeros((6, 3)), beta)
        expected = np.tile((beta.values[:, 0] ** 2), (6, 1))
        np.testing.assert_allclose(gh.hess, expected, rtol=0, atol=0)


class TestBinaryLogloss:
    def test_even_odds_values(self):
        beta = beta_of([[0.5], [0.5]])
        gh = grad_hess_binary(np.array([[1.0]]), np.array([[0.0, 0.0]]), beta)
        np.testing.assert_allclose(gh.grad, [[-0.25, -0.25]], atol=1e-15)
        np.testing.assert_allclose(gh.hess, [[0.0625, 0.0625]], atol=1e-15)

    def test_saturation_is_finite(self):
        beta = beta_of([[1.0]])
        gh = grad_hess_binary(np.array([[0.0]]), np.array([[30.0]]), beta)
        assert gh.grad[0, 0] == pytest.approx(1.0, abs=1e-9)
        assert 0.0 <= gh.hess[0, 0] < 1e-9
        assert np.all(np.isfinite(gh.grad)) and np.all(np.isfinite(gh.hess))

    def test_rejects_non_binary_labels(self):
        with pytest.raises(ValueError):
            grad_hess_binary(np.array([[2.0]]), np.array([[0.0]]), beta_of([[1.0]]))

    def test_derived_example_against_high_precision_fd(self):
        # step 1e-5 central differences at 50 digits, 1e-6 relative
        beta = beta_of([[1.0], [2.0]])
        Y, F = np.array([[1.0]]), np.array([[0.3, -0.1]])
        g_fd, h_fd = _mp_fd_binary(Y, F, beta.values, step=1e-5)
        gh = grad_hess_binary(Y, F, beta)
        np.testing.assert_allclose(gh.grad, g_fd, rtol=1e-6)
        np.testing.assert_allclose(gh.hess, h_fd, rtol=1e-6)


def _mp_fd_binary(Y, F, B, step):
    mp.mp.dps = 50
    h = mp.mpf(float(step))

    def loss(cells):
        z = mp.fsum(cells[k] * mp.mpf(float(B[k, 0])) for k in range(len(B)))
        p = 1 / (1 + mp.exp(-z))
        y = mp.mpf(float(Y[0, 0]))
        return -(y * mp.log(p) + (1 - y) * mp.log(1 - p))

    base = [mp.mpf(float(v)) for v in F[0]]
    center = loss(base)
    grad = np.zeros_like(F)
    hess = np.zeros_like(F)
    for j in range(F.shape[1]):
        up = list(base)
        dn = list(base)
        up[j] += h
        dn[j] -= h
        lu, ld = loss(up), loss(dn)
        grad[0, j] = float((lu - ld) / (2 * h))
        hess[0, j] = float((lu - 2 * center + ld) / (h * h))
    return grad, hess


def _mp_fd_multiclass(Y, F, B, step):
    mp.mp.dps = 50
    h = mp.mpf(float(step))
    n, q = F.shape
    d = B.shape[1]
    Bm = [[mp.mpf(float(B[a, b])) for b in range(d)] for a in range(q)]

    def loss(cells):
        total = mp.mpf(0)
        for i in range(n):
            z = [mp.fsum(cells[i][k] * Bm[k][c] for k in range(q)) for c in range(d)]
            logsum = mp.log(mp.fsum(mp.exp(v) for v in z))
            for c in range(d):
                if Y[i, c] == 1.0:
                    total -= z[c] - logsum
        return total

    base = [[mp.mpf(float(v)) for v in row] for row in F]
    center = loss(base)
    grad = np.zeros_like(F)
    hess = np.zeros_like(F)
    for i in range(n):
        for j in range(q):
            up = [list(r) for r in base]
            dn = [list(r) for r in base]
            up[i][j] += h
            dn[i][j] -= h
            lu, ld = loss(up), loss(dn)
            grad[i, j] = float((lu - ld) / (2 * h))
            hess[i, j] = float((lu - 2 * center + ld) / (h * h))
    return grad, hess


class TestMulticlassLogloss:
    def test_uniform_softmax_row(self):
        beta = beta_of(np.eye(3))
        Y = np.array([[1.0, 0.0, 0.0]])
        gh = grad_hess_multiclass(Y, np.zeros((1, 3)), beta)
        np.testing.assert_allclose(gh.grad, [[-2 / 3, 1 / 3, 1 / 3]], atol=1e-15)
        np.testing.assert_allclose(gh.hess, [[2 / 9, 2 / 9, 2 / 9]], atol=1e-15)

    def test_identity_beta_hessian_is_p_times_one_minus_p(self):
        rng = np.random.default_rng(1)
        d = 4
        beta = build_beta(BetaSpec("I", d, d, 0))
        F = rng.normal(size=(7, d))
        Y = np.zeros((7, d))
        Y[np.arange(7), rng.integers(0, d, 7)] = 1.0
        gh = grad_hess_multiclass(Y, F, beta)
        P = softmax_rows(F)
        np.testing.assert_allclose(gh.hess, P * (1 - P), rtol=0, atol=1e-15)
        # grad rows sum to zero since both P and Y rows sum to 1
        np.testing.assert_allclose(gh.grad.sum(axis=1), 0.0, atol=1e-12)

    def test_rejects_non_one_hot(self):
        beta = beta_of(np.eye(2))
        with pytest.raises(ValueError):
            grad_hess_multiclass(np.array([[1.0, 1.0]]), np.zeros((1, 2)), beta)

    def test_derived_example_against_high_precision_fd(self):
        beta = build_beta(BetaSpec("R_n", 4, 3, 7))
        rng = np.random.default_rng(123)
        F = rng.normal(size=(3, 4))
        Y = np.zeros((3, 3))
        Y[np.arange(3), rng.integers(0, 3, 3)] = 1.0
        g_fd, h_fd = _mp_fd_multiclass(Y, F, beta.values, step=1e-5)
        gh = grad_hess_multiclass(Y, F, beta)
        np.testing.assert_allclose(gh.grad, g_fd, rtol=1e-6)
        np.testing.assert_allclose(gh.hess, h_fd, rtol=1e-6)


class TestGradHessProperties:
    """Seeded random-instance sweeps of the derivative identities."""

    @pytest.mark.parametrize("loss_kind", GRAD_HESS)
    def test_matches_finite_differences(self, loss_kind):
        rng = np.random.default_rng(hash(loss_kind) % 2**32)
        kinds = ("I", "I_n", "R", "R_n")
        for trial in range(40):
            Y, F, beta = random_instance(rng, loss_kind, kinds[trial % 4])
            gh = GRAD_HESS[loss_kind](Y, F, beta)
            lf = numeric_loss(loss_kind, Y, beta)
            g_fd = fd_grad(lf, F, 1e-5)
            h_fd = fd_hess(lf, F, 2e-4)
            assert np.all(np.abs(gh.grad - g_fd) <= np.maximum(1e-6, 1e-4 * np.abs(gh.grad)))
            assert np.all(np.abs(gh.hess - h_fd) <= np.maximum(1e-5, 1e-3 * np.abs(gh.hess)))

    @pytest.mark.parametrize("loss_kind", GRAD_HESS)
    def test_hessian_nonnegative(self, loss_kind):
        rng = np.random.default_rng(7)
        for trial in range(40):
            Y, F, beta = random_instance(rng, loss_kind, ("I", "I_n", "R", "R_n")[trial % 4])
            gh = GRAD_HESS[loss_kind](Y, F, beta)
            assert np.all(gh.hess >= 0.0)
            assert np.all(np.isfinite(gh.grad)) and np.all(np.isfinite(gh.hess))
            assert gh.grad.shape == F.shape == gh.hess.shape

    @pytest.mark.parametrize("loss_kind", GRAD_HESS)
    def test_chain_rule_consistency(self, loss_kind):
        # grad must equal (dL/dZ) B^T with dL/dZ obtained by finite
        # differences in the widened space Z = F B.
        rng = np.random.default_rng(21)
        for trial in range(10):
            Y, F, beta = random_instance(rng, loss_kind, ("I", "I_n", "R", "R_n")[trial % 4])
            gh = GRAD_HESS[loss_kind](Y, F, beta)
            Z = F @ beta.values
            lf_z = numeric_loss(loss_kind, Y, beta_of(np.eye(beta.d)))
            dldz = fd_grad(lf_z, Z, 1e-6)
            np.testing.assert_allclose(gh.grad, dldz @ beta.values.T, rtol=1e-4, atol=1e-6)

    def test_reduction_to_standard_formulas(self):
        # q = d with the identity matrix must reproduce the textbook
        # single-output objective values.
        rng = np.random.default_rng(17)
        n = 9
        # regression: grad = pred - y, hess = 1
        b1 = build_beta(BetaSpec("I", 1, 1, 0))
        F = rng.normal(size=(n, 1))
        Y = rng.normal(size=(n, 1))
        gh = grad_hess_squared(Y, F, b1)
        np.testing.assert_allclose(gh.grad, F - Y, atol=0)
        np.testing.assert_allclose(gh.hess, np.ones((n, 1)), atol=0)
        # binary: grad = p - y, hess = p(1-p)
        Yb = rng.integers(0, 2, size=(n, 1)).astype(float)
        gh = grad_hess_binary(Yb, F, b1)
        P = sigmoid(F)
        np.testing.assert_allclose(gh.grad, P - Yb, atol=0)
        np.testing.assert_allclose(gh.hess, P * (1 - P), atol=0)
        # multiclass handled in TestMulticlassLogloss above


class TestGradHessContainer:
    def test_rejects_nothing_but_holds_arrays(self):
        gh = GradHess(grad=np.zeros((2, 2)), hess=np.ones((2, 2)))
        assert gh.grad.shape == gh.hess.shape
