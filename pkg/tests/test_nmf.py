import math

import numpy as np
import pytest

from chemnmf import (
    ConfigurationError,
    EpsilonPolicy,
    FactorPair,
    NonNegMatrix,
    ShapeMismatchError,
    SolveTrace,
    SolverConfig,
    activation_gradient,
    alpha_divergence,
    auxiliary_value,
    matmul,
    normalize_pair,
    random_init,
    solve_single_layer,
    update_activation,
    update_basis,
)
from conftest import random_system

ALPHA_GRID = (-1.0, 0.25, 0.5, 0.75, 0.99, 2.0)


def finite_difference_gradient(y, basis, activation, alpha, rel_step=1e-6):
    """Central-difference oracle for the activation gradient."""
    x = activation.a
    grad = np.zeros_like(x)
    for j in range(x.shape[0]):
        for t in range(x.shape[1]):
            h = rel_step * x[j, t]
            up = x.copy()
            up[j, t] += h
            down = x.copy()
            down[j, t] -= h
            f_up = alpha_divergence(y, matmul(basis, NonNegMatrix(up)), alpha)
            f_down = alpha_divergence(y, matmul(basis, NonNegMatrix(down)), alpha)
            grad[j, t] = (f_up - f_down) / (2.0 * h)
    return grad


class TestSolverConfig:
    @pytest.mark.parametrize("alpha", [0.0, 1.0])
    def test_rejects_degenerate_alpha(self, alpha):
        with pytest.raises(ConfigurationError):
            SolverConfig(alpha=alpha)

    def test_rejects_bad_limits(self):
        with pytest.raises(ConfigurationError):
            SolverConfig(alpha=0.5, max_iter=0)
        with pytest.raises(ConfigurationError):
            SolverConfig(alpha=0.5, tol=0.0)

    def test_negative_alpha_allowed(self):
        assert SolverConfig(alpha=-1.0).alpha == -1.0


class TestAlphaDivergence:
    def test_identical_arguments_zero(self, rng):
        m = NonNegMatrix(rng.uniform(0.1, 1.0, (4, 5)))
        for alpha in ALPHA_GRID:
            assert alpha_divergence(m, m, alpha) == pytest.approx(0.0, abs=1e-12)

    def test_hand_value_half(self):
        got = alpha_divergence(NonNegMatrix([[2.0]]), NonNegMatrix([[1.0]]), 0.5)
        assert got == pytest.approx(6.0 - 4.0 * math.sqrt(2.0), abs=1e-12)

    def test_hand_value_two(self):
        got = alpha_divergence(NonNegMatrix([[1.0]]), NonNegMatrix([[2.0]]), 2.0)
        assert got == pytest.approx(0.25, abs=1e-12)

    def test_rejects_degenerate_alpha(self):
        m = NonNegMatrix([[1.0]])
        with pytest.raises(ConfigurationError):
            alpha_divergence(m, m, 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            alpha_divergence(NonNegMatrix([[1.0]]), NonNegMatrix([[1.0, 2.0]]), 0.5)

    def test_non_negative_on_random_pairs(self, rng):
        for _ in range(50):
            a = NonNegMatrix(rng.uniform(0.05, 2.0, (3, 4)))
            b = NonNegMatrix(rng.uniform(0.05, 2.0, (3, 4)))
            for alpha in ALPHA_GRID:
                assert alpha_divergence(a, b, alpha) >= 0.0


class TestGradient:
    def test_zero_at_exact_fit(self, rng):
        _, basis, activation = random_system(rng)
        y = matmul(basis, activation)
        grad = activation_gradient(y, basis, activation, 0.5)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_hand_value(self):
        grad = activation_gradient(
            NonNegMatrix([[2.0]]), NonNegMatrix([[1.0]]), NonNegMatrix([[1.0]]), 0.5
        )
        assert grad[0, 0] == pytest.approx(2.0 - 2.0 * math.sqrt(2.0), abs=1e-12)

    def test_matches_finite_differences(self, rng):
        for _ in range(10):
            y, basis, activation = random_system(rng, 8, 8, 3, lo=0.2)
            for alpha in (0.25, 0.5, 2.0):
                grad = activation_gradient(y, basis, activation, alpha)
                oracle = finite_difference_gradient(y, basis, activation, alpha)
                scale = np.abs(oracle).max()
                np.testing.assert_allclose(grad, oracle, atol=1e-4 * max(scale, 1.0))


class TestUpdates:
    def test_fixed_point_of_activation_update(self, rng):
        _, basis, activation = random_system(rng)
        y = matmul(basis, activation)
        updated = update_activation(y, basis, activation, 0.5)
        np.testing.assert_allclose(updated.a, activation.a, atol=1e-12)

    def test_fixed_point_of_basis_update(self, rng):
        _, basis, activation = random_system(rng)
        y = matmul(basis, activation)
        updated = update_basis(y, basis, activation, 0.5)
        np.testing.assert_allclose(updated.a, basis.a, atol=1e-12)

    def test_scalar_activation_update(self):
        updated = update_activation(
            NonNegMatrix([[4.0]]), NonNegMatrix([[1.0]]), NonNegMatrix([[2.0]]), 0.5
        )
        assert updated.a[0, 0] == pytest.approx(4.0, abs=1e-12)

    def test_scalar_basis_update(self):
        updated = update_basis(
            NonNegMatrix([[4.0]]), NonNegMatrix([[2.0]]), NonNegMatrix([[1.0]]), 0.5
        )
        assert updated.a[0, 0] == pytest.approx(4.0, abs=1e-12)

    @pytest.mark.parametrize("alpha", ALPHA_GRID)
    def test_full_round_never_increases_cost(self, alpha, rng):
        for _ in range(50):
            y, basis, activation = random_system(rng, 12, 12, 4)
            before = alpha_divergence(y, matmul(basis, activation), alpha)
            activation = update_activation(y, basis, activation, alpha)
            basis = update_basis(y, basis, activation, alpha)
            pair = normalize_pair(FactorPair(basis, activation))
            after = alpha_divergence(
                y, matmul(pair.basis, pair.activation), alpha
            )
            assert after <= before + 1e-9

    def test_result_floored(self, rng):
        y = NonNegMatrix(rng.uniform(0.0, 1.0, (4, 4)))
        basis = NonNegMatrix(rng.uniform(0.1, 1.0, (4, 2)))
        activation = NonNegMatrix(rng.uniform(0.1, 1.0, (2, 4)))
        updated = update_activation(y, basis, activation, 0.5)
        assert (updated.a >= EpsilonPolicy().floor).all()


class TestNormalizePair:
    def test_already_normalized_unchanged(self, rng):
        basis = rng.uniform(0.1, 1.0, (4, 2))
        basis /= basis.sum(axis=0)
        pair = FactorPair(NonNegMatrix(basis), NonNegMatrix(rng.uniform(0.1, 1, (2, 3))))
        out = normalize_pair(pair)
        np.testing.assert_allclose(out.basis.a, pair.basis.a, atol=1e-15)
        np.testing.assert_allclose(out.activation.a, pair.activation.a, atol=1e-15)

    def test_hand_example(self):
        pair = FactorPair(NonNegMatrix([[2.0], [2.0]]), NonNegMatrix([[1.0]]))
        out = normalize_pair(pair)
        assert out.basis.to_lists() == [[0.5], [0.5]]
        assert out.activation.to_lists() == [[4.0]]

    def test_product_preserved(self, rng):
        for _ in range(20):
            _, basis, activation = random_system(rng)
            pair = FactorPair(basis, activation)
            out = normalize_pair(pair)
            np.testing.assert_allclose(
                matmul(out.basis, out.activation).a,
                matmul(basis, activation).a,
                atol=1e-10,
            )
            np.testing.assert_allclose(out.basis.a.sum(axis=0), 1.0, atol=1e-9)

    def test_zero_column_replaced(self):
        basis = NonNegMatrix([[1.0, 0.0], [1.0, 0.0]])
        activation = NonNegMatrix([[1.0, 2.0], [3.0, 4.0]])
        out = normalize_pair(FactorPair(basis, activation))
        np.testing.assert_allclose(out.basis.a[:, 1], 0.5)
        assert (out.activation.a[1] >= EpsilonPolicy().floor).all()


class TestRandomInit:
    def test_deterministic(self):
        a = random_init(4, 5, seed=7)
        b = random_init(4, 5, seed=7)
        np.testing.assert_array_equal(a.a, b.a)

    def test_range(self):
        m = random_init(20, 20, seed=1)
        assert (m.a >= 1e-12).all() and (m.a <= 1.0).all()

    def test_different_seeds_differ(self):
        a = random_init(4, 5, seed=1)
        b = random_init(4, 5, seed=2)
        assert (a.a != b.a).any()


class TestSolveSingleLayer:
    def test_recovers_rank_one(self, rng):
        y = NonNegMatrix(np.outer(rng.uniform(0.2, 1, 8), rng.uniform(0.2, 1, 9)))
        _, trace = solve_single_layer(
            y, 1, SolverConfig(alpha=0.5, max_iter=500, tol=1e-10, seed=0)
        )
        assert trace.final_divergence < 1e-6 * trace.initial_divergence

    def test_exact_init_converges_immediately(self, rng):
        _, basis, activation = random_system(rng)
        y = matmul(basis, activation)
        pair, trace = solve_single_layer(
            y,
            basis.cols,
            SolverConfig(alpha=0.5, seed=0),
            init=FactorPair(basis, activation),
        )
        assert trace.converged
        assert trace.iterations_run == 1
        assert trace.final_divergence == pytest.approx(0.0, abs=1e-9)

    def test_deterministic_trace(self, rng):
        y = NonNegMatrix(rng.uniform(0.1, 1.0, (10, 8)))
        cfg = SolverConfig(alpha=0.5, max_iter=40, seed=3)
        _, t1 = solve_single_layer(y, 3, cfg)
        _, t2 = solve_single_layer(y, 3, cfg)
        assert t1.divergences == t2.divergences
        assert t1.initial_divergence == t2.initial_divergence

    def test_trace_monotone_and_finite(self, rng):
        y = NonNegMatrix(rng.uniform(0.05, 1.0, (12, 9)))
        _, trace = solve_single_layer(
            y, 3, SolverConfig(alpha=0.75, max_iter=60, tol=1e-12, seed=5)
        )
        path = np.array(trace.path)
        assert (np.diff(path) <= 1e-9).all()
        assert np.isfinite(path).all() and (path >= 0).all()

    def test_normalized_output(self, rng):
        y = NonNegMatrix(rng.uniform(0.1, 1.0, (6, 7)))
        pair, _ = solve_single_layer(y, 2, SolverConfig(alpha=0.5, max_iter=20, seed=1))
        np.testing.assert_allclose(pair.basis.a.sum(axis=0), 1.0, atol=1e-9)

    def test_rank_too_large(self, rng):
        y = NonNegMatrix(rng.uniform(0.1, 1.0, (4, 3)))
        with pytest.raises(ConfigurationError):
            solve_single_layer(y, 4, SolverConfig(alpha=0.5))

    def test_init_shape_checked(self, rng):
        y = NonNegMatrix(rng.uniform(0.1, 1.0, (4, 5)))
        bad = FactorPair(NonNegMatrix(np.ones((4, 3))), NonNegMatrix(np.ones((3, 5))))
        with pytest.raises(ShapeMismatchError):
            solve_single_layer(y, 2, SolverConfig(alpha=0.5), init=bad)


class TestAuxiliaryValue:
    def test_recovers_cost_at_same_point(self, rng):
        for _ in range(20):
            y, basis, activation = random_system(rng, 10, 10, 4)
            f = alpha_divergence(y, matmul(basis, activation), 0.5)
            g = auxiliary_value(activation, activation, y, basis, 0.5)
            assert g == pytest.approx(f, abs=1e-9)

    def test_upper_bounds_cost(self, rng):
        for _ in range(100):
            y, basis, activation = random_system(rng, 8, 8, 3)
            reference = NonNegMatrix(
                rng.uniform(0.05, 1.0, activation.shape)
            )
            f = alpha_divergence(y, matmul(basis, activation), 0.5)
            g = auxiliary_value(activation, reference, y, basis, 0.5)
            assert g >= f - 1e-9

    def test_update_minimizes_majorizer(self, rng):
        for _ in range(20):
            y, basis, activation = random_system(rng, 8, 8, 3)
            updated = update_activation(y, basis, activation, 0.5)
            g_next = auxiliary_value(updated, activation, y, basis, 0.5)
            g_same = auxiliary_value(activation, activation, y, basis, 0.5)
            assert g_next <= g_same + 1e-9


def test_solve_trace_validation():
    with pytest.raises(ConfigurationError):
        SolveTrace(1.0, (0.5,), 2, True)
    with pytest.raises(ConfigurationError):
        SolveTrace(-1.0, (0.5,), 1, True)
