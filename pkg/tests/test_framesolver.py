"""
Unit tests for design-matrix assembly, truncated SVD solves and the
truncation operator.
"""
import numpy as np
import pytest

from app.core.domains import draw_uniform_samples
from app.core.errors import NumericError, ParameterError, ShapeError
from app.core.framesolver import (
    assemble_design_matrix,
    coefficient_l2_norm,
    condition_number,
    estimate_errors,
    evaluate_approximant,
    factorize,
    fit,
    truncate_pointwise,
    truncated_svd_solve,
)
from app.core.indexsets import custom_index_set, total_degree_set
from app.core.polybasis import LEGENDRE, quadrature_norm, quadrature_rule, tensor_basis_eval


class TestDesignMatrix:
    """Rows phi(y_i) / sqrt(M)."""

    def test_constant_column(self, l_shape):
        samples = draw_uniform_samples(l_shape, 16, seed=1)
        design = assemble_design_matrix(samples, custom_index_set([(0, 0)]))
        np.testing.assert_allclose(design.matrix, np.full((16, 1), 0.25))

    def test_full_box_is_near_isometry(self, full_box_2d):
        samples = draw_uniform_samples(full_box_2d, 200_000, seed=7)
        design = assemble_design_matrix(samples, total_degree_set(3, 2))
        gram = design.matrix.T @ design.matrix
        # Entries have variance at most sup|phi|^4 / M = 49 / M for degree 3.
        assert np.max(np.abs(gram - np.eye(gram.shape[0]))) < 8 * 7 / np.sqrt(200_000)

    def test_deterministic(self, l_shape):
        lam = total_degree_set(4, 2)
        a = assemble_design_matrix(draw_uniform_samples(l_shape, 50, seed=9), lam)
        b = assemble_design_matrix(draw_uniform_samples(l_shape, 50, seed=9), lam)
        np.testing.assert_array_equal(a.matrix, b.matrix)
        reference = tensor_basis_eval(lam, a.samples.points) / np.sqrt(50)
        np.testing.assert_array_equal(a.matrix, reference)

    def test_dimension_mismatch(self, l_shape):
        samples = draw_uniform_samples(l_shape, 5, seed=0)
        with pytest.raises(ShapeError):
            assemble_design_matrix(samples, total_degree_set(2, 3))

    def test_rhs_length(self, l_shape):
        design = assemble_design_matrix(draw_uniform_samples(l_shape, 5, seed=0), total_degree_set(1, 2))
        with pytest.raises(ShapeError):
            design.rhs(np.ones(4))


class TestTruncatedSvd:
    """Regularized solves against dense references."""

    def test_small_singular_value_dropped(self):
        solution = truncated_svd_solve(np.diag([1.0, 1e-9]), [1.0, 1.0], epsilon=1e-8)
        np.testing.assert_allclose(solution.coefficients, [1.0, 0.0], atol=1e-15)
        assert solution.retained_rank == 1

    def test_well_conditioned_matches_least_squares(self):
        q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((12, 4)))
        a = 3.0 * q
        b = np.random.default_rng(1).standard_normal(12)
        solution = truncated_svd_solve(a, b, epsilon=1e-8)
        expected = np.linalg.lstsq(a, b, rcond=None)[0]
        np.testing.assert_allclose(solution.coefficients, expected, atol=1e-12)

    def test_mid_spectrum_rank_k(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((8, 5))
        b = rng.standard_normal(8)
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        epsilon = 0.5 * (s[2] + s[3])
        expected = vt[:3].T @ ((u[:, :3].T @ b) / s[:3])
        solution = truncated_svd_solve(a, b, epsilon=epsilon)
        assert solution.retained_rank == 3
        np.testing.assert_allclose(solution.coefficients, expected, atol=1e-12)

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((20, 10)) @ np.diag(np.logspace(0, -8, 10))
        b = rng.standard_normal(20)
        factors = factorize(a)
        previous = None
        for epsilon in (0.0, 1e-9, 1e-6, 1e-3, 1e-1):
            solution = truncated_svd_solve(a, b, epsilon=epsilon, factors=factors)
            if previous is not None:
                assert coefficient_l2_norm(solution) <= coefficient_l2_norm(previous) + 1e-12
                assert solution.residual_norm >= previous.residual_norm - 1e-12
            previous = solution

    def test_epsilon_above_spectrum(self):
        solution = truncated_svd_solve(np.eye(3), np.ones(3), epsilon=2.0)
        assert solution.retained_rank == 0
        np.testing.assert_array_equal(solution.coefficients, np.zeros(3))

    def test_underdetermined(self):
        a = np.random.default_rng(2).standard_normal((3, 6))
        factors = factorize(a)
        assert factors.v_complete.shape == (6, 6)
        np.testing.assert_allclose(factors.v_complete.T @ factors.v_complete, np.eye(6), atol=1e-12)
        assert condition_number(factors) == float("inf")

    def test_negative_epsilon(self):
        with pytest.raises(ParameterError):
            truncated_svd_solve(np.eye(2), np.ones(2), epsilon=-1.0)

    def test_rhs_mismatch(self):
        with pytest.raises(ShapeError):
            truncated_svd_solve(np.eye(2), np.ones(3), epsilon=0.0)


class TestApproximant:
    """Evaluation, truncation and coefficient norms."""

    def setup_method(self):
        self.lam = total_degree_set(3, 2)
        self.points = np.random.default_rng(3).uniform(-1, 1, (40, 2))

    def test_unit_coefficient(self):
        m = self.lam.position((2, 1))
        c = np.zeros(len(self.lam))
        c[m] = 1.0
        values = evaluate_approximant(c, self.lam, LEGENDRE, self.points)
        np.testing.assert_allclose(values, tensor_basis_eval(self.lam, self.points)[:, m])

    def test_zero_coefficients(self):
        values = evaluate_approximant(np.zeros(len(self.lam)), self.lam, LEGENDRE, self.points)
        np.testing.assert_array_equal(values, np.zeros(40))

    def test_direct_summation(self):
        c = np.random.default_rng(4).standard_normal(len(self.lam))
        psi = tensor_basis_eval(self.lam, self.points)
        expected = [sum(c[j] * psi[i, j] for j in range(len(self.lam))) for i in range(40)]
        np.testing.assert_allclose(evaluate_approximant(c, self.lam, LEGENDRE, self.points), expected, atol=1e-12)

    def test_coefficient_count(self):
        with pytest.raises(ShapeError):
            evaluate_approximant(np.zeros(3), self.lam, LEGENDRE, self.points)

    def test_coefficient_norm_is_l2_norm(self):
        c = np.random.default_rng(5).standard_normal(len(self.lam))
        nodes, weights = quadrature_rule(LEGENDRE, 8, 2)
        values = evaluate_approximant(c, self.lam, LEGENDRE, nodes)
        assert coefficient_l2_norm(c) == pytest.approx(quadrature_norm(values, weights), abs=1e-10)
        assert coefficient_l2_norm(np.zeros(4)) == 0.0

    def test_truncation(self):
        np.testing.assert_allclose(truncate_pointwise(np.array([0.5, -3.0]), 1.0), [0.5, -1.0])
        np.testing.assert_allclose(truncate_pointwise(np.array([3 + 4j]), 1.0), [0.6 + 0.8j])
        with pytest.raises(ParameterError):
            truncate_pointwise(np.array([1.0]), -1.0)


class TestFit:
    """End-to-end fit on sampled data."""

    def test_exact_polynomial_recovery(self, l_shape):
        lam = total_degree_set(3, 2)
        samples = draw_uniform_samples(l_shape, 100, seed=12)
        fitted = fit(samples, lambda y: y[:, 0] ** 2 * y[:, 1] - y[:, 1], lam)
        points = np.random.default_rng(0).uniform(-1, 0, (50, 2))
        approx = evaluate_approximant(fitted.solution.coefficients, lam, LEGENDRE, points)
        np.testing.assert_allclose(approx, points[:, 0] ** 2 * points[:, 1] - points[:, 1], atol=1e-9)

    def test_serialized_solution(self, l_shape):
        lam = total_degree_set(2, 2)
        samples = draw_uniform_samples(l_shape, 40, seed=12)
        data = fit(samples, lambda y: np.exp(y[:, 0]), lam, epsilon=1e-10).to_dict()
        assert data["index_set_descriptor"] == "dim=2 kind=total_degree n=2"
        assert data["basis_descriptor"] == "legendre"
        assert data["seed"] == 12
        assert data["epsilon"] == 1e-10
        assert data["retained_rank"] == 6
        assert len(data["coefficients"]) == 6 and len(data["singular_values"]) == 6

    def test_non_finite_target(self, l_shape):
        samples = draw_uniform_samples(l_shape, 20, seed=1)
        with pytest.raises(NumericError):
            fit(samples, lambda y: np.full(y.shape[0], np.nan), total_degree_set(1, 2))

    def test_error_estimate(self):
        exact = np.array([1.0, 2.0, 3.0, 4.0])
        approx = np.array([1.0, 2.0, 3.0, 2.0])
        estimate = estimate_errors(exact, approx, extra_residuals=np.array([0.5, -3.0]))
        assert estimate.l2 == pytest.approx(1.0)
        assert estimate.linf == 3.0
        assert estimate.points == 4
