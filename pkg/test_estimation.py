import unittest

import numpy as np
from parameterized import parameterized

from rankcal.controller.exceptions import DimensionError
from rankcal.controller.experiments import WORKED_OBSERVED, WORKED_SCORES
from rankcal.model.estimation import (
    consistencize,
    estimate_scale,
    estimate_scores,
    fit_structured,
    ranking_criterion,
    scale_criterion,
    scale_stack,
)
from rankcal.model.matrix_model import (
    ComparisonMatrix,
    decompose,
    is_additively_consistent,
    ranking_of,
)
from rankcal.model.synth import structured_stack


def random_structured(rng, n, noise=0.0):
    u = rng.normal(size=n)
    u -= u.mean()
    s = rng.normal(scale=0.2, size=n)
    s -= s.mean()
    x = structured_stack(u, s)
    if noise:
        e = rng.normal(scale=noise, size=(n, n))
        np.fill_diagonal(e, 0.0)
        x = x + e
    return u, s, ComparisonMatrix(x)


class NoiselessRecoveryTestCase(unittest.TestCase):
    @parameterized.expand([(n,) for n in range(3, 9)])
    def test_recovers_scores_and_deformation(self, n):
        rng = np.random.default_rng(100 + n)
        for _ in range(20):
            u, s, X = random_structured(rng, n)
            fit = fit_structured(X)
            np.testing.assert_allclose(fit.u_hat.values, u, atol=1e-10)
            np.testing.assert_allclose(fit.s_hat.values, s, atol=1e-10)
            self.assertLess(float(np.max(np.abs(fit.residual.entries))), 1e-10)


class StructuredFitTestCase(unittest.TestCase):
    def setUp(self):
        self.X = ComparisonMatrix.from_rows(WORKED_OBSERVED)

    def test_worked_example_scores(self):
        fit = fit_structured(self.X)
        np.testing.assert_allclose(fit.u_hat.values, WORKED_SCORES, atol=1e-12)
        self.assertEqual(fit.n, 4)

    def test_fitted_plus_residual_is_the_observation(self):
        rng = np.random.default_rng(7)
        for n in (3, 5, 9):
            _, _, X = random_structured(rng, n, noise=0.1)
            fit = fit_structured(X)
            np.testing.assert_allclose(fit.fitted.entries + fit.residual.entries, X.entries, atol=1e-15)
            self.assertTrue(np.array_equal(np.diag(fit.residual.entries), np.zeros(n)))
            self.assertTrue(np.array_equal(np.diag(fit.fitted.entries), np.zeros(n)))

    def test_residual_is_orthogonal_to_the_model_space(self):
        rng = np.random.default_rng(8)
        _, _, X = random_structured(rng, 6, noise=0.2)
        E = fit_structured(X).residual.entries
        for _ in range(10):
            _, _, direction = random_structured(rng, 6)
            self.assertAlmostEqual(float(np.sum(E * direction.entries)), 0.0, delta=1e-12)

    def test_estimates_are_centered(self):
        rng = np.random.default_rng(9)
        _, _, X = random_structured(rng, 7, noise=0.3)
        fit = fit_structured(X)
        self.assertAlmostEqual(float(fit.u_hat.values.sum()), 0.0, delta=1e-12)
        self.assertAlmostEqual(float(fit.s_hat.values.sum()), 0.0, delta=1e-12)

    def test_three_alternatives_log_a_warning(self):
        rng = np.random.default_rng(10)
        _, _, X = random_structured(rng, 3, noise=0.1)
        with self.assertLogs("rankcal.model.estimation", level="WARNING"):
            fit_structured(X)

    def test_scale_needs_three_alternatives(self):
        with self.assertRaises(DimensionError):
            scale_stack(np.zeros((2, 2)))


class LeastSquaresOptimalityTestCase(unittest.TestCase):
    def test_estimates_minimize_the_criteria(self):
        rng = np.random.default_rng(12)
        _, _, X = random_structured(rng, 5, noise=0.3)
        parts = decompose(X)
        u_hat = estimate_scores(parts.antisymmetric)
        s_hat = estimate_scale(parts.symmetric)
        best_u = ranking_criterion(parts.antisymmetric, u_hat)
        best_s = scale_criterion(parts.symmetric, s_hat)
        for _ in range(50):
            step = rng.normal(scale=0.05, size=5)
            step -= step.mean()
            self.assertGreaterEqual(ranking_criterion(parts.antisymmetric, u_hat.values + step), best_u)
            self.assertGreaterEqual(scale_criterion(parts.symmetric, s_hat.values + step), best_s)


class ConsistencizationTestCase(unittest.TestCase):
    def test_worked_example_ranking_changes(self):
        u_hat, projected = consistencize(ComparisonMatrix.from_rows(WORKED_OBSERVED))
        np.testing.assert_allclose(u_hat.values, WORKED_SCORES, atol=1e-12)
        self.assertEqual(ranking_of(u_hat).ranking.label(), "3>2>1>4")
        self.assertTrue(is_additively_consistent(projected))

    def test_consistent_input_is_a_fixed_point(self):
        rng = np.random.default_rng(13)
        u = rng.normal(size=6)
        X = ComparisonMatrix.from_differences(u - u.mean())
        _, projected = consistencize(X)
        np.testing.assert_allclose(projected.entries, X.entries, atol=1e-12)

    def test_projection_is_idempotent(self):
        rng = np.random.default_rng(14)
        for i in range(200):
            _, _, X = random_structured(rng, 3 + i % 6, noise=0.3)
            _, once = consistencize(X)
            _, twice = consistencize(once)
            np.testing.assert_allclose(twice.entries, once.entries, atol=1e-12)


class InvarianceTestCase(unittest.TestCase):
    @parameterized.expand([(n,) for n in range(3, 9)])
    def test_scores_ignore_the_symmetric_part(self, n):
        rng = np.random.default_rng(200 + n)
        for _ in range(10):
            _, _, X = random_structured(rng, n, noise=0.2)
            K = decompose(X).antisymmetric
            other = rng.normal(size=(n, n))
            other = other + other.T
            np.fill_diagonal(other, 0.0)
            swapped = ComparisonMatrix(K.entries + other)
            np.testing.assert_allclose(
                estimate_scores(decompose(swapped).antisymmetric).values, estimate_scores(K).values, atol=1e-12
            )
            np.testing.assert_allclose(fit_structured(swapped).u_hat.values, fit_structured(X).u_hat.values, atol=1e-12)

    @parameterized.expand([("positive", 5.0), ("negative", -2.5)])
    def test_shifting_every_score_leaves_the_fit_unchanged(self, _, shift):
        rng = np.random.default_rng(15)
        u, s, X = random_structured(rng, 6)
        e = rng.normal(scale=0.1, size=(6, 6))
        np.fill_diagonal(e, 0.0)
        base = fit_structured(ComparisonMatrix(X.entries + e))
        shifted = fit_structured(ComparisonMatrix(structured_stack(u + shift, s) + e))
        np.testing.assert_allclose(shifted.fitted.entries, base.fitted.entries, atol=1e-12)
        np.testing.assert_allclose(shifted.u_hat.values, base.u_hat.values, atol=1e-12)
        np.testing.assert_allclose(
            ComparisonMatrix.from_differences(u + shift).entries,
            ComparisonMatrix.from_differences(u).entries,
            atol=1e-12,
        )


if __name__ == "__main__":
    unittest.main()
