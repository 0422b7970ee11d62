import unittest

import numpy as np
from parameterized import parameterized

from rankcal.controller.exceptions import DimensionError, RegimeError
from rankcal.model import streams
from rankcal.model.calibration import deformation_diagnostics
from rankcal.model.matrix_model import ScaleVector, ScoreVector, gap
from rankcal.model.synth import (
    NoiseSpec,
    Regime,
    ScenarioConfig,
    check_regime,
    default_deformation,
    latent_scores,
    noise_matrix,
    noise_stack,
    observed_matrix,
)


def scenario(**overrides):
    values = dict(
        n=4,
        spacing_c=0.1,
        regime=Regime.NONE,
        s=ScaleVector(np.zeros(4)),
        noise=NoiseSpec(0.1),
        replications=10,
        samples_per_rep=100,
        seed=1,
    )
    values.update(overrides)
    return ScenarioConfig(**values)


class LatentScoresTestCase(unittest.TestCase):
    def test_equally_spaced_and_centered(self):
        u = latent_scores(5, 0.1)
        np.testing.assert_allclose(u.values, [0.2, 0.1, 0.0, -0.1, -0.2], atol=1e-15)
        self.assertAlmostEqual(gap(u), 0.1, delta=1e-15)

    @parameterized.expand([("too_small", 2, 0.1, DimensionError), ("flat", 4, 0.0, ValueError)])
    def test_invalid(self, _, n, c, error):
        with self.assertRaises(error):
            latent_scores(n, c)


class RegimeTestCase(unittest.TestCase):
    def setUp(self):
        self.u = latent_scores(4, 0.1).values

    @parameterized.expand(
        [
            ("none_with_deformation", Regime.NONE, [0.01, 0.0, 0.0, -0.01]),
            ("moderate_at_the_gap", Regime.MODERATE, [0.05, 0.0, 0.0, -0.05]),
            ("strong_below_the_gap", Regime.STRONG, [0.04, 0.0, 0.0, -0.04]),
        ]
    )
    def test_violations(self, _, regime, s):
        with self.assertRaises(RegimeError):
            check_regime(regime, self.u, np.asarray(s))

    @parameterized.expand(
        [
            ("none", Regime.NONE, [0.0, 0.0, 0.0, 0.0]),
            ("moderate", Regime.MODERATE, [0.04, 0.0, 0.0, -0.04]),
            ("strong", Regime.STRONG, [0.05, 0.0, 0.0, -0.05]),
        ]
    )
    def test_accepted(self, _, regime, s):
        check_regime(regime, self.u, np.asarray(s))

    @parameterized.expand([(Regime.MODERATE, 0.5), (Regime.STRONG, 1.5)])
    def test_default_deformation_strength(self, regime, expected_gamma):
        for n in (3, 4, 7):
            u = latent_scores(n, 0.2)
            s = default_deformation(regime, u)
            self.assertAlmostEqual(deformation_diagnostics(u, s).gamma, expected_gamma, delta=1e-12)
            check_regime(regime, u.values, s.values)

    def test_default_for_none_is_zero(self):
        s = default_deformation(Regime.NONE, latent_scores(5, 0.1))
        self.assertEqual(s.to_list(), [0.0] * 5)


class NoiseTestCase(unittest.TestCase):
    @parameterized.expand([(0.1, 0.0), (0.2, 0.6), (0.1, -0.4)])
    def test_moments(self, sigma, rho):
        rng = np.random.default_rng(1)
        e = noise_stack(40_000, 4, NoiseSpec(sigma, rho), rng)
        upper, lower = e[:, 0, 2], e[:, 2, 0]
        self.assertAlmostEqual(float(upper.var()), sigma**2, delta=0.03 * sigma**2)
        self.assertAlmostEqual(float(lower.var()), sigma**2, delta=0.03 * sigma**2)
        self.assertAlmostEqual(float(np.corrcoef(upper, lower)[0, 1]), rho, delta=0.02)
        self.assertAlmostEqual(float(np.corrcoef(e[:, 0, 1], e[:, 1, 2])[0, 1]), 0.0, delta=0.02)
        self.assertTrue(np.all(e[:, np.arange(4), np.arange(4)] == 0.0))

    @parameterized.expand([(1.0,), (-1.0,)])
    def test_perfect_correlation(self, rho):
        e = noise_stack(10, 5, NoiseSpec(0.3, rho), np.random.default_rng(2))
        np.testing.assert_allclose(e, rho * np.swapaxes(e, 1, 2), atol=1e-15)

    def test_noise_matrix_is_deterministic(self):
        spec = NoiseSpec(0.1, 0.2)
        self.assertEqual(noise_matrix(5, spec, 7, 3), noise_matrix(5, spec, 7, 3))
        self.assertNotEqual(noise_matrix(5, spec, 7, 3), noise_matrix(5, spec, 7, 4))

    @parameterized.expand([("negative_sigma", -0.1, 0.0), ("rho_above_one", 0.1, 1.01)])
    def test_invalid_spec(self, _, sigma, rho):
        with self.assertRaises(ValueError):
            NoiseSpec(sigma, rho)


class ObservedMatrixTestCase(unittest.TestCase):
    def test_model_entries(self):
        u = ScoreVector([0.3, 0.0, -0.3])
        s = ScaleVector([0.02, -0.01, -0.01])
        X = observed_matrix(u, s)
        self.assertAlmostEqual(X.entries[0, 1], 0.3 + 0.01, delta=1e-15)
        self.assertAlmostEqual(X.entries[1, 0], -0.3 + 0.01, delta=1e-15)
        self.assertEqual(float(X.entries[2, 2]), 0.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionError):
            observed_matrix(ScoreVector([0.1, 0.0, -0.1]), ScaleVector(np.zeros(4)))


class ScenarioConfigTestCase(unittest.TestCase):
    def test_valid(self):
        config = scenario(name="base")
        self.assertEqual(config.to_dict()["regime"], "none")
        self.assertEqual(config.latent().n, 4)

    def test_regime_given_as_text(self):
        self.assertIs(scenario(regime="none").regime, Regime.NONE)

    @parameterized.expand(
        [
            ("regime", dict(regime=Regime.STRONG), RegimeError),
            ("dimension", dict(s=ScaleVector(np.zeros(5))), DimensionError),
            ("too_small", dict(n=2, s=ScaleVector(np.zeros(2))), DimensionError),
            ("replications", dict(replications=0), ValueError),
        ]
    )
    def test_invalid(self, _, overrides, error):
        with self.assertRaises(error):
            scenario(**overrides)


class StreamsTestCase(unittest.TestCase):
    def test_blocks(self):
        self.assertEqual(streams.blocks(10, 4), [(0, 4), (1, 4), (2, 2)])
        self.assertEqual(streams.blocks(0, 4), [])

    def test_substreams_are_reproducible_and_distinct(self):
        first = streams.substream(3, streams.STREAM_SCORES, 0).standard_normal(4)
        again = streams.substream(3, streams.STREAM_SCORES, 0).standard_normal(4)
        other = streams.substream(3, streams.STREAM_SCORES, 1).standard_normal(4)
        self.assertTrue(np.array_equal(first, again))
        self.assertFalse(np.array_equal(first, other))

    def test_derived_seeds(self):
        seed = streams.derive_seed(5, 1)
        self.assertEqual(seed, streams.derive_seed(5, 1))
        self.assertNotEqual(seed, streams.derive_seed(5, 2))
        self.assertLess(seed, 2**63)

    def test_map_tasks_keeps_order(self):
        self.assertEqual(streams.map_tasks(lambda x: x * x, list(range(20)), threads=4), [x * x for x in range(20)])


if __name__ == "__main__":
    unittest.main()
