import math
import time
import unittest

import numpy as np
from parameterized import parameterized

from rankcal.controller.experiments import (
    MC_SIGMAS,
    REFERENCE_MC_TABLE,
    TAU_PROFILE,
    Check,
    McStudyResult,
    TauMode,
    reproduce_mc_table,
    reproduce_tau_mc,
    reproduce_tau_table,
    run_mc_study,
    run_scenario_grid,
    run_tau_study,
    run_worked_example,
    tau_critical,
)
from rankcal.model.synth import NoiseSpec, Regime, ScenarioConfig, default_deformation, latent_scores


def scenario(n=4, sigma=0.1, regime=Regime.NONE, replications=20, samples=2000, seed=3, c=0.1):
    u = latent_scores(n, c)
    return ScenarioConfig(
        n=n,
        spacing_c=c,
        regime=regime,
        s=default_deformation(regime, u),
        noise=NoiseSpec(sigma),
        replications=replications,
        samples_per_rep=samples,
        seed=seed,
    )


class CheckTestCase(unittest.TestCase):
    @parameterized.expand(
        [
            ("exact_match", "3>2>1>4", "3>2>1>4", None, True),
            ("exact_mismatch", "3>2>1>4", "1>2>3>4", None, False),
            ("within_tolerance", 0.109, 0.108, 0.001, True),
            ("outside_tolerance", 0.109, 0.107, 0.001, False),
            ("shape_mismatch", [0.1, 0.2], [0.1], 0.01, False),
        ]
    )
    def test_passed(self, _, expected, computed, tolerance, passed):
        check = Check("value", expected, computed, tolerance)
        self.assertEqual(check.passed, passed)
        self.assertEqual(check.to_dict()["verdict"], "PASS" if passed else "FAIL")


class WorkedExampleTestCase(unittest.TestCase):
    def test_every_step_matches(self):
        start = time.perf_counter()
        result = run_worked_example()
        self.assertLess(time.perf_counter() - start, 1.0)
        self.assertTrue(all(check["verdict"] == "PASS" for check in result["checks"]))
        self.assertEqual(result["latent_ranking"], "1>2>3>4")
        self.assertEqual(result["ranking"], "3>2>1>4")
        self.assertEqual(result["cycle"], ["1>3", "3>2", "2>1"])
        self.assertFalse(result["reciprocal"])
        self.assertEqual(result["first_nonreciprocal_pair"], [1, 2])


class McStudyTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.results = run_mc_study(seed=0, threads=4)

    def test_reference_table(self):
        checks = reproduce_mc_table(self.results)
        self.assertEqual(len(checks), 3 * len(REFERENCE_MC_TABLE))
        failed = [check.to_dict() for check in checks if not check.passed]
        self.assertEqual(failed, [])

    def test_frequencies_grow_with_noise(self):
        self.assertEqual([r.sigma for r in self.results], list(MC_SIGMAS))
        for lower, higher in zip(self.results, self.results[1:]):
            self.assertLessEqual(lower.p_na, higher.p_na)
            self.assertLessEqual(lower.p_wr, higher.p_wr)
        for result in self.results:
            self.assertLessEqual(result.p_both, min(result.p_na, result.p_wr))

    def test_noiseless_observation_is_never_wrong(self):
        (result,) = run_mc_study(sigmas=(0.0,), replications=1000)
        self.assertEqual((result.p_na, result.p_wr, result.p_both), (0.0, 0.0, 0.0))

    def test_thread_count_does_not_change_the_result(self):
        one = run_mc_study(sigmas=(0.1,), replications=10_000, seed=4, threads=1)
        many = run_mc_study(sigmas=(0.1,), replications=10_000, seed=4, threads=3)
        self.assertEqual(one, many)

    def test_joint_frequency_is_bounded(self):
        with self.assertRaises(AssertionError):
            McStudyResult(0.1, 10, 0.1, 0.2, 0.3, (0.0, 0.0, 0.0))

    def test_invalid_replications(self):
        with self.assertRaises(ValueError):
            run_mc_study(replications=0)


class TauStudyTestCase(unittest.TestCase):
    def test_reference_table(self):
        rows = run_tau_study()
        checks = reproduce_tau_table(rows)
        self.assertEqual(len(checks), 18)
        self.assertEqual([check.to_dict() for check in checks if not check.passed], [])
        self.assertAlmostEqual(rows[1].rho_sharp, 0.10847, delta=5e-6)

    def test_critical_tau(self):
        q = np.asarray(TAU_PROFILE)
        self.assertAlmostEqual(float(q @ q), 0.0146, delta=1e-12)
        self.assertAlmostEqual(tau_critical(), 1.125, delta=1e-12)

    def test_beyond_compatibility_is_flagged(self):
        with self.assertLogs("rankcal.controller.experiments", level="WARNING"):
            (row,) = run_tau_study(taus=(1.2,))
        self.assertTrue(row.beyond_compatibility)
        self.assertFalse(run_tau_study(taus=(1.0,))[0].beyond_compatibility)

    def test_negative_tau(self):
        with self.assertRaises(ValueError):
            run_tau_study(taus=(-0.5,))

    def test_row_serialization(self):
        row = run_tau_study(taus=(0.5,))[0].to_dict()
        self.assertIn("lambda", row)
        self.assertNotIn("lambda_", row)
        self.assertEqual(row["mode"], "analytic")


class TauMonteCarloTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.rows = run_tau_study(mode=TauMode.MONTE_CARLO, seed=0, threads=4)

    def test_pooled_brutal_calibration_matches_expectation(self):
        checks = reproduce_tau_mc(self.rows)
        self.assertEqual(len(checks), 6)
        self.assertEqual([check.to_dict() for check in checks if not check.passed], [])

    def test_apparent_noise_grows_with_deformation(self):
        for lower, higher in zip(self.rows, self.rows[1:]):
            self.assertLess(lower.sigma_sharp, higher.sigma_sharp)
            self.assertLess(lower.rho_sharp, higher.rho_sharp)
            self.assertLess(lower.lambda_, higher.lambda_)

    def test_structured_calibration_has_the_small_sample_bias(self):
        # At n = 4 the structured residual has E[IC2] = 2.25 sigma^2 and E[IR2] = sigma^2.
        for row in self.rows:
            self.assertAlmostEqual(row.pooled["sigma_struct"], 0.1 * math.sqrt(0.75), delta=0.005)
            self.assertAlmostEqual(row.pooled["rho_struct"], -1.0 / 3.0, delta=0.05)

    def test_central_probabilities_coincide_at_four_alternatives(self):
        for row in self.rows:
            self.assertAlmostEqual(row.central_struct, row.central_sharp, delta=0.01)

    def test_thread_count_does_not_change_rows(self):
        one = run_tau_study(taus=(0.5,), mode="monte_carlo", replications=300, samples=500, seed=2, threads=1)
        many = run_tau_study(taus=(0.5,), mode="monte_carlo", replications=300, samples=500, seed=2, threads=3)
        self.assertEqual(one[0].to_dict(), many[0].to_dict())


class ScenarioGridTestCase(unittest.TestCase):
    def test_small_noise_recovers_the_latent_ranking(self):
        (report,) = run_scenario_grid([scenario(sigma=0.01)])
        self.assertGreater(report["central_probability"]["structured"]["mean"], 0.95)
        self.assertLess(report["deltas"]["tv"]["mean"], 0.05)
        self.assertEqual(report["recovery"]["point_ranking"], 1.0)
        self.assertEqual(report["config"]["name"], "scenario-1")

    def test_central_probability_falls_with_noise(self):
        reports = run_scenario_grid([scenario(sigma=sigma) for sigma in (0.02, 0.2, 1.0)])
        central = [r["central_probability"]["structured"]["mean"] for r in reports]
        self.assertGreater(central[0], central[1])
        self.assertGreater(central[1], central[2])

    def test_brutal_law_is_tighter_beyond_four_alternatives(self):
        (report,) = run_scenario_grid([scenario(n=8, regime=Regime.MODERATE)])
        self.assertLess(report["scale_c"]["brutal"]["mean"], report["scale_c"]["structured"]["mean"])
        self.assertGreater(report["sigma_sharp"]["mean"], report["sigma_hat"]["mean"])

    def test_strong_deformation_is_classified(self):
        (report,) = run_scenario_grid([scenario(regime=Regime.STRONG, sigma=0.005)])
        self.assertEqual(report["deformation_classes"], {"influential": 20})
        self.assertAlmostEqual(report["gamma"]["mean"], 1.5, delta=0.1)

    def test_topk_rows_end_at_one(self):
        (report,) = run_scenario_grid([scenario()])
        np.testing.assert_allclose(np.asarray(report["recovery"]["topk"])[:, -1], np.ones(4), atol=1e-12)
        np.testing.assert_allclose(np.asarray(report["deltas"]["topk"])[:, -1], np.zeros(4), atol=1e-12)

    def test_thread_count_does_not_change_reports(self):
        configs = [scenario(replications=6, samples=1500), scenario(sigma=0.3, replications=6, samples=1500)]
        self.assertEqual(run_scenario_grid(configs, threads=1), run_scenario_grid(configs, threads=4))


if __name__ == "__main__":
    unittest.main()
