import itertools
import math
import unittest

import numpy as np
from parameterized import parameterized

from rankcal.controller.exceptions import DimensionError, TiedScoresError
from rankcal.controller.experiments import WORKED_SCORES
from rankcal.model.calibration import ResidualDiagnostics
from rankcal.model.matrix_model import Ranking, ScoreVector
from rankcal.model.uncertainty import (
    RankingDistribution,
    ScoreLaw,
    central_ranking,
    central_region_probability,
    iter_scores,
    ranking_distribution,
    sample_scores,
    score_law,
    standard_error,
    summary_probabilities,
    tv_distance,
)


def diagnostics(sigma, rho, rho_raw=None):
    return ResidualDiagnostics(
        ir2=0.0, ic2=3.0 * sigma**2, sigma_hat=sigma, rho_hat=rho,
        rho_raw=rho if rho_raw is None else rho_raw,
    )


class ScoreLawTestCase(unittest.TestCase):
    def setUp(self):
        self.u_hat = ScoreVector(WORKED_SCORES)

    def test_scale_formula(self):
        law = score_law(self.u_hat, diagnostics(0.1, 0.2))
        self.assertAlmostEqual(law.scale_c, 0.8 * 0.01 / 8.0, delta=1e-15)

    def test_clamped_rho_is_used(self):
        law = score_law(self.u_hat, diagnostics(0.1, 1.0, rho_raw=1.3))
        self.assertTrue(law.is_point_mass)

    def test_covariance_is_singular_along_ones(self):
        law = ScoreLaw(self.u_hat, 0.5)
        np.testing.assert_allclose(law.covariance() @ np.ones(4), np.zeros(4), atol=1e-15)

    def test_negative_scale_is_rejected(self):
        with self.assertRaises(ValueError):
            ScoreLaw(self.u_hat, -1.0)


class SamplerTestCase(unittest.TestCase):
    def setUp(self):
        self.law = ScoreLaw(ScoreVector(WORKED_SCORES), 0.003)

    def test_samples_are_centered(self):
        samples = sample_scores(self.law, 5000, seed=1)
        self.assertEqual(samples.shape, (5000, 4))
        self.assertLess(float(np.max(np.abs(samples.sum(axis=1)))), 1e-12)

    def test_empirical_covariance(self):
        samples = sample_scores(self.law, 100_000, seed=2)
        empirical = np.cov(samples, rowvar=False)
        target = self.law.covariance()
        self.assertLess(np.linalg.norm(empirical - target) / np.linalg.norm(target), 0.05)
        np.testing.assert_allclose(samples.mean(axis=0), WORKED_SCORES, atol=5 * math.sqrt(0.003 / 100_000))

    def test_same_seed_same_samples_for_any_thread_count(self):
        one = sample_scores(self.law, 10_000, seed=3, threads=1)
        many = sample_scores(self.law, 10_000, seed=3, threads=4)
        self.assertTrue(np.array_equal(one, many))

    def test_sample_i_does_not_depend_on_the_sample_count(self):
        short = sample_scores(self.law, 5000, seed=4)
        long = sample_scores(self.law, 9000, seed=4)
        self.assertTrue(np.array_equal(short, long[:5000]))

    def test_iterator_matches_array(self):
        rows = np.stack([v.values for v in iter_scores(self.law, 100, seed=5)])
        np.testing.assert_allclose(rows, sample_scores(self.law, 100, seed=5), atol=1e-15)

    def test_point_mass(self):
        law = ScoreLaw(ScoreVector(WORKED_SCORES), 0.0)
        self.assertTrue(np.array_equal(sample_scores(law, 3, seed=0), np.tile(WORKED_SCORES, (3, 1))))


class RankingDistributionTestCase(unittest.TestCase):
    def setUp(self):
        self.u_hat = ScoreVector(WORKED_SCORES)

    def test_probabilities_sum_to_one(self):
        dist = ranking_distribution(ScoreLaw(self.u_hat, 0.002), 20_000, seed=6)
        self.assertAlmostEqual(sum(dist.probabilities().values()), 1.0, delta=1e-12)
        self.assertEqual(sum(dist.counts.values()), 20_000)

    def test_point_mass_has_one_region(self):
        dist = ranking_distribution(ScoreLaw(self.u_hat, 0.0), 1000, seed=7)
        self.assertEqual(dist.counts, {Ranking.from_label("3>2>1>4"): 1000})
        self.assertEqual(central_region_probability(dist, self.u_hat), 1.0)
        self.assertEqual(summary_probabilities(dist).entropy_bits, 0.0)

    def test_central_region_is_the_most_likely(self):
        N = 100_000
        law = ScoreLaw(self.u_hat, 0.0004)
        first = ranking_distribution(law, N, seed=8)
        second = ranking_distribution(law, N, seed=9)
        central = central_ranking(self.u_hat)
        p1, p2 = first.probability(central), second.probability(central)
        se = standard_error(p1, N)
        self.assertLess(abs(p1 - p2), 3 * math.sqrt(2) * se)
        runner_up = max(p for r, p in first.probabilities().items() if r != central)
        self.assertGreaterEqual(p1, runner_up - 3 * se)

    def test_uniform_limit(self):
        N = 1_000_000
        dist = ranking_distribution(ScoreLaw(self.u_hat, 1e6), N, seed=10, threads=4)
        p = 1.0 / 24.0
        self.assertAlmostEqual(central_region_probability(dist, self.u_hat), p, delta=3 * standard_error(p, N))
        self.assertEqual(len(dist.counts), 24)

    def test_more_noise_less_central_mass(self):
        N = 50_000
        low = ranking_distribution(ScoreLaw(self.u_hat, 0.0002), N, seed=11)
        high = ranking_distribution(ScoreLaw(self.u_hat, 0.002), N, seed=11)
        p_low = central_region_probability(low, self.u_hat)
        p_high = central_region_probability(high, self.u_hat)
        self.assertGreater(p_low, p_high + 3 * standard_error(p_low, N))

    def test_thread_count_does_not_change_counts(self):
        law = ScoreLaw(self.u_hat, 0.001)
        self.assertEqual(
            ranking_distribution(law, 12_000, seed=12, threads=1).counts,
            ranking_distribution(law, 12_000, seed=12, threads=3).counts,
        )

    def test_tied_scores_have_no_central_region(self):
        with self.assertRaises(TiedScoresError):
            central_ranking(ScoreVector([0.1, 0.1, -0.2]))

    def test_counts_must_match_total(self):
        with self.assertRaises(ValueError):
            RankingDistribution(n=3, counts={Ranking.identity(3): 2}, total=3)

    def test_most_common_is_stable(self):
        dist = RankingDistribution(
            n=3,
            counts={Ranking.from_label("2>1>3"): 2, Ranking.from_label("1>2>3"): 2, Ranking.from_label("3>2>1"): 5},
            total=9,
        )
        self.assertEqual(
            [r.label() for r, _ in dist.most_common()], ["3>2>1", "1>2>3", "2>1>3"]
        )
        self.assertEqual(dist.to_dict(limit=1)["rankings"][0]["count"], 5)


class SummaryTestCase(unittest.TestCase):
    def setUp(self):
        self.dist = ranking_distribution(ScoreLaw(ScoreVector(WORKED_SCORES), 0.001), 30_000, seed=13)
        self.summary = summary_probabilities(self.dist)

    def test_positions_are_doubly_stochastic(self):
        np.testing.assert_allclose(self.summary.positions.sum(axis=0), np.ones(4), atol=1e-12)
        np.testing.assert_allclose(self.summary.positions.sum(axis=1), np.ones(4), atol=1e-12)

    def test_precedence_pairs_are_complementary(self):
        p = self.summary.precedence
        off = ~np.eye(4, dtype=bool)
        np.testing.assert_allclose((p + p.T)[off], np.ones(12), atol=1e-12)
        self.assertTrue(np.all(np.diag(p) == 0))

    def test_topk(self):
        np.testing.assert_allclose(self.summary.topk(4), np.ones(4), atol=1e-12)
        np.testing.assert_allclose(self.summary.topk(1), self.summary.top1)
        with self.assertRaises(ValueError):
            self.summary.topk(0)

    def test_entropy_is_bounded(self):
        self.assertGreater(self.summary.entropy_bits, 0.0)
        self.assertLessEqual(self.summary.entropy_bits, math.log2(24))

    @parameterized.expand([(3,), (4,), (5,)])
    def test_uniform_distribution(self, n):
        counts = {Ranking(order): 1 for order in itertools.permutations(range(n))}
        summary = summary_probabilities(RankingDistribution(n=n, counts=counts, total=len(counts)))
        self.assertAlmostEqual(summary.entropy_bits, math.log2(math.factorial(n)), delta=1e-12)
        off = ~np.eye(n, dtype=bool)
        np.testing.assert_allclose(summary.precedence[off], np.full(n * (n - 1), 0.5), atol=1e-12)
        np.testing.assert_allclose(summary.positions, np.full((n, n), 1.0 / n), atol=1e-12)


class TotalVariationTestCase(unittest.TestCase):
    def make(self, counts):
        return RankingDistribution(
            n=3, counts={Ranking.from_label(k): v for k, v in counts.items()}, total=sum(counts.values())
        )

    @parameterized.expand(
        [
            ("identical", {"1>2>3": 3, "2>1>3": 1}, {"1>2>3": 3, "2>1>3": 1}, 0.0),
            ("disjoint", {"1>2>3": 4}, {"3>2>1": 2}, 1.0),
            ("partial", {"1>2>3": 1, "2>1>3": 1}, {"1>2>3": 1}, 0.5),
        ]
    )
    def test_tv_distance(self, _, first, second, expected):
        self.assertAlmostEqual(tv_distance(self.make(first), self.make(second)), expected, delta=1e-15)

    def test_dimension_mismatch(self):
        other = RankingDistribution(n=4, counts={Ranking.identity(4): 1}, total=1)
        with self.assertRaises(DimensionError):
            tv_distance(self.make({"1>2>3": 1}), other)


if __name__ == "__main__":
    unittest.main()
