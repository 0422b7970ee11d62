"""Gaussian score law on the centered hyperplane and Monte Carlo ranking-region probabilities."""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional

import numpy as np

from rankcal.controller.exceptions import DimensionError, TiedScoresError
from rankcal.model import streams
from rankcal.model.calibration import ResidualDiagnostics
from rankcal.model.matrix_model import (
    MIN_DIMENSION,
    Ranking,
    ScoreVector,
    rank_orders,
    ranking_of,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreLaw:
    """
    N_H(mean, scale_c * (I - J/n)): Gaussian law on centered score vectors.

    ``scale_c == 0`` is the point mass at the mean.
    """

    mean: ScoreVector
    scale_c: float

    def __post_init__(self):
        if not self.scale_c >= 0:
            raise ValueError(f"scale_c must be non-negative, got {self.scale_c!r}.")

    @property
    def n(self) -> int:
        return self.mean.n

    @property
    def is_point_mass(self) -> bool:
        return self.scale_c == 0.0

    def covariance(self) -> np.ndarray:
        n = self.n
        return self.scale_c * (np.eye(n) - np.ones((n, n)) / n)


@dataclass(frozen=True)
class RankingDistribution:
    """
    Empirical distribution of strict rankings.

    ``counts`` holds every sample under its (tie-broken) ranking; ``tie_counts`` holds the
    subset of samples whose scores had exact ties.
    """

    n: int
    counts: Mapping[Ranking, int]
    total: int
    seed: Optional[int] = None
    tie_counts: Mapping[Ranking, int] = field(default_factory=dict)

    def __post_init__(self):
        if sum(self.counts.values()) != self.total:
            raise ValueError("Ranking counts do not add up to the sample total.")
        for ranking in self.counts:
            if ranking.n != self.n:
                raise DimensionError(f"Ranking {ranking} does not rank {self.n} alternatives.")

    @property
    def ties(self) -> int:
        return sum(self.tie_counts.values())

    def probability(self, ranking: Ranking) -> float:
        return self.counts.get(ranking, 0) / self.total

    def probabilities(self) -> dict[Ranking, float]:
        return {ranking: count / self.total for ranking, count in self.counts.items()}

    def most_common(self, limit: Optional[int] = None) -> list[tuple[Ranking, int]]:
        """Rankings by decreasing count, then by label, for stable reports."""
        ordered = sorted(self.counts.items(), key=lambda item: (-item[1], item[0].order))
        return ordered if limit is None else ordered[:limit]

    def to_dict(self, limit: Optional[int] = None) -> dict:
        return {
            "n": self.n,
            "total": self.total,
            "seed": self.seed,
            "ties": self.ties,
            "support": len(self.counts),
            "rankings": [
                {"ranking": ranking.label(), "count": count, "probability": count / self.total}
                for ranking, count in self.most_common(limit)
            ],
        }


@dataclass(frozen=True)
class RankingSummary:
    """
    Summary probabilities of a ranking distribution.

    Attributes:
        positions: P[i, p] = probability that alternative i sits at position p (0 = best).
        precedence: P[i, j] = probability that i is ranked above j, tie samples excluded.
        entropy_bits: Shannon entropy of the region frequencies, base 2.
    """

    positions: np.ndarray
    precedence: np.ndarray
    entropy_bits: float
    tie_fraction: float = 0.0

    @property
    def top1(self) -> np.ndarray:
        return self.positions[:, 0]

    def topk(self, k: int) -> np.ndarray:
        """Probability that each alternative belongs to the top k."""
        if not 1 <= k <= self.positions.shape[1]:
            raise ValueError(f"k must lie in 1..{self.positions.shape[1]}, got {k}.")
        return self.positions[:, :k].sum(axis=1)


def score_law(u_hat: ScoreVector, diag: ResidualDiagnostics) -> ScoreLaw:
    """
    Plug-in covariance scalar c = (1 - rho_hat) sigma_hat^2 / (2n), with the clamped rho_hat.
    """
    n = u_hat.n
    if n < MIN_DIMENSION:
        raise DimensionError(f"Score law needs n >= {MIN_DIMENSION}, got {n}.")
    scale_c = max(0.0, (1.0 - diag.rho_hat) * diag.sigma_hat**2 / (2.0 * n))
    logger.debug("Score law: scale_c=%.6g", scale_c)
    return ScoreLaw(mean=u_hat, scale_c=scale_c)


def _sample_block(law: ScoreLaw, seed: int, stream: int, block: int, size: int) -> np.ndarray:
    rng = streams.substream(seed, stream, block)
    z = rng.standard_normal((size, law.n)) * math.sqrt(law.scale_c)
    z -= z.mean(axis=1, keepdims=True)
    return law.mean.values + z


def sample_scores(
    law: ScoreLaw,
    N: int,
    seed: int,
    stream: int = streams.STREAM_SCORES,
    threads: Optional[int] = 1,
) -> np.ndarray:
    """
    Draws N centered score vectors as rows of an (N, n) array.

    Each row is u_hat + (z - mean(z)) with iid N(0, scale_c) coordinates z, which has
    covariance scale_c (I - J/n). Row i depends only on (seed, stream, i).
    """
    if N < 1:
        raise ValueError(f"Sample count must be positive, got {N}.")
    if law.is_point_mass:
        return np.tile(law.mean.values, (N, 1))
    return streams.concat(
        streams.map_blocks(
            lambda block, size: _sample_block(law, seed, stream, block, size), N, threads
        )
    )


def iter_scores(law: ScoreLaw, N: int, seed: int, stream: int = streams.STREAM_SCORES) -> Iterator[ScoreVector]:
    """Streams the samples of ``sample_scores`` one ScoreVector at a time."""
    for block, size in streams.blocks(N):
        rows = (
            np.tile(law.mean.values, (size, 1))
            if law.is_point_mass
            else _sample_block(law, seed, stream, block, size)
        )
        for row in rows:
            yield ScoreVector.centered(row)


def _count_orders(samples: np.ndarray) -> tuple[Counter, Counter]:
    orders = rank_orders(samples)
    ordered = np.take_along_axis(samples, orders, axis=1)
    tied = np.any(ordered[:, :-1] == ordered[:, 1:], axis=1)
    counts: Counter = Counter()
    tie_counts: Counter = Counter()
    for target, rows in ((counts, orders), (tie_counts, orders[tied])):
        if rows.shape[0] == 0:
            continue
        unique, hits = np.unique(rows, axis=0, return_counts=True)
        for order, hit in zip(unique, hits):
            target[Ranking(tuple(int(i) for i in order))] += int(hit)
    return counts, tie_counts


def ranking_distribution(
    law: ScoreLaw,
    N: int,
    seed: int,
    stream: int = streams.STREAM_SCORES,
    threads: Optional[int] = 1,
) -> RankingDistribution:
    """Counts the rankings induced by N samples of the law."""
    if N < 1:
        raise ValueError(f"Sample count must be positive, got {N}.")
    if law.is_point_mass:
        outcome = ranking_of(law.mean)
        return RankingDistribution(
            n=law.n,
            counts={outcome.ranking: N},
            total=N,
            seed=seed,
            tie_counts={outcome.ranking: N} if outcome.tied else {},
        )

    def work(block: int, size: int) -> tuple[Counter, Counter]:
        return _count_orders(_sample_block(law, seed, stream, block, size))

    counts: Counter = Counter()
    tie_counts: Counter = Counter()
    for block_counts, block_ties in streams.map_blocks(work, N, threads):
        counts.update(block_counts)
        tie_counts.update(block_ties)
    if tie_counts:
        logger.warning("%d samples had tied scores.", sum(tie_counts.values()))
    return RankingDistribution(
        n=law.n, counts=dict(counts), total=N, seed=seed, tie_counts=dict(tie_counts)
    )


def central_ranking(u_hat: ScoreVector) -> Ranking:
    """
    The ranking of the region containing u_hat.

    Raises:
        TiedScoresError: If u_hat has tied coordinates, so no open region contains it.
    """
    outcome = ranking_of(u_hat)
    if outcome.tied:
        raise TiedScoresError(
            "Estimated scores have exact ties; the central ranking region is undefined."
        )
    return outcome.ranking


def central_region_probability(dist: RankingDistribution, u_hat: ScoreVector) -> float:
    return dist.probability(central_ranking(u_hat))


def summary_probabilities(dist: RankingDistribution) -> RankingSummary:
    n = dist.n
    positions = np.zeros((n, n))
    precedence = np.zeros((n, n))
    entropy = 0.0
    for ranking, count in dist.counts.items():
        p = count / dist.total
        positions[list(ranking.order), np.arange(n)] += p
        untied = count - dist.tie_counts.get(ranking, 0)
        if untied:
            place = ranking.positions()
            precedence += (untied / dist.total) * (place[:, None] < place[None, :])
        entropy -= p * math.log2(p)
    return RankingSummary(
        positions=positions,
        precedence=precedence,
        entropy_bits=max(0.0, entropy),
        tie_fraction=dist.ties / dist.total,
    )


def tv_distance(d1: RankingDistribution, d2: RankingDistribution) -> float:
    """Total variation distance (1/2) sum_r |p1(r) - p2(r)| over the union of supports."""
    if d1.n != d2.n:
        raise DimensionError(f"Dimension mismatch: {d1.n} != {d2.n}.")
    support = set(d1.counts) | set(d2.counts)
    return min(1.0, 0.5 * sum(abs(d1.probability(r) - d2.probability(r)) for r in support))


def standard_error(p: float, N: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / N) if N > 0 else math.nan
