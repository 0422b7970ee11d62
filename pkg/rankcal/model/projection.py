"""Brutal reciprocal projection and its comparison with the structured treatment."""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from rankcal.controller.exceptions import TiedScoresError
from rankcal.model import streams
from rankcal.model.calibration import (
    DeformationDiagnostics,
    ResidualDiagnostics,
    calibrate_noise,
    deformation_diagnostics,
)
from rankcal.model.estimation import StructuredFit, differences_stack, estimate_scores, fit_structured
from rankcal.model.matrix_model import ComparisonMatrix, ScoreVector
from rankcal.model.uncertainty import (
    RankingDistribution,
    ScoreLaw,
    central_region_probability,
    ranking_distribution,
    score_law,
    summary_probabilities,
    tv_distance,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StructuredHalf:
    fit: StructuredFit
    diag: ResidualDiagnostics
    deform: DeformationDiagnostics
    law: ScoreLaw
    dist: RankingDistribution


@dataclass(frozen=True)
class BrutalHalf:
    u_hat: ScoreVector
    residual: ComparisonMatrix
    diag: ResidualDiagnostics
    law: ScoreLaw
    dist: RankingDistribution


@dataclass(frozen=True)
class ComparisonDeltas:
    """Structured minus brutal; ``central_prob_diff`` is None when u_hat has ties."""

    central_prob_diff: Optional[float]
    topk_diff: np.ndarray
    tv: float


@dataclass(frozen=True)
class MethodComparison:
    structured: StructuredHalf
    brutal: BrutalHalf
    deltas: ComparisonDeltas


@dataclass(frozen=True)
class BrutalExpectation:
    e_ic2: float
    e_ir2: float
    e_sigma_sharp: float
    e_rho_sharp: float


def brutal_project(X: ComparisonMatrix) -> ComparisonMatrix:
    """X# = (X - X^T)/2: keeps the antisymmetric part and discards the rest."""
    return ComparisonMatrix((X.entries - X.entries.T) / 2.0)


def brutal_residual(X: ComparisonMatrix, u_hat: ScoreVector) -> ComparisonMatrix:
    """E#_ij = x_ij - (u_i - u_j)."""
    return ComparisonMatrix(X.entries - differences_stack(u_hat.values))


def brutal_pipeline(
    X: ComparisonMatrix,
    N: int,
    seed: int,
    stream: int = streams.STREAM_BRUTAL,
    threads: Optional[int] = 1,
) -> BrutalHalf:
    u_hat = estimate_scores(brutal_project(X))
    residual = brutal_residual(X, u_hat)
    diag = calibrate_noise(residual)
    law = score_law(u_hat, diag)
    return BrutalHalf(
        u_hat=u_hat,
        residual=residual,
        diag=diag,
        law=law,
        dist=ranking_distribution(law, N, seed, stream=stream, threads=threads),
    )


def structured_pipeline(
    X: ComparisonMatrix,
    N: int,
    seed: int,
    stream: int = streams.STREAM_STRUCTURED,
    threads: Optional[int] = 1,
) -> StructuredHalf:
    fit = fit_structured(X)
    diag = calibrate_noise(fit.residual)
    law = score_law(fit.u_hat, diag)
    return StructuredHalf(
        fit=fit,
        diag=diag,
        deform=deformation_diagnostics(fit.u_hat, fit.s_hat),
        law=law,
        dist=ranking_distribution(law, N, seed, stream=stream, threads=threads),
    )


def compare_distributions(
    structured: RankingDistribution, brutal: RankingDistribution, u_hat: ScoreVector
) -> ComparisonDeltas:
    summary_struct = summary_probabilities(structured)
    summary_brutal = summary_probabilities(brutal)
    try:
        central_diff = central_region_probability(structured, u_hat) - central_region_probability(
            brutal, u_hat
        )
    except TiedScoresError:
        central_diff = None
    topk_diff = np.cumsum(summary_struct.positions - summary_brutal.positions, axis=1)
    return ComparisonDeltas(
        central_prob_diff=central_diff,
        topk_diff=topk_diff,
        tv=tv_distance(structured, brutal),
    )


def compare_methods(
    X: ComparisonMatrix, N: int, seed: int, threads: Optional[int] = 1
) -> MethodComparison:
    """
    Runs the structured and brutal pipelines on independent sub-streams of one master seed.

    ``deltas.topk_diff[i, k-1]`` is the structured minus brutal probability that alternative i
    is in the top k.
    """
    structured = structured_pipeline(X, N, seed, threads=threads)
    brutal = brutal_pipeline(X, N, seed, threads=threads)
    if not np.array_equal(structured.fit.u_hat.values, brutal.u_hat.values):
        raise AssertionError("Structured and brutal score estimates differ.")
    logger.debug(
        "Structured sigma=%.4g rho=%.4g; brutal sigma=%.4g rho=%.4g",
        structured.diag.sigma_hat,
        structured.diag.rho_hat,
        brutal.diag.sigma_hat,
        brutal.diag.rho_hat,
    )
    return MethodComparison(
        structured=structured,
        brutal=brutal,
        deltas=compare_distributions(structured.dist, brutal.dist, structured.fit.u_hat),
    )


def deformation_indicators(s, n: Optional[int] = None) -> tuple[float, float]:
    """Noise-free IC2 and IR2 of S_ij = s_i + s_j: 4|s|^2/n and 8(n-2)|s|^2/(n(n-1))."""
    values = np.asarray(getattr(s, "values", s), dtype=float)
    n = values.shape[0] if n is None else n
    squared = float(np.dot(values, values))
    return 4.0 * squared / n, 8.0 * (n - 2) * squared / (n * (n - 1))


def expected_brutal_indicators(s, sigma: float, rho: float) -> BrutalExpectation:
    """
    Expected IC2 and IR2 of the brutal residual under deformation s and noise (sigma, rho).

    e_ic2 = 3 sigma^2 + 4|s|^2/n and e_ir2 = 2(1 + rho) sigma^2 + 8(n-2)|s|^2/(n(n-1)),
    with the implied apparent sigma and rho.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative.")
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [-1, 1].")
    ic2_s, ir2_s = deformation_indicators(s)
    e_ic2 = 3.0 * sigma**2 + ic2_s
    e_ir2 = 2.0 * (1.0 + rho) * sigma**2 + ir2_s
    return BrutalExpectation(
        e_ic2=e_ic2,
        e_ir2=e_ir2,
        e_sigma_sharp=math.sqrt(e_ic2 / 3.0),
        e_rho_sharp=1.5 * e_ir2 / e_ic2 - 1.0 if e_ic2 > 0 else 0.0,
    )
