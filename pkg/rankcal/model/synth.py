"""Synthetic comparison matrices: latent profiles, deformation regimes and paired Gaussian noise."""

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from rankcal.controller.exceptions import DimensionError, RegimeError
from rankcal.model import streams
from rankcal.model.matrix_model import (
    MIN_DIMENSION,
    ComparisonMatrix,
    ScaleVector,
    ScoreVector,
    check_same_dimension,
    gap,
)

logger = logging.getLogger(__name__)

# Deformation profile of the fixed-noise study, stretched to other dimensions.
REFERENCE_PROFILE = (0.08, 0.03, -0.03, -0.08)
MODERATE_GAMMA = 0.5
STRONG_GAMMA = 1.5


class Regime(str, enum.Enum):
    NONE = "none"
    MODERATE = "moderate"
    STRONG = "strong"


@dataclass(frozen=True)
class NoiseSpec:
    """Var(e_ij) = sigma^2 and Cov(e_ij, e_ji) = rho sigma^2."""

    sigma: float
    rho: float = 0.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma!r}.")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho!r}.")


@dataclass(frozen=True)
class ScenarioConfig:
    """
    One simulation scenario. The deformation vector is validated against its regime.

    Raises:
        RegimeError: If ``s`` violates the inequality of ``regime``.
    """

    n: int
    spacing_c: float
    regime: Regime
    s: ScaleVector
    noise: NoiseSpec
    replications: int
    samples_per_rep: int
    seed: int
    name: str = field(default="")

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if self.n < MIN_DIMENSION:
            raise DimensionError(f"Scenario needs n >= {MIN_DIMENSION}, got {self.n}.")
        if self.replications < 1 or self.samples_per_rep < 1:
            raise ValueError("replications and samples_per_rep must be positive.")
        check_same_dimension(self.n, self.s.n)
        check_regime(self.regime, self.latent().values, self.s.values)

    def latent(self) -> ScoreVector:
        return latent_scores(self.n, self.spacing_c)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "c": self.spacing_c,
            "regime": self.regime.value,
            "s": self.s.to_list(),
            "sigma": self.noise.sigma,
            "rho": self.noise.rho,
            "replications": self.replications,
            "samples": self.samples_per_rep,
            "seed": self.seed,
        }


def check_regime(regime: Regime, u: np.ndarray, s: np.ndarray) -> None:
    """none: s = 0; moderate: 2|s|_inf < gap(u); strong: 2|s|_inf >= gap(u)."""
    reach = 2.0 * float(np.max(np.abs(s)))
    gap_u = gap(u)
    if regime is Regime.NONE and reach != 0.0:
        raise RegimeError("Regime 'none' requires s = 0.")
    if regime is Regime.MODERATE and not reach < gap_u:
        raise RegimeError(f"Regime 'moderate' requires 2|s|_inf = {reach:.6g} < gap(u) = {gap_u:.6g}.")
    if regime is Regime.STRONG and not reach >= gap_u:
        raise RegimeError(f"Regime 'strong' requires 2|s|_inf = {reach:.6g} >= gap(u) = {gap_u:.6g}.")


def latent_scores(n: int, c: float) -> ScoreVector:
    """Equally spaced, strictly decreasing centered scores u_i = c((n + 1)/2 - i)."""
    if n < MIN_DIMENSION:
        raise DimensionError(f"Latent scores need n >= {MIN_DIMENSION}, got {n}.")
    if not c > 0:
        raise ValueError(f"Spacing c must be positive, got {c!r}.")
    return ScoreVector(c * ((n + 1) / 2.0 - np.arange(1, n + 1)))


def deformation_profile(n: int) -> np.ndarray:
    """Reference profile resampled to n points, centered, with unit sup norm."""
    grid = np.linspace(0.0, len(REFERENCE_PROFILE) - 1.0, n)
    profile = np.interp(grid, np.arange(len(REFERENCE_PROFILE)), REFERENCE_PROFILE)
    profile = profile - profile.mean()
    return profile / np.max(np.abs(profile))


def default_deformation(regime: Regime, u: ScoreVector) -> ScaleVector:
    """Deformation of the regime's default strength: Gamma = 0.5 (moderate) or 1.5 (strong)."""
    regime = Regime(regime)
    if regime is Regime.NONE:
        return ScaleVector(np.zeros(u.n))
    target = MODERATE_GAMMA if regime is Regime.MODERATE else STRONG_GAMMA
    return ScaleVector.centered(deformation_profile(u.n) * target * gap(u) / 2.0)


def noise_stack(count: int, n: int, spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """
    Draws ``count`` noise matrices as a (count, n, n) array.

    Each unordered pair gets e_ij = sigma z1 and e_ji = sigma (rho z1 + sqrt(1 - rho^2) z2).
    """
    rows, cols = np.triu_indices(n, k=1)
    z = rng.standard_normal((2, count, rows.size))
    upper = spec.sigma * z[0]
    lower = spec.sigma * (spec.rho * z[0] + math.sqrt(max(0.0, 1.0 - spec.rho**2)) * z[1])
    noise = np.zeros((count, n, n))
    noise[:, rows, cols] = upper
    noise[:, cols, rows] = lower
    return noise


def noise_matrix(n: int, spec: NoiseSpec, seed: int, *keys: int) -> ComparisonMatrix:
    """One noise matrix, deterministic in (seed, keys)."""
    rng = streams.substream(seed, streams.STREAM_NOISE, *keys)
    return ComparisonMatrix(noise_stack(1, n, spec, rng)[0])


def structured_stack(u, s) -> np.ndarray:
    """Noise-free u_i - u_j + s_i + s_j off the diagonal."""
    u = np.asarray(getattr(u, "values", u), dtype=float)
    s = np.asarray(getattr(s, "values", s), dtype=float)
    check_same_dimension(u.shape[0], s.shape[0])
    m = u[:, None] - u[None, :] + s[:, None] + s[None, :]
    np.fill_diagonal(m, 0.0)
    return m


def observed_matrix(u: ScoreVector, s: ScaleVector, noise: Optional[ComparisonMatrix] = None) -> ComparisonMatrix:
    """x_ij = u_i - u_j + s_i + s_j + e_ij, zero diagonal."""
    m = structured_stack(u, s)
    if noise is not None:
        check_same_dimension(m.shape[0], noise.n)
        m = m + noise.entries
    return ComparisonMatrix(m)
