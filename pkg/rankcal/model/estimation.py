"""Closed-form least-squares estimation of the latent scores and the scale deformation."""

import logging
from dataclasses import dataclass

import numpy as np

from rankcal.controller.exceptions import DimensionError
from rankcal.model.matrix_model import (
    MIN_DIMENSION,
    ComparisonMatrix,
    ScaleVector,
    ScoreVector,
    decompose,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StructuredFit:
    """
    Fitted structured model X ~ U + S + E.

    Attributes:
        u_hat (ScoreVector): Estimated latent scores.
        s_hat (ScaleVector): Estimated scale deformation.
        fitted (ComparisonMatrix): M_ij = u_i - u_j + s_i + s_j off the diagonal.
        residual (ComparisonMatrix): X - M off the diagonal.
    """

    u_hat: ScoreVector
    s_hat: ScaleVector
    fitted: ComparisonMatrix
    residual: ComparisonMatrix

    @property
    def n(self) -> int:
        return self.u_hat.n


def score_stack(k: np.ndarray) -> np.ndarray:
    """Row means of each antisymmetric matrix in a (..., n, n) stack, diagonal included."""
    return np.asarray(k, dtype=float).mean(axis=-1)


def scale_stack(h: np.ndarray) -> np.ndarray:
    """(r_i - mean r) / (n - 2) for each symmetric matrix in a (..., n, n) stack."""
    h = np.asarray(h, dtype=float)
    n = h.shape[-1]
    if n < MIN_DIMENSION:
        raise DimensionError(f"Scale estimation needs n >= {MIN_DIMENSION}, got {n}.")
    off = h - np.einsum("...ii->...i", h)[..., None] * np.eye(n)
    r = off.sum(axis=-1)
    return (r - r.mean(axis=-1, keepdims=True)) / (n - 2)


def differences_stack(u: np.ndarray) -> np.ndarray:
    """U_ij = u_i - u_j for a (..., n) stack of vectors."""
    return u[..., :, None] - u[..., None, :]


def sums_stack(s: np.ndarray) -> np.ndarray:
    """S_ij = s_i + s_j off the diagonal, zero on it."""
    n = s.shape[-1]
    return (s[..., :, None] + s[..., None, :]) * ~np.eye(n, dtype=bool)


def estimate_scores(K: ComparisonMatrix) -> ScoreVector:
    """
    Least-squares latent scores from the antisymmetric part: u_i = (1/n) sum_j K_ij.
    """
    return ScoreVector.centered(score_stack(K.entries))


def estimate_scale(H: ComparisonMatrix) -> ScaleVector:
    """
    Least-squares scale deformation from the symmetric part: s_i = (r_i - mean r)/(n - 2).

    Raises:
        DimensionError: If n < 3.
    """
    return ScaleVector.centered(scale_stack(H.entries))


def fit_structured(X: ComparisonMatrix) -> StructuredFit:
    parts = decompose(X)
    u_hat = estimate_scores(parts.antisymmetric)
    s_hat = estimate_scale(parts.symmetric)
    fitted = differences_stack(u_hat.values) + sums_stack(s_hat.values)
    np.fill_diagonal(fitted, 0.0)
    if X.n == MIN_DIMENSION:
        logger.warning("n = 3: the scale estimate has denominator n - 2 = 1 and is noise-sensitive.")
    logger.debug("Structured fit: u_hat=%s s_hat=%s", u_hat.to_list(), s_hat.to_list())
    return StructuredFit(
        u_hat=u_hat,
        s_hat=s_hat,
        fitted=ComparisonMatrix(fitted),
        residual=ComparisonMatrix(X.entries - fitted),
    )


def consistencize(X: ComparisonMatrix) -> tuple[ScoreVector, ComparisonMatrix]:
    """
    Least-squares projection onto additively consistent matrices, via row means of K.

    Returns:
        tuple[ScoreVector, ComparisonMatrix]: The scores and the matrix u_i - u_j.
    """
    u_hat = estimate_scores(decompose(X).antisymmetric)
    return u_hat, ComparisonMatrix.from_differences(u_hat)


def ranking_criterion(K: ComparisonMatrix, u) -> float:
    """Phi(u) = sum_{i != j} (K_ij - (u_i - u_j))^2."""
    values = np.asarray(getattr(u, "values", u), dtype=float)
    return float(np.sum((K.entries - differences_stack(values)) ** 2))


def scale_criterion(H: ComparisonMatrix, s) -> float:
    """Psi(s) = sum_{i != j} (H_ij - (s_i + s_j))^2."""
    values = np.asarray(getattr(s, "values", s), dtype=float)
    return float(np.sum((H.entries - sums_stack(values)) ** 2))
