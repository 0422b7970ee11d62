"""Residual indicators, plug-in noise calibration and scale-deformation diagnostics."""

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from rankcal.controller.exceptions import DimensionError
from rankcal.model.estimation import differences_stack
from rankcal.model.matrix_model import (
    MIN_DIMENSION,
    ComparisonMatrix,
    distinct_triples_mask,
    gap,
)

logger = logging.getLogger(__name__)

LAMBDA_NEGLIGIBLE = 0.1
GAMMA_NEGLIGIBLE = 0.25
GAMMA_INFLUENTIAL = 0.75
# IC2 at or below this is floating-point residue of an exactly consistent fit.
DEGENERATE_IC2 = 1e-24


class DeformationClass(str, enum.Enum):
    NEGLIGIBLE = "negligible"
    MODERATE = "moderate"
    INFLUENTIAL = "influential"


@dataclass(frozen=True)
class Thresholds:
    lambda0: float = LAMBDA_NEGLIGIBLE
    gamma0: float = GAMMA_NEGLIGIBLE
    gamma1: float = GAMMA_INFLUENTIAL

    def __post_init__(self):
        if min(self.lambda0, self.gamma0, self.gamma1) < 0:
            raise ValueError("Classification thresholds must be non-negative.")
        if self.gamma0 > self.gamma1:
            raise ValueError("gamma0 must not exceed gamma1.")


@dataclass(frozen=True)
class ResidualDiagnostics:
    """
    Residual indicators and the noise parameters they calibrate.

    ``rho_hat`` is clamped to [-1, 1]; ``rho_raw`` keeps the plug-in value.
    """

    ir2: float
    ic2: float
    sigma_hat: float
    rho_hat: float
    rho_raw: float
    degenerate: bool = False

    @property
    def clamped(self) -> bool:
        return self.rho_hat != self.rho_raw


@dataclass(frozen=True)
class DeformationDiagnostics:
    """Lambda and Gamma; ``None`` marks a ratio whose denominator vanishes."""

    lambda_: Optional[float]
    gamma: Optional[float]
    gap_u: float
    s_inf: float
    u_frob: float
    s_frob: float


@dataclass(frozen=True)
class Classification:
    label: DeformationClass
    warnings: tuple[str, ...] = field(default_factory=tuple)


def _pairs_factor(n: int) -> float:
    return 2.0 / (n * (n - 1))


def ir2_stack(e: np.ndarray) -> np.ndarray:
    """IR2 for each matrix of a (..., n, n) stack."""
    e = np.asarray(e, dtype=float)
    n = e.shape[-1]
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    defect = (e + np.swapaxes(e, -1, -2)) ** 2
    return _pairs_factor(n) * np.sum(defect * upper, axis=(-2, -1))


def ic2_stack(e: np.ndarray) -> np.ndarray:
    """IC2 for each matrix of a (..., n, n) stack."""
    e = np.asarray(e, dtype=float)
    n = e.shape[-1]
    if n < MIN_DIMENSION:
        raise DimensionError(f"IC2 needs n >= {MIN_DIMENSION}, got {n}.")
    total = np.zeros(e.shape[:-2])
    # Loop over the middle index j to keep memory at O(n^2) per matrix.
    for j in range(n):
        defects = e - e[..., :, j, None] - e[..., None, j, :]
        mask = distinct_triples_mask(n)[:, j, :]
        total = total + np.sum(defects**2 * mask, axis=(-2, -1))
    return total / (n * (n - 1) * (n - 2))


def ir2(E: ComparisonMatrix) -> float:
    """
    Mean squared residual reciprocity defect.

    IR2 = 2/(n(n-1)) * sum_{i<j} (E_ij + E_ji)^2.
    """
    return float(ir2_stack(E.entries))


def ic2(E: ComparisonMatrix) -> float:
    """
    Mean squared residual triangular defect over pairwise distinct ordered triples.

    IC2 = 1/(n(n-1)(n-2)) * sum (E_ik - E_ij - E_jk)^2.
    """
    return float(ic2_stack(E.entries))


def calibrate_stack(ir2_values: np.ndarray, ic2_values: np.ndarray) -> tuple[np.ndarray, ...]:
    """
    Vectorized plug-in calibration.

    Returns:
        tuple: (sigma_hat, rho_hat clamped, rho_raw, degenerate mask).
    """
    ir2_values = np.asarray(ir2_values, dtype=float)
    ic2_values = np.asarray(ic2_values, dtype=float)
    degenerate = ic2_values <= DEGENERATE_IC2
    safe = np.where(degenerate, 1.0, ic2_values)
    sigma_hat = np.where(degenerate, 0.0, np.sqrt(np.maximum(ic2_values, 0.0) / 3.0))
    rho_raw = np.where(degenerate, 0.0, 1.5 * ir2_values / safe - 1.0)
    return sigma_hat, np.clip(rho_raw, -1.0, 1.0), rho_raw, degenerate


def calibrate_noise(E: ComparisonMatrix) -> ResidualDiagnostics:
    """
    Plug-in noise calibration on a residual matrix.

    sigma^2 = IC2/3 and rho = (3/2) IR2/IC2 - 1. A residual whose IC2 does not exceed
    DEGENERATE_IC2 is flagged as degenerate and calibrated to sigma = rho = 0.
    """
    ir2_value = ir2(E)
    ic2_value = ic2(E)
    sigma_hat, rho_hat, rho_raw, degenerate = calibrate_stack(ir2_value, ic2_value)
    diagnostics = ResidualDiagnostics(
        ir2=ir2_value,
        ic2=ic2_value,
        sigma_hat=float(sigma_hat),
        rho_hat=float(rho_hat),
        rho_raw=float(rho_raw),
        degenerate=bool(degenerate),
    )
    if diagnostics.degenerate:
        logger.warning("Residual has no triangular defect; calibrating to zero noise.")
    elif diagnostics.clamped:
        logger.warning("rho_hat = %.6g is outside [-1, 1]; clamped.", diagnostics.rho_raw)
    logger.debug("Calibration: IR2=%.6g IC2=%.6g sigma=%.6g", ir2_value, ic2_value, sigma_hat)
    return diagnostics


def deformation_stack(u: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Vectorized (Lambda, Gamma) for (..., n) stacks; NaN marks a vanishing denominator.

    The Frobenius norm of S runs over the full matrix with S_ii = 2 s_i.
    """
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    u_frob = np.sqrt(np.sum(differences_stack(u) ** 2, axis=(-2, -1)))
    s_frob = np.sqrt(np.sum((s[..., :, None] + s[..., None, :]) ** 2, axis=(-2, -1)))
    ordered = -np.sort(-u, axis=-1)
    gaps = np.min(ordered[..., :-1] - ordered[..., 1:], axis=-1)
    s_inf = np.max(np.abs(s), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lambdas = np.where(u_frob > 0, s_frob / np.where(u_frob > 0, u_frob, 1.0), np.nan)
        gammas = np.where(gaps > 0, 2.0 * s_inf / np.where(gaps > 0, gaps, 1.0), np.nan)
    return lambdas, gammas


def deformation_diagnostics(u_hat, s_hat) -> DeformationDiagnostics:
    """
    Global ratio Lambda = ||S||_F / ||U||_F and local index Gamma = 2 ||s||_inf / gap(u).
    """
    u = np.asarray(getattr(u_hat, "values", u_hat), dtype=float)
    s = np.asarray(getattr(s_hat, "values", s_hat), dtype=float)
    if u.shape != s.shape:
        raise DimensionError(f"Dimension mismatch: {u.shape[0]} != {s.shape[0]}.")
    u_frob = float(np.linalg.norm(differences_stack(u)))
    s_frob = float(np.linalg.norm(s[:, None] + s[None, :]))
    gap_u = gap(u)
    s_inf = float(np.max(np.abs(s)))
    return DeformationDiagnostics(
        lambda_=s_frob / u_frob if u_frob > 0 else None,
        gamma=2.0 * s_inf / gap_u if gap_u > 0 else None,
        gap_u=gap_u,
        s_inf=s_inf,
        u_frob=u_frob,
        s_frob=s_frob,
    )


def classify_deformation(
    d: DeformationDiagnostics, thresholds: Thresholds = Thresholds()
) -> Classification:
    """
    Reads Lambda and Gamma as negligible, moderate or influential deformation.

    An undefined Gamma (tied scores) is influential.
    """
    if d.gamma is None:
        return Classification(
            DeformationClass.INFLUENTIAL,
            ("Estimated scores tie: gap(u_hat) = 0 and Gamma is undefined.",),
        )
    lambda_ = d.lambda_ if d.lambda_ is not None else math.inf
    if d.gamma >= thresholds.gamma1:
        return Classification(DeformationClass.INFLUENTIAL)
    if lambda_ < thresholds.lambda0 and d.gamma < thresholds.gamma0:
        return Classification(DeformationClass.NEGLIGIBLE)
    return Classification(DeformationClass.MODERATE)


FRAGILE_CENTRAL = 0.5


class SettingClass(str, enum.Enum):
    STABLE = "stable"
    STABLE_ASYMMETRIC = "stable_asymmetric"
    FRAGILE = "fragile"


def classify_setting(label: DeformationClass, central_probability: Optional[float]) -> SettingClass:
    """
    Decision reading of an analysis.

    fragile: the central ranking region holds less than FRAGILE_CENTRAL of the mass, or is
    undefined. stable: negligible deformation around a concentrated distribution.
    stable_asymmetric: concentrated, but the deformation is not negligible.

    The residual noise enters through central_probability: the score law has scale
    (1 - rho_hat) sigma_hat^2 / (2n), so a concentrated distribution is the low-noise
    condition measured against the gaps of u_hat.
    """
    if central_probability is None or central_probability < FRAGILE_CENTRAL:
        return SettingClass.FRAGILE
    if DeformationClass(label) is DeformationClass.NEGLIGIBLE:
        return SettingClass.STABLE
    return SettingClass.STABLE_ASYMMETRIC
