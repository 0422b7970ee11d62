import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from rankcal.controller.exceptions import (
    ConsistencyError,
    DimensionError,
    MatrixFormatError,
)

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9
DIAGONAL_TOLERANCE = 1e-12
CENTERING_TOLERANCE = 1e-12
MIN_DIMENSION = 3

ArrayLike = Union[np.ndarray, Sequence[Sequence[float]]]


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


class ComparisonMatrix:
    """
    Square matrix of additive pairwise judgments with an exact zero diagonal.

    Entry (i, j) is the judgment of alternative i against alternative j.
    """

    def __init__(self, entries: ArrayLike, tolerance: float = DIAGONAL_TOLERANCE):
        """
        Initializes a ComparisonMatrix from any square array.

        Args:
            entries (ArrayLike): n x n real values.
            tolerance (float): Largest accepted absolute diagonal entry. The diagonal is
                then set to exactly zero.

        Raises:
            MatrixFormatError: If the array is not square, not finite, or has a nonzero diagonal.
            DimensionError: If n < 3.
        """
        values = np.array(entries, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise MatrixFormatError(f"Comparison matrix must be square, got shape {values.shape}.")
        if not np.all(np.isfinite(values)):
            raise MatrixFormatError("Comparison matrix has non-finite entries.")
        if values.shape[0] < MIN_DIMENSION:
            raise DimensionError(
                f"Comparison matrix needs at least {MIN_DIMENSION} alternatives, got {values.shape[0]}."
            )
        diagonal = np.abs(np.diag(values))
        if np.any(diagonal > tolerance):
            worst = int(np.argmax(diagonal))
            raise MatrixFormatError(
                f"Diagonal entry ({worst + 1},{worst + 1}) = {values[worst, worst]!r} is not zero."
            )
        np.fill_diagonal(values, 0.0)
        self.entries = _frozen(values)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def transpose(self) -> "ComparisonMatrix":
        return ComparisonMatrix(self.entries.T)

    def __add__(self, other: "ComparisonMatrix") -> "ComparisonMatrix":
        check_same_dimension(self.n, other.n)
        return ComparisonMatrix(self.entries + other.entries)

    def __sub__(self, other: "ComparisonMatrix") -> "ComparisonMatrix":
        check_same_dimension(self.n, other.n)
        return ComparisonMatrix(self.entries - other.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ComparisonMatrix):
            return NotImplemented
        return self.entries.shape == other.entries.shape and bool(
            np.array_equal(self.entries, other.entries)
        )

    def __repr__(self) -> str:
        return f"ComparisonMatrix(n={self.n})"

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[float]]) -> "ComparisonMatrix":
        return cls([list(row) for row in rows])

    @classmethod
    def zeros(cls, n: int) -> "ComparisonMatrix":
        return cls(np.zeros((n, n)))

    @classmethod
    def from_differences(cls, u: ArrayLike) -> "ComparisonMatrix":
        """Builds the consistent matrix with entries u_i - u_j."""
        u = np.asarray(getattr(u, "values", u), dtype=float)
        return cls(u[:, None] - u[None, :])

    def to_rows(self) -> list[list[float]]:
        return [[float(value) for value in row] for row in self.entries]

    def to_csv(self) -> str:
        """Renders the matrix with the shortest repr of each entry, so re-parsing is exact."""
        return "".join(",".join(repr(value) for value in row) + "\n" for row in self.to_rows())


@dataclass(frozen=True, eq=False)
class CenteredVector:
    """A real vector whose coordinates sum to zero."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError(f"Expected a one-dimensional vector, got shape {values.shape}.")
        scale = max(1.0, float(np.sum(np.abs(values))))
        if abs(float(np.sum(values))) > CENTERING_TOLERANCE * scale:
            raise ValueError(f"Vector is not centered: sum = {float(np.sum(values))!r}.")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def centered(cls, values: ArrayLike):
        """Subtracts the mean before building the vector."""
        values = np.asarray(values, dtype=float)
        return cls(values - values.mean())

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.n

    def __mul__(self, factor: float):
        return type(self)(self.values * float(factor))

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CenteredVector):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    def to_list(self) -> list[float]:
        return [float(value) for value in self.values]


class ScoreVector(CenteredVector):
    """Latent ranking scores u (or their estimate)."""


class ScaleVector(CenteredVector):
    """Scale-deformation coefficients s (or their estimate)."""


@dataclass(frozen=True)
class Ranking:
    """
    A strict ranking, listing 0-based alternative indices from best to worst.

    Labels use 1-based indices, e.g. ``"3>2>1>4"``.
    """

    order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"Ranking {order} is not a permutation of 0..{len(order) - 1}.")
        object.__setattr__(self, "order", order)

    @property
    def n(self) -> int:
        return len(self.order)

    def positions(self) -> np.ndarray:
        """Position (0 = best) of each alternative."""
        positions = np.empty(self.n, dtype=int)
        positions[list(self.order)] = np.arange(self.n)
        return positions

    def label(self) -> str:
        return ">".join(str(i + 1) for i in self.order)

    @classmethod
    def from_label(cls, label: str) -> "Ranking":
        return cls(tuple(int(token) - 1 for token in label.split(">")))

    @classmethod
    def identity(cls, n: int) -> "Ranking":
        return cls(tuple(range(n)))

    def __str__(self) -> str:
        return self.label()


@dataclass(frozen=True)
class Decomposition:
    antisymmetric: ComparisonMatrix
    symmetric: ComparisonMatrix


@dataclass(frozen=True)
class Admissibility:
    """Outcome of the strict-ranking admissibility check."""

    admissible: bool
    ranking: Optional[Ranking] = None
    # (winner, loser) pairs a>b, b>c, c>a, 0-based.
    cycle: Optional[tuple[tuple[int, int], ...]] = None
    has_zero: bool = False

    def cycle_labels(self) -> Optional[list[str]]:
        if self.cycle is None:
            return None
        return [f"{winner + 1}>{loser + 1}" for winner, loser in self.cycle]


@dataclass(frozen=True)
class RankingOutcome:
    ranking: Ranking
    tied: bool = field(default=False)


def check_same_dimension(n: int, m: int) -> None:
    if n != m:
        raise DimensionError(f"Dimension mismatch: {n} != {m}.")


def _off_diagonal(n: int) -> np.ndarray:
    return ~np.eye(n, dtype=bool)


def decompose(X: ComparisonMatrix) -> Decomposition:
    """
    Splits X into its antisymmetric part K = (X - X^T)/2 and symmetric part H = (X + X^T)/2.
    """
    x = X.entries
    return Decomposition(
        antisymmetric=ComparisonMatrix((x - x.T) / 2.0),
        symmetric=ComparisonMatrix((x + x.T) / 2.0),
    )


def first_nonreciprocal_pair(
    X: ComparisonMatrix, tol: float = DEFAULT_TOLERANCE
) -> Optional[tuple[int, int]]:
    """Returns the first pair i < j (0-based, row-major) with |x_ij + x_ji| > tol."""
    if tol < 0:
        raise ValueError("Tolerance must be non-negative.")
    defect = np.abs(X.entries + X.entries.T)
    rows, cols = np.nonzero(np.triu(defect > tol, k=1))
    if rows.size == 0:
        return None
    return int(rows[0]), int(cols[0])


def is_reciprocal(X: ComparisonMatrix, tol: float = DEFAULT_TOLERANCE) -> bool:
    return first_nonreciprocal_pair(X, tol) is None


def triangle_defects(x: np.ndarray) -> np.ndarray:
    """
    Array D[..., i, j, k] = x_ik - x_ij - x_jk for a stack of matrices.

    Entries where i, j, k are not pairwise distinct are set to zero.
    """
    x = np.asarray(x, dtype=float)
    defects = x[..., :, None, :] - x[..., :, :, None] - x[..., None, :, :]
    return defects * distinct_triples_mask(x.shape[-1])


def distinct_triples_mask(n: int) -> np.ndarray:
    i, j, k = np.ogrid[:n, :n, :n]
    return (i != j) & (j != k) & (i != k)


def first_inconsistent_triple(
    X: ComparisonMatrix, tol: float = DEFAULT_TOLERANCE
) -> Optional[tuple[int, int, int]]:
    """Returns the first ordered triple (i, j, k), 0-based, with |x_ik - x_ij - x_jk| > tol."""
    if tol < 0:
        raise ValueError("Tolerance must be non-negative.")
    hits = np.argwhere(np.abs(triangle_defects(X.entries)) > tol)
    if hits.size == 0:
        return None
    return tuple(int(v) for v in hits[0])


def is_additively_consistent(X: ComparisonMatrix, tol: float = DEFAULT_TOLERANCE) -> bool:
    return first_inconsistent_triple(X, tol) is None


def scores_from_consistent(X: ComparisonMatrix, tol: float = DEFAULT_TOLERANCE) -> ScoreVector:
    """
    Recovers the centered scores of an additively consistent matrix.

    Uses u_i = x_i1, then recenters.

    Raises:
        ConsistencyError: If some triple violates additivity by more than tol.
    """
    triple = first_inconsistent_triple(X, tol)
    if triple is not None:
        i, j, k = triple
        raise ConsistencyError(
            f"Matrix is not additively consistent: triple ({i + 1},{j + 1},{k + 1}) "
            f"violates x_ik = x_ij + x_jk."
        )
    return ScoreVector.centered(X.entries[:, 0])


def admissible_stack(x: np.ndarray) -> np.ndarray:
    """
    Vectorized admissibility for a stack of matrices of shape (..., n, n).

    A sign pattern is a strict total order iff every pair is strictly decided in exactly one
    direction and the win counts are exactly 0, 1, ..., n - 1.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    off = _off_diagonal(n)
    beats = (x > 0) & off
    decided = beats ^ np.swapaxes(beats, -1, -2)
    nonzero = np.all((x != 0) | ~off, axis=(-2, -1))
    tournament = np.all(decided | ~off, axis=(-2, -1)) & nonzero
    wins = np.sort(beats.sum(axis=-1), axis=-1)
    transitive = np.all(wins == np.arange(n), axis=-1)
    return tournament & transitive


def find_three_cycle(X: ComparisonMatrix) -> Optional[tuple[tuple[int, int], ...]]:
    """Lexicographically smallest (a, b, c) with a > b, b > c, c > a under x_ij > 0."""
    beats = X.entries > 0
    for a, b, c in itertools.permutations(range(X.n), 3):
        if a < b and a < c and beats[a, b] and beats[b, c] and beats[c, a]:
            return (a, b), (b, c), (c, a)
    return None


def strict_ranking_admissible(X: ComparisonMatrix) -> Admissibility:
    """
    Checks whether the relation {i > j when x_ij > 0} is a strict total order.

    Zero off-diagonal entries make the matrix non-admissible.
    """
    x = X.entries
    has_zero = bool(np.any((x == 0) & _off_diagonal(X.n)))
    if bool(admissible_stack(x)):
        wins = (x > 0).sum(axis=1)
        return Admissibility(
            admissible=True,
            ranking=Ranking(tuple(int(i) for i in np.argsort(-wins, kind="stable"))),
        )
    return Admissibility(admissible=False, cycle=find_three_cycle(X), has_zero=has_zero)


def _values(u) -> np.ndarray:
    return np.asarray(getattr(u, "values", u), dtype=float)


def ranking_of(u) -> RankingOutcome:
    """
    Strict ranking by decreasing score; exact ties are broken by ascending index and flagged.
    """
    values = _values(u)
    order = np.argsort(-values, kind="stable")
    ordered = values[order]
    tied = bool(np.any(ordered[:-1] == ordered[1:]))
    return RankingOutcome(Ranking(tuple(int(i) for i in order)), tied)


def rank_orders(samples: np.ndarray) -> np.ndarray:
    """Row-wise best-to-worst orders for a (N, n) array of score vectors, ties by index."""
    return np.argsort(-samples, axis=-1, kind="stable")


def gap(u) -> float:
    """Smallest consecutive difference of the scores sorted in decreasing order."""
    values = _values(u)
    if values.shape[0] < 2:
        raise DimensionError("gap needs at least two scores.")
    ordered = np.sort(values)[::-1]
    return float(np.min(ordered[:-1] - ordered[1:]))


def is_ranking_compatible(M: ComparisonMatrix, u) -> bool:
    """sign(m_ij) == sign(u_i - u_j) for all i != j; a zero only matches a zero."""
    values = _values(u)
    check_same_dimension(M.n, values.shape[0])
    differences = values[:, None] - values[None, :]
    agree = np.sign(M.entries) == np.sign(differences)
    return bool(np.all(agree | ~_off_diagonal(M.n)))


def read_matrix(path: str) -> ComparisonMatrix:
    """
    Loads a comparison matrix from a CSV file of n rows of n comma-separated numbers.

    Lines starting with ``#`` are ignored.

    Raises:
        MatrixFormatError: If the file is missing, malformed, non-square, or has a nonzero diagonal.
        DimensionError: If n < 3.
    """
    try:
        values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, dtype=float)
    except FileNotFoundError as e:
        raise MatrixFormatError(f"Matrix file not found: {path}") from e
    except ValueError as e:
        raise MatrixFormatError(f"Malformed matrix file {path}: {e}") from e
    if values.size == 0:
        raise MatrixFormatError(f"Matrix file {path} is empty.")
    logger.debug("Loaded %s with shape %s", path, values.shape)
    return ComparisonMatrix(values)


def write_matrix(X: ComparisonMatrix, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(X.to_csv())
