"""
Exact second-moment machinery for jointly Gaussian vectors.

Every closed form in the other services is checked against the functions here:
conditional covariances, log-determinants, mutual information and differential
entropy, all evaluated from covariance matrices. Information is in nats.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from state_estimation.exceptions import InvalidParameterError, SingularCovarianceError

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-9
PIVOT_RTOL = 1e-12
LOG_2PI_E = math.log(2.0 * math.pi * math.e)


class CovMatrix:
    """
    Immutable symmetric positive semidefinite matrix of second moments.

    The stored entries are symmetrized after validation so downstream
    factorizations see an exactly symmetric array.
    """

    def __init__(self, entries, *, check: bool = True):
        arr = np.array(entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise InvalidParameterError(
                "entries", f"expected a non-empty square matrix, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("entries", "covariance entries must be finite")
        if check:
            self._validate(arr)
        arr = 0.5 * (arr + arr.T)
        arr.setflags(write=False)
        self._entries = arr

    @staticmethod
    def _validate(arr: np.ndarray) -> None:
        scale = float(np.max(np.abs(arr)))
        asymmetry = float(np.max(np.abs(arr - arr.T)))
        if asymmetry > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
            raise InvalidParameterError(
                "entries", f"matrix is not symmetric (max deviation {asymmetry:.3g})"
            )
        eigenvalues = np.linalg.eigvalsh(0.5 * (arr + arr.T))
        largest = max(float(eigenvalues[-1]), 0.0)
        if eigenvalues[0] < -PSD_RTOL * largest:
            raise InvalidParameterError(
                "entries",
                f"matrix is not positive semidefinite (eigenvalue {eigenvalues[0]:.3g})",
            )

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    def block(self, rows: Sequence[int], cols: Optional[Sequence[int]] = None) -> np.ndarray:
        """Return the sub-block selected by row and column index lists."""
        cols = rows if cols is None else cols
        return self._entries[np.ix_(list(rows), list(cols))]

    def select(self, indices: Sequence[int]) -> "CovMatrix":
        """Principal sub-matrix, re-indexed 0..len(indices)-1."""
        return CovMatrix(self.block(indices), check=False)

    def __repr__(self) -> str:
        return f"CovMatrix(dim={self.dim})"


@dataclass(frozen=True)
class IndexPartition:
    """Selects I(left; right | conditioning) inside a joint covariance."""
    left: tuple[int, ...]
    right: tuple[int, ...]
    conditioning: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for name in ("left", "right", "conditioning"):
            values = tuple(int(i) for i in getattr(self, name))
            object.__setattr__(self, name, values)
            if len(set(values)) != len(values):
                raise InvalidParameterError(name, f"indices must be distinct: {list(values)}")
        if not self.left or not self.right:
            raise InvalidParameterError("left", "both sides of a partition must be non-empty")
        pairs = (
            ("left", "right"),
            ("left", "conditioning"),
            ("right", "conditioning"),
        )
        for a, b in pairs:
            overlap = set(getattr(self, a)) & set(getattr(self, b))
            if overlap:
                raise InvalidParameterError(
                    b, f"overlaps {a} at indices {sorted(overlap)}"
                )

    def check_dim(self, dim: int) -> None:
        _check_indices(dim, self.left + self.right + self.conditioning, "partition")


def _check_indices(dim: int, indices: Sequence[int], name: str) -> None:
    for i in indices:
        if not 0 <= i < dim:
            raise InvalidParameterError(name, f"index {i} outside joint dimension {dim}")


def _first_dependent_pivot(matrix: np.ndarray, tolerance: float) -> int:
    """Position of the first pivot below tolerance in an unpivoted elimination."""
    work = np.array(matrix, dtype=float)
    n = work.shape[0]
    for j in range(n):
        pivot = work[j, j]
        if pivot <= tolerance:
            return j
        column = work[j + 1:, j]
        work[j + 1:, j + 1:] -= np.outer(column, column) / pivot
    return n - 1


def cholesky_factor(matrix: np.ndarray, indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Lower Cholesky factor with the relative pivot rule.

    Args:
        matrix: Symmetric block to factor
        indices: Joint indices of the block rows, used to name offending entries

    Returns:
        Lower-triangular factor L with L @ L.T == matrix

    Raises:
        SingularCovarianceError: if any squared pivot is below 1e-12 times the
            largest diagonal entry
    """
    indices = list(range(matrix.shape[0])) if indices is None else list(indices)
    scale = float(np.max(np.diag(matrix))) if matrix.size else 0.0
    if scale <= 0.0:
        raise SingularCovarianceError(indices, "covariance block has no positive variance")
    tolerance = PIVOT_RTOL * scale
    try:
        factor = linalg.cholesky(matrix, lower=True, check_finite=False)
    except linalg.LinAlgError:
        position = _first_dependent_pivot(matrix, tolerance)
        raise SingularCovarianceError(
            [indices[position]], "conditioning block is not positive definite"
        )
    pivots = np.diag(factor) ** 2
    small = np.flatnonzero(pivots < tolerance)
    if small.size:
        raise SingularCovarianceError(
            [indices[j] for j in small], "conditioning block is numerically singular"
        )
    return factor


def conditional_covariance(
    joint: CovMatrix, targets: Sequence[int], given: Sequence[int]
) -> CovMatrix:
    """
    Covariance of the targets after linear MMSE conditioning on `given`.

    Computes K_AA - K_AB K_BB^-1 K_AB^T through a Cholesky factor of K_BB.
    Targets may overlap `given`; those rows condition to zero.
    """
    targets = list(targets)
    given = list(given)
    _check_indices(joint.dim, targets, "targets")
    _check_indices(joint.dim, given, "given")
    saa = joint.block(targets)
    if not given:
        return CovMatrix(saa, check=False)

    factor = cholesky_factor(joint.block(given), given)
    whitened = linalg.solve_triangular(
        factor, joint.block(targets, given).T, lower=True, check_finite=False
    )
    conditioned = saa - whitened.T @ whitened
    return CovMatrix(conditioned, check=False)


def gaussian_logdet(cov, indices: Optional[Sequence[int]] = None) -> float:
    """Natural log-determinant through the pivot-checked Cholesky factor."""
    entries = cov.entries if isinstance(cov, CovMatrix) else np.asarray(cov, dtype=float)
    factor = cholesky_factor(entries, indices)
    return 2.0 * float(np.sum(np.log(np.diag(factor))))


def toeplitz_det(a: float, b: float, k: int) -> float:
    """Determinant of the k x k matrix with diagonal a and off-diagonal b."""
    if k < 1:
        raise InvalidParameterError("k", f"dimension must be at least 1, got {k}")
    return (a + (k - 1) * b) * (a - b) ** (k - 1)


def toeplitz_logdet(a: float, b: float, k: int) -> float:
    """
    Log-determinant of the same structured matrix, stable for very large k.

    Raises:
        InvalidParameterError: if the matrix is not positive definite
    """
    if k < 1:
        raise InvalidParameterError("k", f"dimension must be at least 1, got {k}")
    head = a + (k - 1) * b
    if head <= 0 or (k > 1 and a - b <= 0):
        raise InvalidParameterError(
            "a", f"matrix with diagonal {a} and off-diagonal {b} is not positive definite"
        )
    tail = (k - 1) * math.log(a - b) if k > 1 else 0.0
    return math.log(head) + tail


def f1(alpha: float, beta: float, k: float, c: float) -> float:
    """alpha + (k-2) beta - (k-1) c."""
    return alpha + (k - 2) * beta - (k - 1) * c


def gaussian_mi(joint: CovMatrix, part: IndexPartition) -> float:
    """
    I(left; right | conditioning) in nats.

    Raises:
        SingularCovarianceError: if the conditioning block or the conditioned
            (left, right) block is singular
    """
    part.check_dim(joint.dim)
    left = list(part.left)
    right = list(part.right)
    conditioned = conditional_covariance(joint, left + right, list(part.conditioning))
    n_left = len(left)
    entries = conditioned.entries
    logdet_left = gaussian_logdet(entries[:n_left, :n_left], left)
    logdet_right = gaussian_logdet(entries[n_left:, n_left:], right)
    logdet_joint = gaussian_logdet(entries, left + right)
    return max(0.5 * (logdet_left + logdet_right - logdet_joint), 0.0)


def gaussian_cond_entropy(
    joint: CovMatrix, targets: Sequence[int], given: Sequence[int]
) -> float:
    """Differential entropy h(targets | given) in nats."""
    targets = list(targets)
    conditioned = conditional_covariance(joint, targets, given)
    return 0.5 * (len(targets) * LOG_2PI_E + gaussian_logdet(conditioned, targets))
