"""
The symmetric K-agent Gaussian measurement model.

Agent k observes Y_k = X_k + sqrt(h) * sum_{l != k} X_l + Z_k with independent
states X_l ~ N(0, sigma_x2) and unit-variance noise Z_k. Agent k broadcasts
through the test channel U_k = Y_k + Q_k with Q_k ~ N(0, sigma_q2).

Joint covariances are laid out as (X_1, Y_1..Y_K, U_1..U_K); use y_index and
u_index rather than hard-coded offsets.
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from state_estimation.exceptions import InvalidParameterError

from .gaussian_linalg import CovMatrix, f1

logger = logging.getLogger(__name__)

NOISE_VARIANCE = 1.0
X1_INDEX = 0


class ModelParams(BaseModel):
    """Symmetric network configuration. Measurement noise variance is fixed at 1."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=2, description="Number of agents")
    h: float = Field(gt=0, allow_inf_nan=False, description="Interference coefficient")
    sigma_x2: float = Field(gt=0, allow_inf_nan=False, description="State variance")

    @property
    def sqrt_h(self) -> float:
        return math.sqrt(self.h)


def make_params(k: int, h: float, sigma_x2: float) -> ModelParams:
    """
    Build ModelParams, reporting the first invalid field by name.

    Raises:
        InvalidParameterError: if any field is outside its domain
    """
    try:
        return ModelParams(k=k, h=h, sigma_x2=sigma_x2)
    except ValidationError as e:
        first = e.errors()[0]
        field_name = str(first["loc"][0]) if first.get("loc") else "params"
        raise InvalidParameterError(field_name, first["msg"]) from e


def validate_sigma_q2(sigma_q2: float, *, allow_zero: bool = True) -> float:
    """Check a test-channel noise variance; +inf is accepted as the no-broadcast limit."""
    value = float(sigma_q2)
    if math.isnan(value) or value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise InvalidParameterError("sigma_q2", f"must be {bound}, got {sigma_q2}")
    return value


@dataclass(frozen=True)
class Moments:
    """Second-order statistics of the measurements."""
    alpha: float  # E[Y_l^2]
    beta: float  # E[Y_l Y_k], l != k


@dataclass(frozen=True)
class DminTerms:
    """Intermediates of the smallest achievable distortion."""
    c1: float
    c2: float
    c3: float
    c4: float


def moments(params: ModelParams) -> Moments:
    s2 = params.sigma_x2
    alpha = s2 * (1 + params.h * (params.k - 1)) + NOISE_VARIANCE
    beta = s2 * (2 * params.sqrt_h + params.h * (params.k - 2))
    return Moments(alpha=alpha, beta=beta)


def mixing_matrix(params: ModelParams) -> np.ndarray:
    """K x K map from states to noiseless measurements."""
    mix = np.full((params.k, params.k), params.sqrt_h)
    np.fill_diagonal(mix, 1.0)
    return mix


def y_index(params: ModelParams, agent: int) -> int:
    """Joint-covariance index of Y_agent (agents are numbered from 1)."""
    return agent


def u_index(params: ModelParams, agent: int) -> int:
    """Joint-covariance index of U_agent (agents are numbered from 1)."""
    return params.k + agent


def source_variances(params: ModelParams, sigma_q2: float) -> np.ndarray:
    """Variances of the independent sources (X_1..X_K, Z_1..Z_K, Q_1..Q_K)."""
    k = params.k
    return np.concatenate(
        [
            np.full(k, params.sigma_x2),
            np.full(k, NOISE_VARIANCE),
            np.full(k, float(sigma_q2)),
        ]
    )


def measurement_rows(params: ModelParams, width: Optional[int] = None) -> np.ndarray:
    """Rows expressing Y_1..Y_K in the source basis, zero-padded to `width`."""
    k = params.k
    width = 3 * k if width is None else width
    rows = np.zeros((k, width))
    rows[:, :k] = mixing_matrix(params)
    rows[:, k:2 * k] = np.eye(k)
    return rows


def observation_map(params: ModelParams, width: Optional[int] = None) -> np.ndarray:
    """Rows for (X_1, Y_1..Y_K, U_1..U_K) in the source basis."""
    k = params.k
    width = 3 * k if width is None else width
    state = np.zeros((1, width))
    state[0, 0] = 1.0
    y_rows = measurement_rows(params, width)
    u_rows = y_rows.copy()
    u_rows[:, 2 * k:3 * k] = np.eye(k)
    return np.vstack([state, y_rows, u_rows])


def agent_covariance(
    params: ModelParams,
    sigma_q2: float,
    *,
    extra_rows: Optional[np.ndarray] = None,
    extra_variances: Sequence[float] = (),
) -> CovMatrix:
    """
    Covariance of linear outputs of the independent sources.

    The first 1+2K outputs are (X_1, Y_1..Y_K, U_1..U_K). Extra independent
    sources (for example an estimator's private noise) are appended to the
    source basis after Q_K, and extra output rows, expressed in that widened
    basis, are appended after U_K.
    """
    sigma_q2 = validate_sigma_q2(sigma_q2)
    if math.isinf(sigma_q2):
        raise InvalidParameterError("sigma_q2", "explicit covariances need a finite sigma_q2")
    variances = np.concatenate([source_variances(params, sigma_q2), np.asarray(extra_variances, dtype=float)])
    rows = observation_map(params, width=variances.size)
    if extra_rows is not None:
        rows = np.vstack([rows, np.atleast_2d(np.asarray(extra_rows, dtype=float))])
    entries = rows @ (variances[:, None] * rows.T)
    return CovMatrix(entries)


def joint_covariance(params: ModelParams, sigma_q2: float) -> CovMatrix:
    """Covariance of (X_1, Y_1..Y_K, U_1..U_K)."""
    return agent_covariance(params, sigma_q2)


AgentKind = Literal["x", "y", "u"]


@dataclass(frozen=True)
class AgentGroup:
    """Sum of one kind of variable over the agents first..last (inclusive, 1-based)."""
    kind: AgentKind
    first: int
    last: int

    @property
    def size(self) -> int:
        return max(self.last - self.first + 1, 0)

    def overlap(self, other: "AgentGroup") -> int:
        return max(min(self.last, other.last) - max(self.first, other.first) + 1, 0)


def aggregate_covariance(
    params: ModelParams, sigma_q2: float, groups: Sequence[AgentGroup]
) -> CovMatrix:
    """
    Covariance of group sums, built from the moments in O(len(groups)^2).

    Exchangeable agents inside a conditioning set enter the optimal linear
    estimate with equal weights, so replacing them by their sum leaves
    conditional variances unchanged. This keeps information quantities
    computable at any K.
    """
    sigma_q2 = validate_sigma_q2(sigma_q2)
    m = moments(params)
    s2 = params.sigma_x2
    # (same agent, different agents) covariance for each pair of kinds
    pair_moments = {
        ("x", "x"): (s2, 0.0),
        ("x", "y"): (s2, params.sqrt_h * s2),
        ("x", "u"): (s2, params.sqrt_h * s2),
        ("y", "y"): (m.alpha, m.beta),
        ("y", "u"): (m.alpha, m.beta),
        ("u", "u"): (m.alpha + sigma_q2, m.beta),
    }
    for group in groups:
        if group.size == 0 or group.first < 1 or group.last > params.k:
            raise InvalidParameterError(
                "groups", f"group {group} is empty or outside agents 1..{params.k}"
            )
    n = len(groups)
    entries = np.zeros((n, n))
    for i, gi in enumerate(groups):
        for j, gj in enumerate(groups):
            key = (gi.kind, gj.kind) if (gi.kind, gj.kind) in pair_moments else (gj.kind, gi.kind)
            same, cross = pair_moments[key]
            shared = gi.overlap(gj)
            entries[i, j] = same * shared + cross * (gi.size * gj.size - shared)
    return CovMatrix(entries, check=False)


def d_max(params: ModelParams) -> float:
    """E[var(X_1 | Y_1)]."""
    s2 = params.sigma_x2
    return s2 * (1 - s2 / moments(params).alpha)


def d_min_terms(params: ModelParams) -> DminTerms:
    m = moments(params)
    s2 = params.sigma_x2
    ratio = m.beta / m.alpha
    return DminTerms(
        c1=s2 - s2 * s2 / m.alpha,
        c2=s2 * (params.sqrt_h - ratio),
        c3=m.alpha - m.beta * ratio,
        c4=m.beta - m.beta * ratio,
    )


def improvement_numerator(params: ModelParams) -> float:
    """(K-1) c2^2: the scale of the gain from other agents' measurements."""
    return (params.k - 1) * d_min_terms(params).c2 ** 2


def d_min_denominator(params: ModelParams) -> float:
    """f1(K, beta^2/alpha) = c3 + (K-2) c4."""
    m = moments(params)
    return f1(m.alpha, m.beta, params.k, m.beta * m.beta / m.alpha)


def d_min(params: ModelParams) -> float:
    """E[var(X_1 | Y_1..Y_K)]."""
    terms = d_min_terms(params)
    return terms.c1 - improvement_numerator(params) / d_min_denominator(params)


def d_min_limit(params: ModelParams) -> float:
    """Simplified large-K limit sigma_x2 (1 - (1 - sqrt h)^2 / h); treats alpha - beta as tending to h."""
    return params.sigma_x2 * (1 - (1 - params.sqrt_h) ** 2 / params.h)


def d_min_asymptote(params: ModelParams) -> float:
    """
    Exact large-K limit of d_min.

    Uses alpha - beta = sigma_x2 (1 - sqrt h)^2 + 1, which does not depend on K.
    """
    s2 = params.sigma_x2
    spread = s2 * (1 - params.sqrt_h) ** 2
    return s2 - s2 * spread / (spread + NOISE_VARIANCE)
