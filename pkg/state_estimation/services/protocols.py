"""
Achievability layer for the distributed and centralized (CEO) protocols.

Closed forms for distortion, sum rates, per-user limits and leakage live next to
their first-principles evaluations on explicit covariances. Everything is
computed in nats; `Units` converts at the presentation edge.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from state_estimation.conf import get_default_units, get_explicit_max_k
from state_estimation.exceptions import InfeasibleDistortionError, InvalidParameterError

from .gaussian_linalg import (
    LOG_2PI_E,
    CovMatrix,
    IndexPartition,
    conditional_covariance,
    f1,
    gaussian_cond_entropy,
    gaussian_mi,
    toeplitz_logdet,
)
from .network_model import (
    X1_INDEX,
    AgentGroup,
    ModelParams,
    aggregate_covariance,
    d_max,
    d_min,
    d_min_denominator,
    d_min_terms,
    improvement_numerator,
    joint_covariance,
    make_params,
    moments,
    u_index,
    validate_sigma_q2,
    y_index,
)

logger = logging.getLogger(__name__)

PROGRESSIVE_COEFFICIENTS = (0.0, 0.5, 1.0)


class ProtocolKind(str, Enum):
    DISTRIBUTED = "distributed"
    CENTRALIZED = "centralized"


class EncodingKind(str, Enum):
    LOCAL = "local"
    PROGRESSIVE = "progressive"


class Units(str, Enum):
    BITS = "bits"
    NATS = "nats"

    def convert(self, value_nats: Optional[float]) -> Optional[float]:
        if value_nats is None:
            return None
        if self is Units.BITS:
            return value_nats / math.log(2.0)
        return value_nats


def resolve_units(units) -> Units:
    """Accept a Units member, its string value, or None for the configured default."""
    raw = get_default_units() if units is None else units
    try:
        return Units(raw)
    except ValueError as e:
        raise InvalidParameterError("units", f"expected 'bits' or 'nats', got {raw!r}") from e


@dataclass
class RdlPoint:
    """One evaluated operating point; information values are in `units`."""
    params: ModelParams
    sigma_q2: float
    protocol: ProtocolKind
    encoding: EncodingKind
    units: Units
    distortion: float
    leakage_formula: float
    leakage_exact: float
    # None when sigma_q2 == 0 (rates diverge) or when K exceeds the explicit-covariance limit
    rates_per_agent: Optional[list[float]] = None
    sum_rate: Optional[float] = None
    per_user_rate: Optional[float] = None


@dataclass
class ProtocolComparison:
    """Centralized vs distributed sum rates, in nats."""
    dist_sum: float
    ceo_sum: float
    gap: float
    per_user_gap: float


@dataclass
class EncodingEquivalence:
    """Local-encoding values next to progressive-encoding values for each coefficient."""
    local_rates: list[float]
    local_distortion: float
    progressive_rates: dict[float, list[float]] = field(default_factory=dict)
    progressive_distortion: dict[float, float] = field(default_factory=dict)

    def max_relative_error(self) -> float:
        worst = 0.0
        for coefficient, rates in self.progressive_rates.items():
            for local, progressive in zip(self.local_rates, rates):
                worst = max(worst, _relative_error(progressive, local))
            worst = max(
                worst,
                _relative_error(self.progressive_distortion[coefficient], self.local_distortion),
            )
        return worst


def _relative_error(value: float, reference: float) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


def _require_positive_sigma_q2(sigma_q2: float) -> float:
    value = validate_sigma_q2(sigma_q2)
    if value == 0:
        raise InvalidParameterError(
            "sigma_q2",
            "rates diverge at sigma_q2 = 0; evaluate a small positive sigma_q2 "
            "and read the result as the sigma_q2 -> 0 limit",
        )
    return value


def _require_explicit(params: ModelParams) -> None:
    limit = get_explicit_max_k()
    if params.k > limit:
        raise InvalidParameterError(
            "k",
            f"per-agent evaluation builds a {1 + 2 * params.k}-dimensional covariance; "
            f"K is limited to {limit} (use the closed-form sum rates)",
        )


# Distortion

def achievable_distortion(params: ModelParams, sigma_q2: float) -> float:
    """E[var(X_1 | Y_1, U_2..U_K)]; equals d_min at 0 and tends to d_max as sigma_q2 grows."""
    sigma_q2 = validate_sigma_q2(sigma_q2)
    if math.isinf(sigma_q2):
        return d_max(params)
    return d_min_terms(params).c1 - improvement_numerator(params) / (
        d_min_denominator(params) + sigma_q2
    )


def sigma_q2_for_distortion(params: ModelParams, d_target: float) -> float:
    """
    Invert achievable_distortion.

    Returns:
        The test-channel variance reaching d_target; math.inf when only the
        no-broadcast limit reaches it (d_target == d_max)

    Raises:
        InfeasibleDistortionError: if d_target is outside [d_min, d_max]
    """
    low, high = d_min(params), d_max(params)
    tolerance = 1e-12 * max(abs(high), 1.0)
    if not (low - tolerance <= d_target <= high + tolerance):
        raise InfeasibleDistortionError(d_target, low, high)
    numerator = improvement_numerator(params)
    gap = d_min_terms(params).c1 - d_target
    if numerator == 0 or gap <= 0:
        return math.inf
    return max(numerator / gap - d_min_denominator(params), 0.0)


# Rates on explicit covariances

def distributed_rates_from_covariance(
    joint: CovMatrix, k: int, order: Optional[Sequence[int]] = None
) -> list[float]:
    """
    Per-agent distributed rates from any covariance laid out like joint_covariance.

    The first agent in broadcast order pays I(U;Y) - I(U;Y_next) where Y_next is
    the measurement of the second agent in order. Each later agent pays
    I(U;Y) - I(U; Y_first, U of all earlier agents).
    """
    order = _broadcast_order(k, order)
    rates = [0.0] * k
    first = order[0]
    u_first = k + first
    rates[first - 1] = gaussian_mi(
        joint, IndexPartition((u_first,), (first,))
    ) - gaussian_mi(joint, IndexPartition((u_first,), (order[1],)))
    for position in range(1, k):
        agent = order[position]
        u_agent = k + agent
        side = (first,) + tuple(k + earlier for earlier in order[:position])
        own = gaussian_mi(joint, IndexPartition((u_agent,), (agent,)))
        rates[agent - 1] = own - gaussian_mi(joint, IndexPartition((u_agent,), side))
    return [max(rate, 0.0) for rate in rates]


def _broadcast_order(k: int, order: Optional[Sequence[int]]) -> list[int]:
    if order is None:
        return list(range(1, k + 1))
    order = [int(agent) for agent in order]
    if sorted(order) != list(range(1, k + 1)):
        raise InvalidParameterError("order", f"must be a permutation of 1..{k}, got {order}")
    return order


def distributed_rates(
    params: ModelParams, sigma_q2: float, order: Optional[Sequence[int]] = None
) -> list[float]:
    """Per-agent rates (nats) of the distributed protocol, indexed by agent."""
    sigma_q2 = _require_positive_sigma_q2(sigma_q2)
    if math.isinf(sigma_q2):
        return [0.0] * params.k
    _require_explicit(params)
    return distributed_rates_from_covariance(joint_covariance(params, sigma_q2), params.k, order)


def ceo_rates(params: ModelParams, sigma_q2: float) -> list[float]:
    """Per-agent rates (nats) for a virtual central decoder without side information."""
    sigma_q2 = _require_positive_sigma_q2(sigma_q2)
    if math.isinf(sigma_q2):
        return [0.0] * params.k
    _require_explicit(params)
    joint = joint_covariance(params, sigma_q2)
    rates = []
    for agent in range(1, params.k + 1):
        u_agent = u_index(params, agent)
        own = gaussian_mi(joint, IndexPartition((u_agent,), (y_index(params, agent),)))
        if agent > 1:
            earlier = tuple(u_index(params, l) for l in range(1, agent))
            own -= gaussian_mi(joint, IndexPartition((u_agent,), earlier))
        rates.append(max(own, 0.0))
    return rates


# Closed-form sum rates

def distributed_sum_rate(params: ModelParams, sigma_q2: float) -> float:
    sigma_q2 = _require_positive_sigma_q2(sigma_q2)
    if math.isinf(sigma_q2):
        return 0.0
    m = moments(params)
    k = params.k
    spread = m.alpha + sigma_q2 - m.beta
    return (
        0.5 * k * math.log(spread / sigma_q2)
        + 0.5 * math.log((m.alpha + sigma_q2 - m.beta * m.beta / m.alpha) / spread)
        + 0.5 * math.log((d_min_denominator(params) + sigma_q2) / spread)
    )


def ceo_sum_rate(params: ModelParams, sigma_q2: float) -> float:
    sigma_q2 = _require_positive_sigma_q2(sigma_q2)
    if math.isinf(sigma_q2):
        return 0.0
    m = moments(params)
    k = params.k
    spread = m.alpha + sigma_q2 - m.beta
    return 0.5 * k * math.log(spread / sigma_q2) + 0.5 * math.log(
        (m.alpha + sigma_q2 + (k - 1) * m.beta) / spread
    )


def distributed_per_user_rate(params: ModelParams, sigma_q2: float) -> float:
    return distributed_sum_rate(params, sigma_q2) / params.k


def ceo_per_user_rate(params: ModelParams, sigma_q2: float) -> float:
    return ceo_sum_rate(params, sigma_q2) / params.k


def per_user_rate_limit(h: float, sigma_x2: float, sigma_q2: float) -> float:
    """Common large-K per-agent rate of both protocols (nats)."""
    # The limit does not depend on K; any valid K checks h and sigma_x2
    params = make_params(2, h, sigma_x2)
    sigma_q2 = _require_positive_sigma_q2(sigma_q2)
    if math.isinf(sigma_q2):
        return 0.0
    spread = params.sigma_x2 * (1 - params.sqrt_h) ** 2 + 1.0
    return 0.5 * math.log((spread + sigma_q2) / sigma_q2)


def distributed_sum_rate_entropy_chain(params: ModelParams, sigma_q2: float) -> float:
    """h(U_2..U_K | Y_1) + h(U_1 | Y_2) - (K/2) log(2 pi e sigma_q2) on the explicit covariance."""
    sigma_q2 = _require_positive_sigma_q2(sigma_q2)
    _require_explicit(params)
    joint = joint_covariance(params, sigma_q2)
    k = params.k
    others = [u_index(params, l) for l in range(2, k + 1)]
    chain = gaussian_cond_entropy(joint, others, [y_index(params, 1)]) + gaussian_cond_entropy(
        joint, [u_index(params, 1)], [y_index(params, 2)]
    )
    return chain - 0.5 * k * (LOG_2PI_E + math.log(sigma_q2))


def ceo_sum_rate_entropy_chain(params: ModelParams, sigma_q2: float) -> float:
    """
    h(U_1..U_K) - (K/2) log(2 pi e sigma_q2).

    The joint entropy is taken from the explicit covariance when K allows it,
    otherwise from the structured determinant of the U-block.
    """
    sigma_q2 = _require_positive_sigma_q2(sigma_q2)
    k = params.k
    if k <= get_explicit_max_k():
        joint = joint_covariance(params, sigma_q2)
        joint_entropy = gaussian_cond_entropy(
            joint, [u_index(params, l) for l in range(1, k + 1)], []
        )
    else:
        m = moments(params)
        joint_entropy = 0.5 * (k * LOG_2PI_E + toeplitz_logdet(m.alpha + sigma_q2, m.beta, k))
    return joint_entropy - 0.5 * k * (LOG_2PI_E + math.log(sigma_q2))


# Leakage

def leakage_formula(params: ModelParams) -> float:
    """Closed-form leakage of X_1 to agent 2; it does not depend on sigma_q2 (nats)."""
    m = moments(params)
    s2 = params.sigma_x2
    c5 = (m.beta - params.sqrt_h * s2) ** 2 / (m.alpha - s2) + params.h * s2
    numerator = m.alpha * f1(m.alpha, m.beta, params.k, m.beta * m.beta / m.alpha)
    denominator = (m.alpha - s2) * f1(m.alpha, m.beta, params.k, c5)
    return 0.5 * math.log(numerator / denominator)


def leakage_partition(k: int) -> IndexPartition:
    """I(X_1; Y_2, U_1, U_3..U_K) in the joint_covariance layout. U_2 adds nothing given Y_2."""
    held = (2, k + 1) + tuple(k + l for l in range(3, k + 1))
    return IndexPartition((X1_INDEX,), held)


def leakage_from_covariance(joint: CovMatrix, k: int) -> float:
    return gaussian_mi(joint, leakage_partition(k))


def leakage_exact(params: ModelParams, sigma_q2: float) -> float:
    """
    I(X_1; Y_2, U_1..U_K): what agent 2 learns about X_1 under the protocol (nats).

    Above the explicit-covariance limit U_3..U_K enter through their sum.
    """
    sigma_q2 = validate_sigma_q2(sigma_q2)
    k = params.k
    if math.isinf(sigma_q2):
        groups = [AgentGroup("x", 1, 1), AgentGroup("y", 2, 2)]
        return gaussian_mi(aggregate_covariance(params, 0.0, groups), IndexPartition((0,), (1,)))
    if k <= get_explicit_max_k():
        return leakage_from_covariance(joint_covariance(params, sigma_q2), k)
    groups = [
        AgentGroup("x", 1, 1),
        AgentGroup("y", 2, 2),
        AgentGroup("u", 1, 1),
        AgentGroup("u", 3, k),
    ]
    return gaussian_mi(aggregate_covariance(params, sigma_q2, groups), IndexPartition((0,), (1, 2, 3)))


# Comparisons and encoding equivalence

def compare_protocols(params: ModelParams, sigma_q2: float) -> ProtocolComparison:
    dist_sum = distributed_sum_rate(params, sigma_q2)
    ceo_sum = ceo_sum_rate(params, sigma_q2)
    gap = ceo_sum - dist_sum
    return ProtocolComparison(
        dist_sum=dist_sum, ceo_sum=ceo_sum, gap=gap, per_user_gap=gap / params.k
    )


def progressive_covariance(params: ModelParams, sigma_q2: float, coefficient: float) -> CovMatrix:
    """
    Covariance of (X_1, Y_1..Y_K, V_1..V_K) where V_k = U_k + a * sum_{l<k} V_l.

    The map from U to V is lower unitriangular, hence invertible.
    """
    k = params.k
    joint = joint_covariance(params, sigma_q2)
    mixing = np.eye(k) - coefficient * np.tril(np.ones((k, k)), -1)
    transform = np.eye(1 + 2 * k)
    transform[k + 1:, k + 1:] = np.linalg.inv(mixing)
    return CovMatrix(transform @ joint.entries @ transform.T, check=False)


def progressive_rates(params: ModelParams, sigma_q2: float, coefficient: float) -> list[float]:
    """
    Per-agent rates when agent k encodes V_k from its measurement and earlier broadcasts.

    R_1 = I(V_1;Y_1) - I(V_1;Y_2); R_k = I(V_k;Y_k | V_<k) - I(V_k;Y_1 | V_<k).
    """
    sigma_q2 = _require_positive_sigma_q2(sigma_q2)
    _require_explicit(params)
    k = params.k
    cov = progressive_covariance(params, sigma_q2, coefficient)
    rates = [
        gaussian_mi(cov, IndexPartition((k + 1,), (1,)))
        - gaussian_mi(cov, IndexPartition((k + 1,), (2,)))
    ]
    for agent in range(2, k + 1):
        earlier = tuple(k + l for l in range(1, agent))
        own = gaussian_mi(cov, IndexPartition((k + agent,), (agent,), earlier))
        side = gaussian_mi(cov, IndexPartition((k + agent,), (1,), earlier))
        rates.append(max(own - side, 0.0))
    rates[0] = max(rates[0], 0.0)
    return rates


def progressive_distortion(params: ModelParams, sigma_q2: float, coefficient: float) -> float:
    """E[var(X_1 | Y_1, V_1..V_K)]."""
    sigma_q2 = _require_positive_sigma_q2(sigma_q2)
    k = params.k
    cov = progressive_covariance(params, sigma_q2, coefficient)
    given = [1] + [k + l for l in range(1, k + 1)]
    return float(conditional_covariance(cov, [X1_INDEX], given).entries[0, 0])


def encoding_equivalence_check(
    params: ModelParams,
    sigma_q2: float,
    coefficients: Sequence[float] = PROGRESSIVE_COEFFICIENTS,
) -> EncodingEquivalence:
    sigma_q2 = _require_positive_sigma_q2(sigma_q2)
    k = params.k
    joint = joint_covariance(params, sigma_q2)
    given = [y_index(params, 1)] + [u_index(params, l) for l in range(1, k + 1)]
    result = EncodingEquivalence(
        local_rates=distributed_rates(params, sigma_q2),
        local_distortion=float(conditional_covariance(joint, [X1_INDEX], given).entries[0, 0]),
    )
    for coefficient in coefficients:
        result.progressive_rates[coefficient] = progressive_rates(params, sigma_q2, coefficient)
        result.progressive_distortion[coefficient] = progressive_distortion(
            params, sigma_q2, coefficient
        )
    logger.debug(
        f"Encoding equivalence K={k} sigma_q2={sigma_q2}: "
        f"max relative error {result.max_relative_error():.3g}"
    )
    return result


# Operating points

def operating_point(
    params: ModelParams,
    sigma_q2: float,
    protocol: ProtocolKind = ProtocolKind.DISTRIBUTED,
    encoding: EncodingKind = EncodingKind.LOCAL,
    units=None,
    coefficient: float = 1.0,
    include_rates: bool = True,
) -> RdlPoint:
    """
    Evaluate one operating point of a protocol.

    Both protocols reach the same distortion and leak the same information, so
    only the rates depend on `protocol`.

    Args:
        params: Network configuration
        sigma_q2: Test-channel noise variance (0 and +inf allowed)
        protocol: Distributed or centralized decoding
        encoding: Local, or progressive with the given coefficient (distributed only)
        units: Presentation units; defaults to the configured units
        coefficient: Progressive-encoding combination coefficient
        include_rates: Whether to evaluate per-agent rates on explicit covariances

    Returns:
        RdlPoint with information values converted to `units`
    """
    sigma_q2 = validate_sigma_q2(sigma_q2)
    units = resolve_units(units)
    protocol = ProtocolKind(protocol)
    encoding = EncodingKind(encoding)
    if encoding is EncodingKind.PROGRESSIVE and protocol is not ProtocolKind.DISTRIBUTED:
        raise InvalidParameterError(
            "encoding", "progressive encoding is evaluated for the distributed protocol only"
        )

    point = RdlPoint(
        params=params,
        sigma_q2=sigma_q2,
        protocol=protocol,
        encoding=encoding,
        units=units,
        distortion=achievable_distortion(params, sigma_q2),
        leakage_formula=units.convert(leakage_formula(params)),
        leakage_exact=units.convert(leakage_exact(params, sigma_q2)),
    )
    if sigma_q2 == 0:
        return point

    if protocol is ProtocolKind.DISTRIBUTED:
        sum_rate = distributed_sum_rate(params, sigma_q2)
    else:
        sum_rate = ceo_sum_rate(params, sigma_q2)
    point.sum_rate = units.convert(sum_rate)
    point.per_user_rate = units.convert(sum_rate / params.k)

    explicit = math.isfinite(sigma_q2) and params.k <= get_explicit_max_k()
    if include_rates and explicit:
        if protocol is ProtocolKind.CENTRALIZED:
            rates = ceo_rates(params, sigma_q2)
        elif encoding is EncodingKind.PROGRESSIVE:
            rates = progressive_rates(params, sigma_q2, coefficient)
        else:
            rates = distributed_rates(params, sigma_q2)
        point.rates_per_agent = [units.convert(rate) for rate in rates]
    elif include_rates and math.isinf(sigma_q2):
        point.rates_per_agent = [0.0] * params.k
    return point
