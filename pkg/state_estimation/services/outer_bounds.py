"""
Converse layer: lower bounds on agent 1's rate and on the leakage of X_1.

The bounds are evaluated for the estimator family

    Xhat_2 = Y_2 + b * sum_{l != 2} Y_l + Z,    Z ~ N(0, sigma_z2),

whose parameters are pinned by orthogonality against a representative Y_l
(l != 2) and by meeting the target distortion with equality.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from state_estimation.exceptions import (
    InfeasibleCalibrationError,
    InfeasibleDistortionError,
    InvalidParameterError,
    OuterBoundDomainError,
)

from .gaussian_linalg import CovMatrix, IndexPartition, conditional_covariance, f1, gaussian_mi
from .network_model import ModelParams, agent_covariance, d_max, d_min, measurement_rows, moments

logger = logging.getLogger(__name__)

ROOT_XTOL = 1e-12


@dataclass(frozen=True)
class EstimatorCalibration:
    """
    Outer-bound estimator parameters and their derived quantities.

    ob_c1 and ob_c2 are the converse-section intermediates, distinct from the
    d_min intermediates of the same name.
    """
    b: float
    sigma_z2: float
    g: float
    g1: float
    q1: float
    q2: float
    ob_c1: float
    ob_c2: float


@dataclass
class ScanPoint:
    """Bounds for one value of b; None where the family or a log argument fails."""
    b: float
    sigma_z2: Optional[float]
    rate_bound: Optional[float] = None
    leakage_bound: Optional[float] = None
    leakage_bound_exact: Optional[float] = None


def orthogonal_b(params: ModelParams) -> float:
    """Solves E[(X_2 - Xhat_2) Y_1] = 0 for b."""
    m = moments(params)
    return (params.sqrt_h * params.sigma_x2 - m.beta) / (m.alpha + (params.k - 2) * m.beta)


def error_floor(params: ModelParams, b: float) -> float:
    """E[(X_2 - Y_2 - b S)^2] with S = sum_{l != 2} Y_l, i.e. the distortion at sigma_z2 = 0."""
    m = moments(params)
    k = params.k
    s2 = params.sigma_x2
    cross = s2 * params.sqrt_h * (1 + (k - 2) * params.sqrt_h)
    return (
        (m.alpha - s2)
        + 2 * b * (k - 1) * cross
        + b * b * (k - 1) * (m.alpha + (k - 2) * m.beta)
    )


def calibration_for(params: ModelParams, b: float, sigma_z2: float) -> EstimatorCalibration:
    """Populate the derived fields for given (b, sigma_z2)."""
    if sigma_z2 < 0:
        raise InvalidParameterError("sigma_z2", f"must be >= 0, got {sigma_z2}")
    m = moments(params)
    k = params.k
    denominator = b * b * m.alpha + sigma_z2
    if denominator > 0:
        g = b * b / denominator
    else:
        g = 0.0
    g1 = b * b * (k - 1) * (m.alpha + (k - 2) * m.beta) + sigma_z2
    q1 = m.alpha - g1 * b * b * m.beta ** 2 * (k - 1) ** 2
    q2 = g1 * b * b * (1 + (k - 2) * params.sqrt_h) * m.beta * (k - 1)
    ob_c1 = m.beta ** 2 * g
    residual = m.alpha - m.alpha ** 2 * g
    if residual > 0:
        ob_c2 = ob_c1 + (m.beta - m.beta * m.alpha * g) ** 2 / residual
    else:
        ob_c2 = math.inf
    return EstimatorCalibration(
        b=b, sigma_z2=sigma_z2, g=g, g1=g1, q1=q1, q2=q2, ob_c1=ob_c1, ob_c2=ob_c2
    )


def _check_target(params: ModelParams, d_target: float) -> None:
    low, high = d_min(params), d_max(params)
    tolerance = 1e-12 * max(abs(high), 1.0)
    if not (low - tolerance <= d_target <= high + tolerance):
        raise InfeasibleDistortionError(d_target, low, high)


def calibrate(params: ModelParams, d_target: float) -> EstimatorCalibration:
    """
    Fix (b, sigma_z2) by orthogonality and the distortion equality.

    Both conditions are linear in their unknown, so they are solved directly;
    calibrate_by_root_finding reaches the same values iteratively.

    Raises:
        InfeasibleDistortionError: if d_target is outside [d_min, d_max]
        InfeasibleCalibrationError: if the family cannot get down to d_target
    """
    _check_target(params, d_target)
    b = orthogonal_b(params)
    floor = error_floor(params, b)
    sigma_z2 = d_target - floor
    if sigma_z2 < 0:
        if sigma_z2 > -1e-12 * max(abs(d_target), 1.0):
            sigma_z2 = 0.0
        else:
            raise InfeasibleCalibrationError(d_target, floor)
    logger.debug(f"Calibrated K={params.k} d={d_target}: b={b:.6g}, sigma_z2={sigma_z2:.6g}")
    return calibration_for(params, b, sigma_z2)


def calibrate_at_fraction(params: ModelParams, fraction: float) -> EstimatorCalibration:
    """Calibrate at d_min + fraction * (d_max - d_min)."""
    if not 0.0 <= fraction <= 1.0:
        raise InvalidParameterError("fraction", f"must lie in [0, 1], got {fraction}")
    low = d_min(params)
    return calibrate(params, low + fraction * (d_max(params) - low))


def outer_bound_covariance(params: ModelParams, calib: EstimatorCalibration) -> CovMatrix:
    """Covariance of (X_1, X_2, Y_1..Y_K, Xhat_2)."""
    k = params.k
    width = 3 * k + 1
    state_2 = np.zeros(width)
    state_2[1] = 1.0
    y_rows = measurement_rows(params, width)
    weights = np.full(k, calib.b)
    weights[1] = 1.0
    estimate = weights @ y_rows
    estimate[-1] = 1.0
    joint = agent_covariance(
        params, 0.0, extra_rows=np.vstack([state_2, estimate]), extra_variances=[calib.sigma_z2]
    )
    order = [0, 2 * k + 1] + list(range(1, k + 1)) + [2 * k + 2]
    return joint.select(order)


def estimator_residuals(params: ModelParams, calib: EstimatorCalibration) -> tuple[float, float]:
    """
    (E[(X_2 - Xhat_2) Y_1], E[(X_2 - Xhat_2)^2]) on the explicit covariance.

    Layout indices: X_2 = 1, Y_1 = 2, Xhat_2 = K + 2.
    """
    cov = outer_bound_covariance(params, calib).entries
    xhat = params.k + 2
    orthogonality = cov[1, 2] - cov[xhat, 2]
    distortion = cov[1, 1] - 2 * cov[1, xhat] + cov[xhat, xhat]
    return float(orthogonality), float(distortion)


def calibrate_by_root_finding(
    params: ModelParams, d_target: float, xtol: float = ROOT_XTOL
) -> EstimatorCalibration:
    """
    Same calibration by bracketing root finding on the explicit-covariance residuals.

    Raises:
        InfeasibleCalibrationError: if no sigma_z2 >= 0 meets d_target at the orthogonal b
    """
    _check_target(params, d_target)

    def orthogonality(b: float) -> float:
        return estimator_residuals(params, calibration_for(params, b, 1.0))[0]

    low, high = -1.0, 1.0
    for _ in range(60):
        if orthogonality(low) * orthogonality(high) <= 0:
            break
        low, high = 2 * low, 2 * high
    else:
        raise InvalidParameterError("b", "could not bracket the orthogonality root")
    b = optimize.brentq(orthogonality, low, high, xtol=xtol, rtol=4 * np.finfo(float).eps)

    def excess(sigma_z2: float) -> float:
        return estimator_residuals(params, calibration_for(params, b, sigma_z2))[1] - d_target

    if excess(0.0) > 0:
        raise InfeasibleCalibrationError(d_target, d_target + excess(0.0))
    upper = max(d_target, 1.0)
    while excess(upper) < 0:
        upper *= 2
    sigma_z2 = optimize.brentq(excess, 0.0, upper, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return calibration_for(params, b, sigma_z2)


def rate_outer_bound(params: ModelParams, calib: EstimatorCalibration) -> float:
    """
    Lower bound on agent 1's rate (nats).

    First term: 1/2 log var(Y_1 | Y_2..Y_K). Second term: 1/2 log of
    E[var(Y_1 | Xhat_2, Y_2..Y_K)] through ob_c1, ob_c2 and g.

    Raises:
        OuterBoundDomainError: if a log argument is nonpositive
    """
    m = moments(params)
    k = params.k
    ratio = m.beta * m.beta / m.alpha
    first_arg = f1(m.alpha, m.beta, k, ratio) * (m.alpha - m.beta) / f1(m.alpha, m.beta, k - 1, ratio)
    residual = m.alpha - m.alpha ** 2 * calib.g
    if residual <= 0:
        raise OuterBoundDomainError("alpha - alpha^2 g", residual)
    base = f1(m.alpha, m.beta, k, calib.ob_c1)
    if base <= 0:
        raise OuterBoundDomainError("f1(K, ob_c1)", base)
    second_arg = f1(m.alpha, m.beta, k, calib.ob_c2) / base * residual
    if first_arg <= 0:
        raise OuterBoundDomainError("conditional variance of Y_1", first_arg)
    if second_arg <= 0:
        raise OuterBoundDomainError("estimator-conditioned variance", second_arg)
    return 0.5 * math.log(first_arg) - 0.5 * math.log(second_arg)


def rate_outer_bound_exact(params: ModelParams, calib: EstimatorCalibration) -> float:
    """h(Y_1 | Y_2..Y_K) - 1/2 log(2 pi e Sigma) with Sigma = E[var(Y_1 | Xhat_2, Y_2..Y_K)]."""
    cov = outer_bound_covariance(params, calib)
    k = params.k
    others = list(range(3, k + 2))
    unconditioned = conditional_covariance(cov, [2], others).entries[0, 0]
    conditioned = conditional_covariance(cov, [2], others + [k + 2]).entries[0, 0]
    if conditioned <= 0:
        raise OuterBoundDomainError("estimator-conditioned variance", float(conditioned))
    return 0.5 * math.log(unconditioned / conditioned)


def leakage_outer_bound(params: ModelParams, calib: EstimatorCalibration) -> float:
    """
    Simplified lower bound on the leakage of X_1 to agent 2 (nats).

    Raises:
        OuterBoundDomainError: if q1 or the denominator is nonpositive
    """
    s2 = params.sigma_x2
    q1, q2 = calib.q1, calib.q2
    if q1 <= 0:
        raise OuterBoundDomainError("q1", q1)
    denominator = (1 - s2 * q2 * q2) * q1 - s2 * (params.sqrt_h - q2) ** 2
    if denominator <= 0:
        raise OuterBoundDomainError("leakage denominator", denominator)
    return 0.5 * math.log(q1 / denominator)


def leakage_outer_bound_exact(params: ModelParams, calib: EstimatorCalibration) -> float:
    """I(X_1; Y_2, Xhat_2) on the explicit covariance (nats)."""
    cov = outer_bound_covariance(params, calib)
    return gaussian_mi(cov, IndexPartition((0,), (3, params.k + 2)))


def per_user_outer_rate(params: ModelParams, calib: EstimatorCalibration) -> float:
    return rate_outer_bound(params, calib) / params.k


def scan_b(
    params: ModelParams, d_target: float, b_values: Sequence[float]
) -> list[ScanPoint]:
    """
    Evaluate the bounds over a grid of b with sigma_z2 re-solved for the distortion.

    Values of b whose error floor exceeds d_target are reported with sigma_z2 None.
    """
    _check_target(params, d_target)
    points = []
    for b in b_values:
        sigma_z2 = d_target - error_floor(params, float(b))
        if sigma_z2 < 0:
            points.append(ScanPoint(b=float(b), sigma_z2=None))
            continue
        calib = calibration_for(params, float(b), sigma_z2)
        point = ScanPoint(b=float(b), sigma_z2=sigma_z2)
        try:
            point.rate_bound = rate_outer_bound(params, calib)
        except OuterBoundDomainError:
            pass
        try:
            point.leakage_bound = leakage_outer_bound(params, calib)
        except OuterBoundDomainError:
            pass
        point.leakage_bound_exact = leakage_outer_bound_exact(params, calib)
        points.append(point)
    return points
