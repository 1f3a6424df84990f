"""
Error hierarchy for the rate-distortion-leakage services.

Each error carries the data a caller needs to react (offending indices, feasible
range, failing term) so the command layer can map it to an exit code and message.
"""

from typing import Optional, Sequence


class RateLeakageError(Exception):
    """Base class for all domain errors."""


class InvalidParameterError(RateLeakageError, ValueError):
    """A model or run parameter is outside its domain."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SingularCovarianceError(RateLeakageError, ArithmeticError):
    """A conditioning block is singular (deterministic dependence)."""

    def __init__(self, indices: Sequence[int], message: str = ""):
        self.indices = list(indices)
        detail = message or "covariance block is singular"
        super().__init__(f"{detail} (indices {self.indices})")


class InfeasibleDistortionError(RateLeakageError, ValueError):
    """A distortion target lies outside [d_min, d_max]."""

    def __init__(self, d_target: float, d_min: float, d_max: float):
        self.d_target = d_target
        self.d_min = d_min
        self.d_max = d_max
        super().__init__(
            f"distortion {d_target:.12g} is outside the achievable range "
            f"[{d_min:.12g}, {d_max:.12g}]"
        )


class InfeasibleCalibrationError(RateLeakageError, ValueError):
    """The outer-bound estimator family cannot reach the target distortion."""

    def __init__(self, d_target: float, minimal_reachable: float):
        self.d_target = d_target
        self.minimal_reachable = minimal_reachable
        super().__init__(
            f"distortion {d_target:.12g} is below the smallest value "
            f"{minimal_reachable:.12g} reachable by the estimator family"
        )


class OuterBoundDomainError(RateLeakageError, ArithmeticError):
    """A log argument inside an outer-bound expression is nonpositive."""

    def __init__(self, term: str, value: Optional[float] = None):
        self.term = term
        self.value = value
        suffix = f" (value {value:.6g})" if value is not None else ""
        super().__init__(f"nonpositive argument in {term}{suffix}")
