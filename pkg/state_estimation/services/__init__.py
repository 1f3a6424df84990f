"""
Services for the state_estimation app.
"""

from .gaussian_linalg import (
    CovMatrix,
    IndexPartition,
    conditional_covariance,
    f1,
    gaussian_cond_entropy,
    gaussian_logdet,
    gaussian_mi,
    toeplitz_det,
    toeplitz_logdet,
)
from .mc_oracle import McConfig, McEstimate, estimate_mi_from_samples, make_mc_config, simulate
from .network_model import (
    DminTerms,
    ModelParams,
    Moments,
    agent_covariance,
    d_max,
    d_min,
    d_min_asymptote,
    d_min_limit,
    d_min_terms,
    joint_covariance,
    make_params,
    mixing_matrix,
    moments,
)
from .outer_bounds import (
    EstimatorCalibration,
    calibrate,
    calibrate_at_fraction,
    leakage_outer_bound,
    leakage_outer_bound_exact,
    per_user_outer_rate,
    rate_outer_bound,
    rate_outer_bound_exact,
    scan_b,
)
from .protocols import (
    EncodingKind,
    ProtocolKind,
    RdlPoint,
    Units,
    achievable_distortion,
    ceo_rates,
    ceo_sum_rate,
    compare_protocols,
    distributed_rates,
    distributed_sum_rate,
    encoding_equivalence_check,
    leakage_exact,
    leakage_formula,
    operating_point,
    per_user_rate_limit,
    sigma_q2_for_distortion,
)
from .reporting import CSV_COLUMNS, CsvRow, SweepSpec, build_row, sweep_rows, write_csv
from .validation import run_validation

__all__ = [
    "CovMatrix",
    "IndexPartition",
    "conditional_covariance",
    "toeplitz_det",
    "toeplitz_logdet",
    "f1",
    "gaussian_logdet",
    "gaussian_mi",
    "gaussian_cond_entropy",
    "ModelParams",
    "Moments",
    "DminTerms",
    "make_params",
    "moments",
    "mixing_matrix",
    "agent_covariance",
    "joint_covariance",
    "d_max",
    "d_min",
    "d_min_terms",
    "d_min_limit",
    "d_min_asymptote",
    "ProtocolKind",
    "EncodingKind",
    "Units",
    "RdlPoint",
    "achievable_distortion",
    "sigma_q2_for_distortion",
    "distributed_rates",
    "distributed_sum_rate",
    "ceo_rates",
    "ceo_sum_rate",
    "per_user_rate_limit",
    "leakage_formula",
    "leakage_exact",
    "compare_protocols",
    "encoding_equivalence_check",
    "operating_point",
    "EstimatorCalibration",
    "calibrate",
    "calibrate_at_fraction",
    "rate_outer_bound",
    "rate_outer_bound_exact",
    "leakage_outer_bound",
    "leakage_outer_bound_exact",
    "per_user_outer_rate",
    "scan_b",
    "McConfig",
    "McEstimate",
    "make_mc_config",
    "simulate",
    "estimate_mi_from_samples",
    "SweepSpec",
    "CsvRow",
    "CSV_COLUMNS",
    "build_row",
    "sweep_rows",
    "write_csv",
    "run_validation",
]
