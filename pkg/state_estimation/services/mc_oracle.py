"""
Monte-Carlo oracle for distortion, leakage and rates.

Samples states, measurement noise and test-channel noise, then compares
empirical quantities with the closed forms. Trials draw from independent
child seeds and are combined in trial order, so results do not depend on
how the worker threads are scheduled.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator

from state_estimation.conf import get_default_seed, get_mc_batches, get_sweep_workers
from state_estimation.exceptions import InvalidParameterError

from .gaussian_linalg import CovMatrix, IndexPartition, cholesky_factor, gaussian_mi
from .network_model import (
    X1_INDEX,
    ModelParams,
    joint_covariance,
    mixing_matrix,
    u_index,
    validate_sigma_q2,
    y_index,
)
from .protocols import distributed_rates_from_covariance, leakage_partition

logger = logging.getLogger(__name__)

MIN_SAMPLES_PER_DIMENSION = 10
MIN_SAMPLES_PER_BATCH = 2


class McConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=100, description="Samples per trial")
    seed: int = Field(ge=0, lt=2**64)
    trials: int = Field(default=1, ge=1)
    batches: int = Field(default=20, ge=2, description="Batches per trial for standard errors")

    @field_validator("batches")
    @classmethod
    def batches_fit_samples(cls, batches: int, info: ValidationInfo) -> int:
        n = info.data.get("n")
        if n is not None and n < MIN_SAMPLES_PER_BATCH * batches:
            raise ValueError(
                f"{batches} batches need at least {MIN_SAMPLES_PER_BATCH * batches} samples, got n={n}"
            )
        return batches


def make_mc_config(
    n: int, seed: Optional[int] = None, trials: int = 1, batches: Optional[int] = None
) -> McConfig:
    """Build McConfig from explicit values and settings, naming the first invalid field."""
    try:
        return McConfig(
            n=n,
            seed=get_default_seed() if seed is None else seed,
            trials=trials,
            batches=get_mc_batches() if batches is None else batches,
        )
    except ValidationError as e:
        first = e.errors()[0]
        raise InvalidParameterError(str(first["loc"][0]), first["msg"]) from e


@dataclass
class McEstimate:
    """Empirical estimates; information in nats."""
    d_hat: float
    d_stderr: float
    leakage_hat: float
    leakage_stderr: float
    rates_hat: list[float] = field(default_factory=list)
    # True when batches were too small for plug-in leakage; leakage_stderr is then inf
    under_sampled: bool = False


@dataclass
class TrialResult:
    d_mean: float
    d_batch_means: np.ndarray
    leakage: float
    leakage_batches: Optional[np.ndarray]
    rates: list[float]


def sample_agents(
    params: ModelParams, sigma_q2: float, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw (X, Y, U), each n x K."""
    k = params.k
    states = rng.standard_normal((n, k)) * math.sqrt(params.sigma_x2)
    noise = rng.standard_normal((n, k))
    quantization = rng.standard_normal((n, k)) * math.sqrt(sigma_q2)
    measurements = states @ mixing_matrix(params).T + noise
    return states, measurements, measurements + quantization


def mmse_weights(params: ModelParams, sigma_q2: float) -> np.ndarray:
    """Weights of the linear MMSE estimate of X_1 from (Y_1, U_2..U_K), from the model covariance."""
    joint = joint_covariance(params, sigma_q2)
    given = [y_index(params, 1)] + [u_index(params, l) for l in range(2, params.k + 1)]
    factor = cholesky_factor(joint.block(given), given)
    rhs = joint.block(given, [X1_INDEX])[:, 0]
    return linalg.cho_solve((factor, True), rhs)


def estimate_mi_from_samples(samples: np.ndarray, part: IndexPartition) -> float:
    """
    Plug-in Gaussian mutual information from the sample covariance (nats).

    Raises:
        InvalidParameterError: if there are fewer than 10 samples per dimension
        SingularCovarianceError: if the sample covariance is rank deficient
    """
    samples = np.asarray(samples, dtype=float)
    n, dim = samples.shape
    if n < MIN_SAMPLES_PER_DIMENSION * dim:
        raise InvalidParameterError(
            "samples", f"{n} samples for dimension {dim}; need at least {MIN_SAMPLES_PER_DIMENSION * dim}"
        )
    return gaussian_mi(CovMatrix(np.cov(samples, rowvar=False)), part)


def _stacked(states: np.ndarray, measurements: np.ndarray, broadcasts: np.ndarray) -> np.ndarray:
    """Columns in the joint_covariance layout (X_1, Y_1..Y_K, U_1..U_K)."""
    return np.column_stack([states[:, 0], measurements, broadcasts])


def simulate_trial(
    params: ModelParams,
    sigma_q2: float,
    n: int,
    rng: np.random.Generator,
    batches: int = 20,
    weights: Optional[np.ndarray] = None,
) -> TrialResult:
    """One trial: squared errors of the MMSE estimate, plug-in leakage and rates."""
    k = params.k
    weights = mmse_weights(params, sigma_q2) if weights is None else weights
    states, measurements, broadcasts = sample_agents(params, sigma_q2, n, rng)
    observed = np.column_stack([measurements[:, 0], broadcasts[:, 1:]])
    squared_errors = (states[:, 0] - observed @ weights) ** 2
    d_batch_means = np.array([chunk.mean() for chunk in np.array_split(squared_errors, batches)])

    stacked = _stacked(states, measurements, broadcasts)
    part = leakage_partition(k)
    leakage_columns = [X1_INDEX, *part.right]
    leakage_part = IndexPartition((0,), tuple(range(1, len(leakage_columns))))
    leakage_samples = stacked[:, leakage_columns]
    leakage = estimate_mi_from_samples(leakage_samples, leakage_part)

    batch_size = n // batches
    leakage_batches = None
    if batch_size >= MIN_SAMPLES_PER_DIMENSION * len(leakage_columns):
        leakage_batches = np.array(
            [
                estimate_mi_from_samples(chunk, leakage_part)
                for chunk in np.array_split(leakage_samples, batches)
            ]
        )

    rates: list[float] = []
    if sigma_q2 > 0 and n >= MIN_SAMPLES_PER_DIMENSION * stacked.shape[1]:
        rates = distributed_rates_from_covariance(CovMatrix(np.cov(stacked, rowvar=False)), k)
    return TrialResult(
        d_mean=float(squared_errors.mean()),
        d_batch_means=d_batch_means,
        leakage=leakage,
        leakage_batches=leakage_batches,
        rates=rates,
    )


def _stderr(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


def simulate(params: ModelParams, sigma_q2: float, cfg: McConfig) -> McEstimate:
    """
    Estimate distortion, leakage and rates by simulation.

    Standard errors pool the batch statistics of all trials. Rates are empty at
    sigma_q2 = 0, where they diverge.
    """
    sigma_q2 = validate_sigma_q2(sigma_q2)
    if math.isinf(sigma_q2):
        raise InvalidParameterError("sigma_q2", "simulation needs a finite sigma_q2")
    logger.info(
        f"Monte-Carlo K={params.k} h={params.h} sigma_x2={params.sigma_x2} "
        f"sigma_q2={sigma_q2}: n={cfg.n}, trials={cfg.trials}, seed={cfg.seed}"
    )
    weights = mmse_weights(params, sigma_q2)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)

    def run(trial: int) -> TrialResult:
        logger.debug(f"Monte-Carlo trial {trial}")
        rng = np.random.default_rng(children[trial])
        return simulate_trial(params, sigma_q2, cfg.n, rng, cfg.batches, weights)

    with ThreadPoolExecutor(max_workers=min(get_sweep_workers(), cfg.trials)) as pool:
        results = list(pool.map(run, range(cfg.trials)))

    d_batches = np.concatenate([r.d_batch_means for r in results])
    estimate = McEstimate(
        d_hat=float(np.mean([r.d_mean for r in results])),
        d_stderr=_stderr(d_batches),
        leakage_hat=float(np.mean([r.leakage for r in results])),
        leakage_stderr=math.inf,
    )
    if all(r.leakage_batches is not None for r in results):
        estimate.leakage_stderr = _stderr(np.concatenate([r.leakage_batches for r in results]))
    else:
        estimate.under_sampled = True
        logger.warning(
            f"Monte-Carlo batches of {cfg.n // cfg.batches} samples are too small for "
            f"plug-in leakage at K={params.k}; leakage standard error is unavailable"
        )
    if results[0].rates:
        estimate.rates_hat = [float(v) for v in np.mean([r.rates for r in results], axis=0)]
    return estimate
