"""
Sweep rows, CSV emission and the plot script for the command-line front end.

Rows are computed in parallel but always emitted in ascending K. Absent values
(rates at sigma_q2 = 0, infeasible outer bounds) are written as NA.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import IO, Iterable, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from state_estimation.conf import get_sweep_workers
from state_estimation.exceptions import (
    InfeasibleCalibrationError,
    InvalidParameterError,
    OuterBoundDomainError,
)

from .network_model import ModelParams, d_max, d_min, make_params, moments
from .outer_bounds import calibrate, rate_outer_bound, leakage_outer_bound
from .protocols import (
    Units,
    achievable_distortion,
    ceo_sum_rate,
    distributed_sum_rate,
    leakage_exact,
    leakage_formula,
    per_user_rate_limit,
    resolve_units,
)

logger = logging.getLogger(__name__)

NA = "NA"
SIGNIFICANT_DIGITS = 15

FIGURE1_H = 0.5
FIGURE1_SIGMA_Q2 = 6.0


class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    k_values: list[int] = Field(min_length=1)
    h: float = Field(gt=0, allow_inf_nan=False)
    sigma_x2: float = Field(gt=0, allow_inf_nan=False)
    sigma_q2: float = Field(ge=0)
    units: Units = Units.BITS
    include_outer: bool = True
    include_exact_leakage: bool = True

    @field_validator("k_values")
    @classmethod
    def check_k_values(cls, values: list[int]) -> list[int]:
        if any(k < 2 for k in values):
            raise ValueError("every K must be at least 2")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("K values must be strictly increasing")
        return values


def make_sweep_spec(**kwargs) -> SweepSpec:
    """Build SweepSpec, naming the first invalid field."""
    try:
        return SweepSpec(**kwargs)
    except ValidationError as e:
        first = e.errors()[0]
        raise InvalidParameterError(str(first["loc"][0]), first["msg"]) from e


@dataclass
class CsvRow:
    """One output row; field order is the CSV column order."""
    k: int
    h: float
    sigma_x2: float
    sigma_q2: float
    units: str
    alpha: float
    beta: float
    d_min: float
    d_max: float
    d_achievable: float
    r_sum_dist: Optional[float]
    r_per_user_dist: Optional[float]
    r_sum_ceo: Optional[float]
    r_per_user_ceo: Optional[float]
    r_per_user_limit: Optional[float]
    leakage_formula: float
    leakage_exact: Optional[float]
    r1_outer: Optional[float]
    leakage_outer: Optional[float]

    def formatted(self) -> dict[str, str]:
        return {name: format_value(value) for name, value in asdict(self).items()}


CSV_COLUMNS = tuple(f.name for f in fields(CsvRow))


def format_value(value) -> str:
    if value is None:
        return NA
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, int)):
        return str(value)
    value = float(value)
    if not math.isfinite(value):
        return NA
    return format(value, f".{SIGNIFICANT_DIGITS}g")


def _outer_columns(
    params: ModelParams, d_target: float, units: Units
) -> tuple[Optional[float], Optional[float]]:
    try:
        calib = calibrate(params, d_target)
    except InfeasibleCalibrationError as e:
        logger.warning(f"Outer bounds unavailable at K={params.k}: {e}")
        return None, None
    r1_outer = leakage_outer = None
    try:
        r1_outer = units.convert(rate_outer_bound(params, calib))
    except OuterBoundDomainError as e:
        logger.warning(f"Rate outer bound unavailable at K={params.k}: {e}")
    try:
        leakage_outer = units.convert(leakage_outer_bound(params, calib))
    except OuterBoundDomainError as e:
        logger.warning(f"Leakage outer bound unavailable at K={params.k}: {e}")
    return r1_outer, leakage_outer


def build_row(
    params: ModelParams,
    sigma_q2: float,
    units=None,
    include_outer: bool = True,
    include_exact_leakage: bool = True,
) -> CsvRow:
    """Evaluate every CSV column at one configuration."""
    units = resolve_units(units)
    m = moments(params)
    d_achievable = achievable_distortion(params, sigma_q2)
    row = CsvRow(
        k=params.k,
        h=params.h,
        sigma_x2=params.sigma_x2,
        sigma_q2=sigma_q2,
        units=units.value,
        alpha=m.alpha,
        beta=m.beta,
        d_min=d_min(params),
        d_max=d_max(params),
        d_achievable=d_achievable,
        r_sum_dist=None,
        r_per_user_dist=None,
        r_sum_ceo=None,
        r_per_user_ceo=None,
        r_per_user_limit=None,
        leakage_formula=units.convert(leakage_formula(params)),
        leakage_exact=None,
        r1_outer=None,
        leakage_outer=None,
    )
    if sigma_q2 > 0:
        dist = distributed_sum_rate(params, sigma_q2)
        ceo = ceo_sum_rate(params, sigma_q2)
        row.r_sum_dist = units.convert(dist)
        row.r_per_user_dist = units.convert(dist / params.k)
        row.r_sum_ceo = units.convert(ceo)
        row.r_per_user_ceo = units.convert(ceo / params.k)
        row.r_per_user_limit = units.convert(
            per_user_rate_limit(params.h, params.sigma_x2, sigma_q2)
        )
    if include_exact_leakage:
        row.leakage_exact = units.convert(leakage_exact(params, sigma_q2))
    if include_outer:
        row.r1_outer, row.leakage_outer = _outer_columns(params, d_achievable, units)
    return row


def sweep_rows(spec: SweepSpec, workers: Optional[int] = None) -> list[CsvRow]:
    """One row per K in spec.k_values, in ascending K."""
    workers = get_sweep_workers() if workers is None else max(1, workers)
    logger.info(
        f"Sweep over {len(spec.k_values)} values of K "
        f"(h={spec.h}, sigma_x2={spec.sigma_x2}, sigma_q2={spec.sigma_q2}) with {workers} workers"
    )

    def evaluate(k: int) -> CsvRow:
        try:
            row = build_row(
                make_params(k, spec.h, spec.sigma_x2),
                spec.sigma_q2,
                spec.units,
                include_outer=spec.include_outer,
                include_exact_leakage=spec.include_exact_leakage,
            )
        except InvalidParameterError:
            raise
        except Exception:
            logger.exception(f"Sweep row failed at K={k}")
            raise
        logger.debug(f"Sweep row K={k} done")
        return row

    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(evaluate, spec.k_values))
    logger.info(f"Sweep complete: {len(rows)} rows")
    return rows


def figure1_spec(k_max: int = 100, sigma_x2: float = 1.0, units=None) -> SweepSpec:
    """Per-user rates and leakage over K = 2..k_max at h = 0.5, sigma_q2 = 6."""
    if k_max < 2:
        raise InvalidParameterError("k_max", f"must be at least 2, got {k_max}")
    return make_sweep_spec(
        k_values=list(range(2, k_max + 1)),
        h=FIGURE1_H,
        sigma_x2=sigma_x2,
        sigma_q2=FIGURE1_SIGMA_Q2,
        units=resolve_units(units),
    )


def write_csv(rows: Iterable[CsvRow], stream: IO[str]) -> None:
    """Header plus one line per row, comma-separated with LF line endings."""
    writer = csv.DictWriter(
        stream, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n"
    )
    writer.writeheader()
    for row in rows:
        writer.writerow(row.formatted())


def format_text(row: CsvRow, extras: Optional[dict] = None) -> str:
    """Key-value lines, one per column, followed by any extra quantities."""
    items = list(asdict(row).items()) + list((extras or {}).items())
    width = max(len(name) for name, _ in items)
    lines = []
    for name, value in items:
        if isinstance(value, (list, tuple)):
            rendered = ", ".join(format_value(v) for v in value)
        elif isinstance(value, float) and math.isinf(value):
            rendered = "inf"
        else:
            rendered = format_value(value)
        lines.append(f"{name.ljust(width)} = {rendered}")
    return "\n".join(lines) + "\n"


PLOT_SCRIPT_TEMPLATE = '''"""Plot per-user rates and leakage against K from {csv_path}."""
import csv

import matplotlib.pyplot as plt


def read_column(rows, name):
    return [float(row[name]) if row[name] != "NA" else float("nan") for row in rows]


with open({csv_path!r}, newline="", encoding="utf-8") as f:
    rows = list(csv.DictReader(f))

k = read_column(rows, "k")
units = rows[0]["units"] if rows else "bits"

fig, (rates, leakage) = plt.subplots(1, 2, figsize=(11, 4))
rates.plot(k, read_column(rows, "r_per_user_ceo"), label="centralized")
rates.plot(k, read_column(rows, "r_per_user_dist"), label="distributed")
rates.plot(k, read_column(rows, "r_per_user_limit"), "k--", label="large-K limit")
rates.set_xlabel("K")
rates.set_ylabel(f"per-user rate ({{units}})")
rates.legend()

leakage.plot(k, read_column(rows, "leakage_formula"), label="formula")
leakage.plot(k, read_column(rows, "leakage_exact"), label="exact")
leakage.set_xlabel("K")
leakage.set_ylabel(f"leakage ({{units}})")
leakage.legend()

fig.tight_layout()
plt.show()
'''


def render_plot_script(csv_path: str) -> str:
    return PLOT_SCRIPT_TEMPLATE.format(csv_path=csv_path)
