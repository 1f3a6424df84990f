"""
Management command to evaluate one operating point.
"""

import io
import math

from state_estimation.conf import get_explicit_max_k
from state_estimation.exceptions import (
    InfeasibleCalibrationError,
    OuterBoundDomainError,
    SingularCovarianceError,
)
from state_estimation.services.network_model import make_params, validate_sigma_q2
from state_estimation.services.outer_bounds import (
    calibrate,
    leakage_outer_bound_exact,
    per_user_outer_rate,
    rate_outer_bound_exact,
)
from state_estimation.services.protocols import (
    ceo_rates,
    distributed_rates,
    resolve_units,
    sigma_q2_for_distortion,
)
from state_estimation.services.reporting import build_row, format_text, write_csv

from ._base import RateLeakageCommand


class Command(RateLeakageCommand):
    help = "Evaluate distortion, rates, leakage and outer bounds at one configuration"

    def add_command_arguments(self, parser):
        parser.add_argument("--k", type=int, required=True, help="Number of agents (>= 2)")
        parser.add_argument("--h", type=float, required=True, help="Interference coefficient (> 0)")
        parser.add_argument("--sigma-x2", type=float, required=True, help="State variance (> 0)")
        target = parser.add_mutually_exclusive_group(required=True)
        target.add_argument(
            "--sigma-q2",
            type=float,
            help="Test-channel noise variance (>= 0; rates are NA at 0)",
        )
        target.add_argument(
            "--distortion",
            type=float,
            help="Target distortion in [d_min, d_max]; sigma_q2 is solved for it",
        )
        parser.add_argument(
            "--no-outer",
            action="store_true",
            help="Skip the outer-bound columns",
        )

    def run(self, **options):
        params = make_params(options["k"], options["h"], options["sigma_x2"])
        if options["distortion"] is not None:
            sigma_q2 = sigma_q2_for_distortion(params, options["distortion"])
        else:
            sigma_q2 = validate_sigma_q2(options["sigma_q2"])
        units = resolve_units(options["units"])
        row = build_row(params, sigma_q2, units, include_outer=not options["no_outer"])

        if options["format"] == "text":
            text = format_text(row, self._extras(params, sigma_q2, row, units, options["no_outer"]))
        else:
            buffer = io.StringIO()
            write_csv([row], buffer)
            text = buffer.getvalue()
        self.emit(text, options["output"])

    def _extras(self, params, sigma_q2, row, units, skip_outer) -> dict:
        extras: dict = {}
        max_k = get_explicit_max_k()
        explicit = params.k <= max_k
        if 0 < sigma_q2 < math.inf and explicit:
            extras["rates_dist"] = [units.convert(r) for r in distributed_rates(params, sigma_q2)]
            extras["rates_ceo"] = [units.convert(r) for r in ceo_rates(params, sigma_q2)]
        if skip_outer:
            return extras
        try:
            calib = calibrate(params, row.d_achievable)
        except InfeasibleCalibrationError as e:
            extras["outer_bound"] = f"infeasible ({e})"
            return extras
        extras.update(
            b=calib.b,
            sigma_z2=calib.sigma_z2,
            g=calib.g,
            g1=calib.g1,
            q1=calib.q1,
            q2=calib.q2,
        )
        if not explicit:
            skipped = f"unavailable (K above RATE_LEAKAGE_EXPLICIT_MAX_K={max_k})"
            extras["leakage_outer_exact"] = skipped
            extras["r1_outer_exact"] = skipped
        else:
            extras["leakage_outer_exact"] = units.convert(leakage_outer_bound_exact(params, calib))
            try:
                extras["r1_outer_exact"] = units.convert(rate_outer_bound_exact(params, calib))
            except (OuterBoundDomainError, SingularCovarianceError) as e:
                extras["r1_outer_exact"] = f"unavailable ({e})"
        try:
            extras["r_per_user_outer"] = units.convert(per_user_outer_rate(params, calib))
        except OuterBoundDomainError as e:
            extras["r_per_user_outer"] = f"unavailable ({e})"
        return extras
