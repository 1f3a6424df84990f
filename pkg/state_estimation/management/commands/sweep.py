"""
Management command to sweep the number of agents and emit one row per K.
"""

import io

from state_estimation.exceptions import InvalidParameterError
from state_estimation.services.protocols import resolve_units
from state_estimation.services.reporting import format_text, make_sweep_spec, sweep_rows, write_csv

from ._base import RateLeakageCommand


def parse_k_list(raw: str) -> list[int]:
    return [int(part) for part in raw.split(",") if part.strip()]


class Command(RateLeakageCommand):
    help = "Sweep K at fixed (h, sigma_x2, sigma_q2) and emit one CSV row per K"

    def add_command_arguments(self, parser):
        parser.add_argument("--k-min", type=int, default=None, help="Smallest K")
        parser.add_argument("--k-max", type=int, default=None, help="Largest K (inclusive)")
        parser.add_argument("--k-step", type=int, default=1, help="Step between K values (default: 1)")
        parser.add_argument(
            "--k-list",
            type=parse_k_list,
            default=None,
            help="Comma-separated K values, instead of --k-min/--k-max/--k-step",
        )
        parser.add_argument("--h", type=float, required=True, help="Interference coefficient (> 0)")
        parser.add_argument("--sigma-x2", type=float, required=True, help="State variance (> 0)")
        parser.add_argument("--sigma-q2", type=float, required=True, help="Test-channel noise variance (>= 0)")
        parser.add_argument("--no-outer", action="store_true", help="Skip the outer-bound columns")
        parser.add_argument(
            "--no-exact-leakage",
            action="store_true",
            help="Skip the leakage_exact column",
        )
        parser.add_argument(
            "--workers",
            type=int,
            default=None,
            help="Worker threads (default: RATE_LEAKAGE_SWEEP_WORKERS, 4)",
        )

    def k_values(self, options) -> list[int]:
        if options["k_list"] is not None:
            if options["k_min"] is not None or options["k_max"] is not None:
                self._conflict()
            return options["k_list"]
        if options["k_min"] is None or options["k_max"] is None:
            self._conflict()
        if options["k_step"] < 1:
            raise InvalidParameterError("k_step", f"must be at least 1, got {options['k_step']}")
        return list(range(options["k_min"], options["k_max"] + 1, options["k_step"]))

    def _conflict(self):
        raise InvalidParameterError("k_values", "give either --k-list or both --k-min and --k-max")

    def run(self, **options):
        spec = make_sweep_spec(
            k_values=self.k_values(options),
            h=options["h"],
            sigma_x2=options["sigma_x2"],
            sigma_q2=options["sigma_q2"],
            units=resolve_units(options["units"]),
            include_outer=not options["no_outer"],
            include_exact_leakage=not options["no_exact_leakage"],
        )
        rows = sweep_rows(spec, options["workers"])
        self.emit(render_rows(rows, options["format"]), options["output"])


def render_rows(rows, output_format: str) -> str:
    if output_format == "text":
        return "\n".join(format_text(row) for row in rows)
    buffer = io.StringIO()
    write_csv(rows, buffer)
    return buffer.getvalue()
