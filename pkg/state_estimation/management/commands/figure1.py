"""
Management command to regenerate the per-user rate and leakage curves over K.
"""

from state_estimation.services.reporting import figure1_spec, render_plot_script, sweep_rows

from ._base import RateLeakageCommand
from .sweep import render_rows


class Command(RateLeakageCommand):
    help = "Per-user rates and leakage for K = 2..k_max at h = 0.5, sigma_q2 = 6"

    def add_command_arguments(self, parser):
        parser.add_argument("--k-max", type=int, default=100, help="Largest K (default: 100)")
        parser.add_argument(
            "--sigma-x2",
            type=float,
            default=1.0,
            help="State variance (default: 1); recorded in every row",
        )
        parser.add_argument(
            "--emit-plot-script",
            default=None,
            metavar="PATH",
            help="Also write a matplotlib script that plots the CSV columns",
        )
        parser.add_argument("--workers", type=int, default=None, help="Worker threads")

    def run(self, **options):
        spec = figure1_spec(options["k_max"], options["sigma_x2"], options["units"])
        rows = sweep_rows(spec, options["workers"])
        self.emit(render_rows(rows, options["format"]), options["output"])

        script_path = options["emit_plot_script"]
        if script_path:
            csv_path = options["output"] or "figure1.csv"
            with open(script_path, "w", encoding="utf-8", newline="") as f:
                f.write(render_plot_script(csv_path))
            self.stderr.write(self.style.SUCCESS(f"Wrote plot script {script_path}"))
