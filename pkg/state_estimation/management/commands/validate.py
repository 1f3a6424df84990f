"""
Management command to run the oracle suites and report per-check errors.
"""

import csv
import io

from django.core.management.base import CommandError

from state_estimation.conf import get_mc_samples
from state_estimation.services.mc_oracle import make_mc_config
from state_estimation.services.validation import GRIDS, SUITES, ValidationReport, run_validation

from ._base import EXIT_VALIDATION_FAILURE, RateLeakageCommand


def parse_tolerance(raw: str) -> tuple[str, float]:
    name, _, value = raw.partition("=")
    if not value:
        raise ValueError(f"expected NAME=VALUE, got {raw!r}")
    return name.strip(), float(value)


class Command(RateLeakageCommand):
    help = "Cross-check every closed form against its oracle and report the worst errors"
    output_formats = ("text", "csv")

    def add_command_arguments(self, parser):
        parser.add_argument(
            "--grid",
            choices=sorted(GRIDS),
            default="small",
            help="Parameter grid (default: small)",
        )
        parser.add_argument(
            "--mc-samples",
            type=int,
            default=None,
            help="Monte-Carlo samples (default: RATE_LEAKAGE_MC_SAMPLES, 200000)",
        )
        parser.add_argument(
            "--tolerance",
            type=parse_tolerance,
            action="append",
            default=[],
            metavar="NAME=VALUE",
            help="Override one tolerance; may be repeated",
        )
        parser.add_argument(
            "--suite",
            choices=list(SUITES),
            action="append",
            default=None,
            help="Run only this suite; may be repeated",
        )

    def run(self, **options):
        samples = get_mc_samples() if options["mc_samples"] is None else options["mc_samples"]
        cfg = make_mc_config(n=samples, seed=options["seed"])
        report = run_validation(
            grid=options["grid"],
            mc_samples=cfg.n,
            seed=cfg.seed,
            tolerances=dict(options["tolerance"]),
            suites=options["suite"],
        )
        if options["format"] == "csv":
            text = render_csv(report)
        else:
            text = render_text(report, self.style)
        self.emit(text, options["output"])

        worst = report.worst_offender()
        if worst is not None:
            raise CommandError(
                f"Validation failed: {len(report.failures)} check(s); worst offender "
                f"{worst.suite} / {worst.name}: error {worst.max_error:.3g} "
                f"> tolerance {worst.tolerance:.3g} at {worst.worst}",
                returncode=EXIT_VALIDATION_FAILURE,
            )


def render_text(report: ValidationReport, style) -> str:
    lines = []
    for suite in report.suites:
        lines.append(f"{suite.name} ({suite.seconds:.2f}s)")
        for check in suite.checks:
            if check.passed:
                status = style.SUCCESS("PASS")
            elif check.gating:
                status = style.ERROR("FAIL")
            else:
                status = style.WARNING("NOTE")
            lines.append(
                f"  [{status}] {check.name}: max error {check.max_error:.3g} "
                f"(tolerance {check.tolerance:.3g}, {check.evaluated} evaluated)"
            )
            if not check.passed and check.worst:
                lines.append(f"         worst at {check.worst}")
    verdict = "all checks passed" if report.passed else f"{len(report.failures)} check(s) failed"
    lines.append(f"{len(report.suites)} suites: {verdict}")
    return "\n".join(lines) + "\n"


REPORT_COLUMNS = ("suite", "check", "max_error", "tolerance", "passed", "gating", "evaluated", "worst")


def render_csv(report: ValidationReport) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for suite in report.suites:
        for check in suite.checks:
            writer.writerow(
                {
                    "suite": suite.name,
                    "check": check.name,
                    "max_error": format(check.max_error, ".6g"),
                    "tolerance": format(check.tolerance, ".6g"),
                    "passed": check.passed,
                    "gating": check.gating,
                    "evaluated": check.evaluated,
                    "worst": check.worst,
                }
            )
    return buffer.getvalue()
