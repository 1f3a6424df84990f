"""
Shared flags, output handling and exit codes for the rate-leakage commands.

Exit codes: 0 success, 1 invalid parameter, 2 infeasible request or
numerical failure, 3 I/O failure, 4 validation failure.
"""

import sys

from django.core.management.base import BaseCommand, CommandError

from state_estimation.exceptions import (
    InfeasibleCalibrationError,
    InfeasibleDistortionError,
    InvalidParameterError,
    OuterBoundDomainError,
    SingularCovarianceError,
)

EXIT_INVALID_PARAMETER = 1
EXIT_INFEASIBLE = 2
EXIT_IO_FAILURE = 3
EXIT_VALIDATION_FAILURE = 4

# Service field names that do not map one-to-one onto a flag
FIELD_FLAGS = {
    "k_values": "--k-min/--k-max/--k-step or --k-list",
    "n": "--mc-samples",
    "d_target": "--distortion",
}


def flag_for(field: str) -> str:
    return FIELD_FLAGS.get(field, "--" + field.replace("_", "-"))


class RateLeakageCommand(BaseCommand):
    """Base class adding the global flags and mapping domain errors to exit codes."""

    requires_system_checks = []
    output_formats = ("csv", "text")

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        if getattr(parser, "called_from_command_line", False):
            def error(message):
                parser.print_usage(sys.stderr)
                parser.exit(EXIT_INVALID_PARAMETER, f"{parser.prog}: error: {message}\n")

            parser.error = error
        return parser

    def add_arguments(self, parser):
        parser.add_argument(
            "--units",
            choices=["bits", "nats"],
            default=None,
            help="Units for rates and leakage (default: RATE_LEAKAGE_UNITS, bits)",
        )
        parser.add_argument(
            "--format",
            choices=self.output_formats,
            default=self.output_formats[0],
            help=f"Output format (default: {self.output_formats[0]})",
        )
        parser.add_argument(
            "--output",
            default=None,
            help="Write to this path instead of standard output",
        )
        parser.add_argument(
            "--seed",
            type=int,
            default=None,
            help="Random seed for Monte-Carlo checks (default: RATE_LEAKAGE_SEED, 42)",
        )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except InvalidParameterError as e:
            raise CommandError(
                f"Invalid value for {flag_for(e.field)}: {e}", returncode=EXIT_INVALID_PARAMETER
            ) from e
        except (InfeasibleDistortionError, InfeasibleCalibrationError) as e:
            raise CommandError(f"Infeasible request: {e}", returncode=EXIT_INFEASIBLE) from e
        except (SingularCovarianceError, OuterBoundDomainError) as e:
            # Degenerate covariance algebra at the requested configuration
            raise CommandError(f"Numerical failure: {e}", returncode=EXIT_INFEASIBLE) from e
        except OSError as e:
            raise CommandError(f"Output failed: {e}", returncode=EXIT_IO_FAILURE) from e

    def run(self, **options):
        raise NotImplementedError

    def emit(self, text: str, output: str | None) -> None:
        """Write text verbatim to the output path or standard output."""
        if output:
            with open(output, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            self.stderr.write(self.style.SUCCESS(f"Wrote {output}"))
        else:
            self.stdout.write(text, ending="")
