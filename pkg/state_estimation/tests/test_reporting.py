import io
import math

import pytest

from state_estimation.exceptions import InvalidParameterError
from state_estimation.services.network_model import make_params
from state_estimation.services.reporting import (
    CSV_COLUMNS,
    NA,
    build_row,
    figure1_spec,
    format_text,
    format_value,
    make_sweep_spec,
    render_plot_script,
    sweep_rows,
    write_csv,
)

EXPECTED_COLUMNS = (
    "k",
    "h",
    "sigma_x2",
    "sigma_q2",
    "units",
    "alpha",
    "beta",
    "d_min",
    "d_max",
    "d_achievable",
    "r_sum_dist",
    "r_per_user_dist",
    "r_sum_ceo",
    "r_per_user_ceo",
    "r_per_user_limit",
    "leakage_formula",
    "leakage_exact",
    "r1_outer",
    "leakage_outer",
)


class TestFormatting:
    def test_column_order(self):
        assert CSV_COLUMNS == EXPECTED_COLUMNS

    @pytest.mark.parametrize(
        "value, expected",
        [
            (None, NA),
            (math.inf, NA),
            (math.nan, NA),
            (3, "3"),
            ("bits", "bits"),
            (0.5, "0.5"),
            (2.0 / 3.0, "0.666666666666667"),
        ],
    )
    def test_format_value(self, value, expected):
        assert format_value(value) == expected


class TestBuildRow:
    def test_reference_row(self, reference_params):
        row = build_row(reference_params, 6.0, "bits")
        assert row.alpha == pytest.approx(3.0)
        assert row.r_sum_dist == pytest.approx(0.556082, abs=1e-6)
        assert row.r_sum_ceo == pytest.approx(0.788122, abs=1e-6)
        assert row.r_per_user_limit == pytest.approx(0.119984, abs=1e-6)
        # outer-bound family is infeasible at sigma_x2 = 1
        assert row.r1_outer is None
        assert row.leakage_outer is None

    def test_zero_sigma_q2_rates_are_absent(self, reference_params):
        row = build_row(reference_params, 0.0, "bits", include_outer=False)
        formatted = row.formatted()
        for name in ("r_sum_dist", "r_per_user_dist", "r_sum_ceo", "r_per_user_ceo", "r_per_user_limit"):
            assert formatted[name] == NA
        assert row.d_achievable == pytest.approx(row.d_min)
        assert row.leakage_exact == pytest.approx(row.leakage_formula, rel=1e-6)

    def test_outer_columns_when_feasible(self, outer_params):
        row = build_row(outer_params, 20.0, "nats")
        assert row.r1_outer is not None
        assert row.r1_outer > 0

    def test_infeasible_outer_logs_warning(self, reference_params, caplog):
        with caplog.at_level("WARNING", logger="state_estimation"):
            build_row(reference_params, 6.0, "bits")
        assert "Outer bounds unavailable at K=3" in caplog.text

    def test_skip_exact_leakage(self, reference_params):
        row = build_row(reference_params, 6.0, include_exact_leakage=False, include_outer=False)
        assert row.leakage_exact is None

    def test_infinite_sigma_q2(self, reference_params):
        row = build_row(reference_params, math.inf, "bits", include_outer=False)
        assert row.d_achievable == pytest.approx(row.d_max)
        assert row.r_sum_dist == 0.0
        assert row.formatted()["sigma_q2"] == NA


class TestSweep:
    def test_rows_in_order(self):
        spec = make_sweep_spec(
            k_values=[2, 3, 5, 9], h=0.5, sigma_x2=1.0, sigma_q2=6.0, include_outer=False
        )
        rows = sweep_rows(spec, workers=3)
        assert [row.k for row in rows] == [2, 3, 5, 9]

    def test_worker_count_does_not_change_rows(self):
        spec = make_sweep_spec(k_values=list(range(2, 12)), h=0.5, sigma_x2=4.0, sigma_q2=1.0)
        assert sweep_rows(spec, workers=1) == sweep_rows(spec, workers=4)

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            ({"k_values": [3, 2]}, "k_values"),
            ({"k_values": [1, 2]}, "k_values"),
            ({"k_values": []}, "k_values"),
            ({"h": -1.0}, "h"),
            ({"sigma_q2": -1.0}, "sigma_q2"),
        ],
    )
    def test_invalid_spec(self, kwargs, field):
        values = {"k_values": [2, 3], "h": 0.5, "sigma_x2": 1.0, "sigma_q2": 6.0}
        values.update(kwargs)
        with pytest.raises(InvalidParameterError) as excinfo:
            make_sweep_spec(**values)
        assert excinfo.value.field == field

    def test_figure1_defaults(self):
        spec = figure1_spec(k_max=10)
        assert spec.k_values == list(range(2, 11))
        assert spec.h == 0.5
        assert spec.sigma_q2 == 6.0

    def test_figure1_needs_two_agents(self):
        with pytest.raises(InvalidParameterError) as excinfo:
            figure1_spec(k_max=1)
        assert excinfo.value.field == "k_max"

    def test_figure1_per_user_rates_approach_limit(self):
        rows = sweep_rows(figure1_spec(k_max=60), workers=2)
        gaps = [row.r_per_user_ceo - row.r_per_user_dist for row in rows]
        assert all(gap > 0 for gap in gaps)
        assert gaps[-1] < gaps[0]
        first, last = rows[0], rows[-1]
        assert abs(last.r_per_user_dist - last.r_per_user_limit) < abs(
            first.r_per_user_dist - first.r_per_user_limit
        )


class TestOutput:
    def test_write_csv(self):
        stream = io.StringIO()
        write_csv([build_row(make_params(k, 0.5, 1.0), 6.0, include_outer=False) for k in (2, 3)], stream)
        lines = stream.getvalue().split("\n")
        assert lines[0] == ",".join(EXPECTED_COLUMNS)
        assert lines[1].startswith("2,0.5,1,6,bits,")
        assert lines[2].startswith("3,0.5,1,6,bits,3,")
        assert lines[-1] == ""
        assert "\r" not in stream.getvalue()

    def test_format_text(self, reference_params):
        row = build_row(reference_params, math.inf, include_outer=False)
        text = format_text(row, {"rates_dist": [0.1, 0.2]})
        assert "sigma_q2" in text
        assert "= inf" in text
        assert "rates_dist" in text and "0.1, 0.2" in text
        assert text.endswith("\n")

    def test_plot_script_reads_csv(self):
        script = render_plot_script("out/figure1.csv")
        assert "'out/figure1.csv'" in script
        assert "r_per_user_dist" in script
        compile(script, "plot.py", "exec")
