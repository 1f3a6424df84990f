import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from state_estimation.exceptions import InfeasibleDistortionError, InvalidParameterError
from state_estimation.services.network_model import d_max, d_min, make_params
from state_estimation.services.protocols import (
    EncodingKind,
    ProtocolKind,
    Units,
    achievable_distortion,
    ceo_rates,
    ceo_sum_rate,
    ceo_sum_rate_entropy_chain,
    compare_protocols,
    distributed_rates,
    distributed_sum_rate,
    distributed_sum_rate_entropy_chain,
    encoding_equivalence_check,
    leakage_exact,
    leakage_formula,
    operating_point,
    per_user_rate_limit,
    resolve_units,
    sigma_q2_for_distortion,
)

BITS = math.log(2.0)


def bits(value_nats):
    return value_nats / BITS


class TestUnits:
    def test_conversion(self):
        assert Units.BITS.convert(math.log(2.0)) == pytest.approx(1.0)
        assert Units.NATS.convert(0.3) == 0.3
        assert Units.BITS.convert(None) is None

    def test_resolve(self):
        assert resolve_units("nats") is Units.NATS
        assert resolve_units(Units.BITS) is Units.BITS
        with pytest.raises(InvalidParameterError):
            resolve_units("bans")

    def test_resolve_uses_settings(self, settings):
        settings.RATE_LEAKAGE = {"UNITS": "nats"}
        assert resolve_units(None) is Units.NATS


class TestAchievableDistortion:
    def test_endpoints(self, reference_params):
        assert achievable_distortion(reference_params, 0.0) == pytest.approx(d_min(reference_params))
        assert achievable_distortion(reference_params, math.inf) == d_max(reference_params)

    @settings(max_examples=50, deadline=None)
    @given(
        k=st.integers(2, 60),
        h=st.floats(0.05, 3.0),
        q_small=st.floats(0.0, 50.0),
        q_step=st.floats(0.01, 50.0),
    )
    def test_monotone_in_sigma_q2(self, k, h, q_small, q_step):
        params = make_params(k, h, 1.0)
        low = achievable_distortion(params, q_small)
        high = achievable_distortion(params, q_small + q_step)
        assert d_min(params) * (1 - 1e-12) <= low <= high * (1 + 1e-12)
        assert high <= d_max(params) * (1 + 1e-12)

    @pytest.mark.parametrize("sigma_q2", [0.0, 0.3, 1.0, 6.0, 250.0])
    def test_inverse(self, reference_params, sigma_q2):
        target = achievable_distortion(reference_params, sigma_q2)
        solved = sigma_q2_for_distortion(reference_params, target)
        assert achievable_distortion(reference_params, solved) == pytest.approx(target, rel=1e-10)
        assert solved == pytest.approx(sigma_q2, rel=1e-8, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(
        k=st.integers(2, 60),
        h=st.floats(0.05, 3.0),
        sigma_x2=st.floats(0.2, 5.0),
        fraction=st.floats(0.0, 0.999),
    )
    def test_inverse_reaches_target(self, k, h, sigma_x2, fraction):
        params = make_params(k, h, sigma_x2)
        low, high = d_min(params), d_max(params)
        target = low + fraction * (high - low)
        solved = sigma_q2_for_distortion(params, target)
        if math.isfinite(solved):
            assert achievable_distortion(params, solved) == pytest.approx(target, rel=1e-10)

    def test_inverse_at_d_max(self, reference_params):
        assert math.isinf(sigma_q2_for_distortion(reference_params, d_max(reference_params)))

    def test_inverse_outside_range(self, reference_params):
        with pytest.raises(InfeasibleDistortionError) as excinfo:
            sigma_q2_for_distortion(reference_params, 0.5)
        assert excinfo.value.d_min == pytest.approx(d_min(reference_params))
        with pytest.raises(InfeasibleDistortionError):
            sigma_q2_for_distortion(reference_params, 0.7)

    def test_degenerate_configuration_is_point(self, degenerate_params):
        assert achievable_distortion(degenerate_params, 3.0) == pytest.approx(0.6, rel=1e-12)
        assert math.isinf(sigma_q2_for_distortion(degenerate_params, 0.6))


class TestRates:
    def test_first_agent_rates(self, reference_params):
        assert bits(distributed_rates(reference_params, 6.0)[0]) == pytest.approx(0.187273, abs=1e-6)
        assert bits(ceo_rates(reference_params, 6.0)[0]) == pytest.approx(0.292481, abs=1e-6)

    def test_reference_sum_rates(self, reference_params):
        assert bits(distributed_sum_rate(reference_params, 6.0)) == pytest.approx(0.556082, abs=1e-6)
        assert bits(ceo_sum_rate(reference_params, 6.0)) == pytest.approx(0.788122, abs=1e-6)

    def test_two_agent_sum_rates(self):
        params = make_params(2, 1.0, 1.0)
        assert bits(distributed_sum_rate(params, 1.0)) == pytest.approx(1.415037, abs=1e-6)
        assert bits(ceo_sum_rate(params, 1.0)) == pytest.approx(1.792481, abs=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(
        k=st.integers(2, 60),
        h=st.floats(0.05, 3.0),
        sigma_x2=st.floats(0.2, 5.0),
        q_small=st.floats(0.05, 50.0),
        q_step=st.floats(0.01, 50.0),
    )
    def test_sum_rate_decreasing_in_sigma_q2(self, k, h, sigma_x2, q_small, q_step):
        params = make_params(k, h, sigma_x2)
        assume(d_max(params) - d_min(params) > 1e-9)
        assert distributed_sum_rate(params, q_small + q_step) < distributed_sum_rate(params, q_small)

    @pytest.mark.parametrize("k", [2, 3, 5, 8])
    @pytest.mark.parametrize("h", [0.25, 0.5, 2.0])
    @pytest.mark.parametrize("sigma_q2", [0.5, 6.0])
    def test_rates_sum_to_closed_forms(self, k, h, sigma_q2):
        params = make_params(k, h, 1.5)
        assert math.fsum(distributed_rates(params, sigma_q2)) == pytest.approx(
            distributed_sum_rate(params, sigma_q2), rel=1e-9
        )
        assert math.fsum(ceo_rates(params, sigma_q2)) == pytest.approx(
            ceo_sum_rate(params, sigma_q2), rel=1e-9
        )

    @pytest.mark.parametrize("k", [2, 4, 7])
    def test_entropy_chains(self, k):
        params = make_params(k, 0.5, 2.0)
        assert distributed_sum_rate_entropy_chain(params, 1.0) == pytest.approx(
            distributed_sum_rate(params, 1.0), rel=1e-9
        )
        assert ceo_sum_rate_entropy_chain(params, 1.0) == pytest.approx(
            ceo_sum_rate(params, 1.0), rel=1e-9
        )

    def test_ceo_entropy_chain_structured_path(self, settings):
        settings.RATE_LEAKAGE = {"EXPLICIT_MAX_K": 10}
        params = make_params(50, 0.5, 1.0)
        assert ceo_sum_rate_entropy_chain(params, 6.0) == pytest.approx(
            ceo_sum_rate(params, 6.0), rel=1e-9
        )

    def test_distributed_sum_is_order_free(self, reference_params):
        forward = math.fsum(distributed_rates(reference_params, 2.0))
        shuffled = math.fsum(distributed_rates(reference_params, 2.0, order=[2, 3, 1]))
        assert shuffled == pytest.approx(forward, rel=1e-9)

    def test_bad_order(self, reference_params):
        with pytest.raises(InvalidParameterError):
            distributed_rates(reference_params, 2.0, order=[1, 1, 2])

    def test_zero_sigma_q2_rejected(self, reference_params):
        with pytest.raises(InvalidParameterError) as excinfo:
            distributed_sum_rate(reference_params, 0.0)
        assert excinfo.value.field == "sigma_q2"

    def test_infinite_sigma_q2_costs_nothing(self, reference_params):
        assert distributed_sum_rate(reference_params, math.inf) == 0.0
        assert ceo_rates(reference_params, math.inf) == [0.0, 0.0, 0.0]

    def test_per_agent_rates_limited_by_k(self, settings):
        settings.RATE_LEAKAGE = {"EXPLICIT_MAX_K": 10}
        with pytest.raises(InvalidParameterError) as excinfo:
            distributed_rates(make_params(11, 0.5, 1.0), 1.0)
        assert excinfo.value.field == "k"


class TestProtocolComparison:
    @settings(max_examples=50, deadline=None)
    @given(
        k=st.integers(2, 200),
        h=st.floats(0.05, 3.0),
        sigma_x2=st.floats(0.2, 5.0),
        sigma_q2=st.floats(0.05, 100.0),
    )
    def test_centralized_costs_more(self, k, h, sigma_x2, sigma_q2):
        comparison = compare_protocols(make_params(k, h, sigma_x2), sigma_q2)
        assert comparison.gap > 0
        assert comparison.per_user_gap == pytest.approx(comparison.gap / k)

    def test_per_user_gap_shrinks(self):
        gaps = [
            compare_protocols(make_params(2 ** e, 0.5, 1.0), 6.0).per_user_gap
            for e in range(8, 18)
        ]
        assert all(later < earlier for earlier, later in zip(gaps, gaps[1:]))
        assert bits(gaps[-1]) < 1e-3

    def test_vanishing_interference(self):
        params = make_params(4, 1e-10, 1.0)
        for ceo, dist in zip(ceo_rates(params, 1.0), distributed_rates(params, 1.0)):
            assert ceo == pytest.approx(dist, abs=1e-8)
        assert abs(compare_protocols(params, 1.0).per_user_gap) < 1e-8

    def test_per_user_limit_checks_domain(self):
        with pytest.raises(InvalidParameterError) as excinfo:
            per_user_rate_limit(0.0, 1.0, 6.0)
        assert excinfo.value.field == "h"
        with pytest.raises(InvalidParameterError) as excinfo:
            per_user_rate_limit(0.5, -1.0, 6.0)
        assert excinfo.value.field == "sigma_x2"

    def test_per_user_limit(self):
        assert bits(per_user_rate_limit(0.5, 1.0, 6.0)) == pytest.approx(0.119984, abs=1e-6)
        params = make_params(10_000, 0.5, 1.0)
        per_user = distributed_sum_rate(params, 6.0) / params.k
        assert bits(abs(per_user - per_user_rate_limit(0.5, 1.0, 6.0))) < 2e-3


class TestLeakage:
    def test_formula_degenerate(self, degenerate_params):
        assert bits(leakage_formula(degenerate_params)) == pytest.approx(0.368483, abs=1e-6)

    @pytest.mark.parametrize("k", [2, 3, 6])
    @pytest.mark.parametrize("h", [0.25, 0.5, 1.5])
    def test_formula_matches_full_observation(self, k, h):
        params = make_params(k, h, 2.0)
        reference = 0.5 * math.log(params.sigma_x2 / d_min(params))
        assert leakage_formula(params) == pytest.approx(reference, rel=1e-6)
        assert leakage_exact(params, 0.0) == pytest.approx(reference, rel=1e-10)

    def test_no_broadcast_limit(self, reference_params):
        assert bits(leakage_exact(reference_params, math.inf)) == pytest.approx(0.131517, abs=1e-6)

    def test_decreasing_in_sigma_q2(self, reference_params):
        values = [leakage_exact(reference_params, q2) for q2 in (0.0, 0.5, 2.0, 10.0, math.inf)]
        assert all(later <= earlier for earlier, later in zip(values, values[1:]))

    def test_aggregated_path_matches_explicit(self, settings):
        params = make_params(12, 0.5, 1.0)
        explicit = leakage_exact(params, 2.0)
        settings.RATE_LEAKAGE = {"EXPLICIT_MAX_K": 5}
        assert leakage_exact(params, 2.0) == pytest.approx(explicit, rel=1e-9)

    def test_large_k(self):
        value = leakage_exact(make_params(100_000, 0.5, 1.0), 6.0)
        assert math.isfinite(value) and value > 0


class TestEncodingEquivalence:
    @pytest.mark.parametrize("k", [2, 3, 5])
    @pytest.mark.parametrize("sigma_q2", [1.0, 6.0])
    def test_progressive_matches_local(self, k, sigma_q2):
        check = encoding_equivalence_check(make_params(k, 0.5, 1.0), sigma_q2)
        assert set(check.progressive_rates) == {0.0, 0.5, 1.0}
        assert check.max_relative_error() < 1e-9


class TestOperatingPoint:
    def test_distributed_bits(self, reference_params):
        point = operating_point(reference_params, 6.0)
        assert point.units is Units.BITS
        assert point.protocol is ProtocolKind.DISTRIBUTED
        assert point.sum_rate == pytest.approx(0.556082, abs=1e-6)
        assert point.per_user_rate == pytest.approx(0.556082 / 3, abs=1e-6)
        assert point.rates_per_agent[0] == pytest.approx(0.187273, abs=1e-6)

    def test_centralized_nats(self, reference_params):
        point = operating_point(reference_params, 6.0, protocol="centralized", units="nats")
        assert point.sum_rate == pytest.approx(ceo_sum_rate(reference_params, 6.0))
        assert point.distortion == pytest.approx(achievable_distortion(reference_params, 6.0))

    def test_zero_sigma_q2_has_no_rates(self, reference_params):
        point = operating_point(reference_params, 0.0)
        assert point.sum_rate is None
        assert point.rates_per_agent is None
        assert point.distortion == pytest.approx(d_min(reference_params))

    def test_infinite_sigma_q2(self, reference_params):
        point = operating_point(reference_params, math.inf)
        assert point.distortion == d_max(reference_params)
        assert point.sum_rate == 0.0
        assert point.rates_per_agent == [0.0, 0.0, 0.0]

    def test_progressive(self, reference_params):
        local = operating_point(reference_params, 2.0)
        progressive = operating_point(
            reference_params, 2.0, encoding=EncodingKind.PROGRESSIVE, coefficient=0.5
        )
        assert progressive.rates_per_agent == pytest.approx(local.rates_per_agent, rel=1e-9)

    def test_progressive_centralized_rejected(self, reference_params):
        with pytest.raises(InvalidParameterError):
            operating_point(reference_params, 2.0, protocol="centralized", encoding="progressive")

    def test_skip_rates_for_large_k(self):
        point = operating_point(make_params(5_000, 0.5, 1.0), 6.0)
        assert point.rates_per_agent is None
        assert point.sum_rate > 0
