import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from state_estimation.exceptions import InvalidParameterError
from state_estimation.services.gaussian_linalg import conditional_covariance
from state_estimation.services.network_model import (
    X1_INDEX,
    AgentGroup,
    aggregate_covariance,
    d_max,
    d_min,
    d_min_asymptote,
    d_min_limit,
    joint_covariance,
    make_params,
    moments,
    u_index,
    validate_sigma_q2,
    y_index,
)


class TestParams:
    @pytest.mark.parametrize(
        "k, h, sigma_x2, field",
        [
            (1, 0.5, 1.0, "k"),
            (3, 0.0, 1.0, "h"),
            (3, -0.5, 1.0, "h"),
            (3, 0.5, 0.0, "sigma_x2"),
            (3, 0.5, float("nan"), "sigma_x2"),
            (3, float("inf"), 1.0, "h"),
        ],
    )
    def test_invalid_fields_are_named(self, k, h, sigma_x2, field):
        with pytest.raises(InvalidParameterError) as excinfo:
            make_params(k, h, sigma_x2)
        assert excinfo.value.field == field

    def test_frozen(self, reference_params):
        with pytest.raises(Exception):
            reference_params.k = 4

    def test_sigma_q2_domain(self):
        assert validate_sigma_q2(0.0) == 0.0
        assert math.isinf(validate_sigma_q2(float("inf")))
        with pytest.raises(InvalidParameterError):
            validate_sigma_q2(-1.0)
        with pytest.raises(InvalidParameterError):
            validate_sigma_q2(float("nan"))
        with pytest.raises(InvalidParameterError):
            validate_sigma_q2(0.0, allow_zero=False)


class TestMoments:
    def test_reference_values(self, reference_params):
        m = moments(reference_params)
        assert m.alpha == pytest.approx(3.0, rel=1e-12)
        assert m.beta == pytest.approx(1.9142136, abs=1e-7)

    def test_match_joint_covariance(self, reference_params):
        joint = joint_covariance(reference_params, 0.7)
        m = moments(reference_params)
        y1, y2 = y_index(reference_params, 1), y_index(reference_params, 2)
        u1 = u_index(reference_params, 1)
        assert joint.entries[y1, y1] == pytest.approx(m.alpha)
        assert joint.entries[y1, y2] == pytest.approx(m.beta)
        assert joint.entries[u1, u1] == pytest.approx(m.alpha + 0.7)
        assert joint.entries[X1_INDEX, y2] == pytest.approx(math.sqrt(0.5))

    def test_joint_layout(self, reference_params):
        joint = joint_covariance(reference_params, 1.0)
        assert joint.dim == 1 + 2 * reference_params.k
        assert u_index(reference_params, 3) == 6

    def test_infinite_sigma_q2_rejected(self, reference_params):
        with pytest.raises(InvalidParameterError):
            joint_covariance(reference_params, float("inf"))


class TestDistortionRange:
    def test_reference_values(self, reference_params):
        assert d_max(reference_params) == pytest.approx(2.0 / 3.0, rel=1e-12)
        assert d_min(reference_params) == pytest.approx(
            (38 + 5 * math.sqrt(2)) / 68, rel=1e-9
        )

    def test_k6(self):
        assert d_min(make_params(6, 0.5, 1.0)) == pytest.approx(0.66554149, abs=1e-8)

    def test_degenerate_coefficient(self, degenerate_params):
        assert d_min(degenerate_params) == pytest.approx(0.6, rel=1e-12)
        assert d_max(degenerate_params) == pytest.approx(0.6, rel=1e-12)

    @pytest.mark.parametrize("k", [2, 3, 5, 8, 20])
    @pytest.mark.parametrize("h", [0.1, 0.5, 1.0, 2.5])
    def test_against_conditioning_oracle(self, k, h):
        params = make_params(k, h, 1.5)
        joint = joint_covariance(params, 1.0)
        ys = [y_index(params, agent) for agent in range(1, k + 1)]
        all_y = conditional_covariance(joint, [X1_INDEX], ys).entries[0, 0]
        own_y = conditional_covariance(joint, [X1_INDEX], ys[:1]).entries[0, 0]
        assert d_min(params) == pytest.approx(all_y, rel=1e-9)
        assert d_max(params) == pytest.approx(own_y, rel=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(
        k=st.integers(2, 500),
        h=st.floats(0.01, 4.0),
        sigma_x2=st.floats(0.1, 10.0),
    )
    def test_ordered(self, k, h, sigma_x2):
        params = make_params(k, h, sigma_x2)
        assert 0 < d_min(params) <= d_max(params) * (1 + 1e-12)

    def test_simplified_limit(self, reference_params):
        assert d_min_limit(reference_params) == pytest.approx(
            1 - (1 - math.sqrt(0.5)) ** 2 / 0.5, rel=1e-12
        )

    def test_converges_to_asymptote(self):
        gaps = [
            abs(d_min(make_params(k, 0.5, 1.0)) - d_min_asymptote(make_params(k, 0.5, 1.0)))
            for k in (10, 100, 1_000, 10_000, 1_000_000)
        ]
        assert all(later < earlier for earlier, later in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-5


class TestAggregateCovariance:
    def test_matches_explicit_sums(self):
        params = make_params(5, 0.5, 1.0)
        sigma_q2 = 0.8
        joint = joint_covariance(params, sigma_q2).entries
        groups = [
            AgentGroup("x", 1, 1),
            AgentGroup("y", 1, 1),
            AgentGroup("y", 2, 5),
            AgentGroup("u", 3, 5),
        ]
        selector = np.zeros((len(groups), joint.shape[0]))
        selector[0, X1_INDEX] = 1.0
        selector[1, y_index(params, 1)] = 1.0
        selector[2, [y_index(params, a) for a in range(2, 6)]] = 1.0
        selector[3, [u_index(params, a) for a in range(3, 6)]] = 1.0
        expected = selector @ joint @ selector.T
        aggregated = aggregate_covariance(params, sigma_q2, groups)
        np.testing.assert_allclose(aggregated.entries, expected, rtol=1e-12, atol=1e-12)

    def test_summed_conditioning_matches_d_min(self):
        params = make_params(40, 0.3, 2.0)
        groups = [AgentGroup("x", 1, 1), AgentGroup("y", 1, 1), AgentGroup("y", 2, 40)]
        aggregated = aggregate_covariance(params, 1.0, groups)
        conditioned = conditional_covariance(aggregated, [0], [1, 2]).entries[0, 0]
        assert conditioned == pytest.approx(d_min(params), rel=1e-9)

    def test_group_outside_agents(self, reference_params):
        with pytest.raises(InvalidParameterError):
            aggregate_covariance(reference_params, 1.0, [AgentGroup("y", 2, 4)])

    def test_empty_group(self, reference_params):
        with pytest.raises(InvalidParameterError):
            aggregate_covariance(reference_params, 1.0, [AgentGroup("y", 3, 2)])
