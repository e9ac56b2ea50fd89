"""Testes do operador de observação e da correção de viés."""
import math

import numpy as np
import pytest

from services.errors import ConfigError, ParameterError
from services.radiance_forward import (
    BiasModel,
    ColumnState,
    ForwardOperatorParams,
    RadianceObservation,
    available_predictors,
    bias_correction,
    bias_corrected_forward,
    brightness_temperature,
    forward,
    forward_tangent,
    forward_temperature_tangent,
    get_predictor,
    predictors,
    register_predictor,
)

PARAMS = ForwardOperatorParams(opacity_coefficient=0.05)
STATE = ColumnState(water_vapor=20.0, surface_temperature=290.0, atmosphere_temperature=250.0)


class TestForward:
    def test_transparent_atmosphere(self):
        state = ColumnState(0.0, 290.0, 250.0)
        assert forward(state, PARAMS) == 290.0

    def test_opaque_limit(self):
        state = ColumnState(1e6, 290.0, 250.0)
        assert forward(state, PARAMS) == pytest.approx(250.0, abs=1e-9)

    def test_hand_value(self):
        expected = 290.0 * math.exp(-1.0) + 250.0 * (1.0 - math.exp(-1.0))
        assert forward(STATE, PARAMS) == pytest.approx(expected, rel=1e-12)
        assert forward(STATE, PARAMS) == pytest.approx(264.715, abs=1e-3)

    def test_monotone_in_water_vapor(self):
        values = [forward(ColumnState(q, 290.0, 250.0), PARAMS) for q in np.linspace(0, 100, 21)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_bounded_by_layer_temperatures(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            t_surf, t_atm = rng.uniform(200.0, 320.0, size=2)
            q = rng.uniform(0.0, 200.0)
            value = forward(ColumnState(q, t_surf, t_atm), PARAMS)
            assert min(t_surf, t_atm) - 1e-9 <= value <= max(t_surf, t_atm) + 1e-9

    def test_increasing_in_water_vapor_under_warm_layer(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            t_surf = rng.uniform(200.0, 280.0)
            t_atm = t_surf + rng.uniform(1.0, 40.0)
            values = [forward(ColumnState(q, t_surf, t_atm), PARAMS) for q in np.linspace(0, 100, 21)]
            assert all(b > a for a, b in zip(values, values[1:]))

    def test_vectorised_form_matches_scalar(self):
        q = np.array([0.0, 5.0, 20.0])
        got = brightness_temperature(q, 290.0, 250.0, 0.05)
        assert got[2] == pytest.approx(forward(STATE, PARAMS))

    def test_invalid_inputs(self):
        with pytest.raises(ParameterError):
            ColumnState(-1.0, 290.0, 250.0)
        with pytest.raises(ParameterError):
            ForwardOperatorParams(opacity_coefficient=0.0)
        with pytest.raises(ParameterError):
            RadianceObservation(value=260.0, error_stddev=0.0)


class TestTangent:
    def test_at_origin(self):
        state = ColumnState(0.0, 290.0, 250.0)
        assert forward_tangent(state, PARAMS) == pytest.approx(0.05 * (250.0 - 290.0))

    def test_isothermal_is_zero(self):
        assert forward_tangent(ColumnState(12.0, 270.0, 270.0), PARAMS) == 0.0

    def test_matches_finite_difference(self):
        h = 1e-5
        plus = forward(ColumnState(20.0 + h, 290.0, 250.0), PARAMS)
        minus = forward(ColumnState(20.0 - h, 290.0, 250.0), PARAMS)
        assert forward_tangent(STATE, PARAMS) == pytest.approx((plus - minus) / (2 * h), rel=1e-6)

    def test_temperature_tangents_sum_to_one(self):
        d_surf, d_atm = forward_temperature_tangent(STATE, PARAMS)
        assert d_surf + d_atm == pytest.approx(1.0)
        assert d_surf == pytest.approx(math.exp(-1.0))


class TestPredictors:
    def test_empty_list(self):
        obs = RadianceObservation(value=260.0)
        assert predictors(STATE, obs, BiasModel()).size == 0

    def test_surface_temperature_pass_through(self):
        bias = BiasModel(0.0, (0.0,), ("surface_temperature",))
        obs = RadianceObservation(value=260.0)
        assert list(predictors(STATE, obs, bias)) == [290.0]

    def test_scan_position(self):
        bias = BiasModel(0.0, (0.0,), ("scan_position",))
        obs = RadianceObservation(value=260.0, scan_position=7)
        assert list(predictors(STATE, obs, bias)) == [7.0]

    def test_unknown_predictor_fails_at_construction(self):
        with pytest.raises(ConfigError) as exc:
            BiasModel(0.0, (1.0,), ("cloud_liquid",))
        assert exc.value.field == "bias.predictors"

    def test_registry(self):
        assert {"surface_temperature", "scan_position"} <= set(available_predictors())
        register_predictor("water_vapor_test", lambda column, obs: column.water_vapor)
        bias = BiasModel(0.0, (2.0,), ("water_vapor_test",))
        obs = RadianceObservation(value=260.0)
        assert list(predictors(STATE, obs, bias)) == [20.0]
        assert get_predictor("water_vapor_test").surface_temperature_derivative == 0.0

    def test_coefficient_count_must_match(self):
        with pytest.raises(ParameterError):
            BiasModel(0.0, (1.0, 2.0), ("scan_position",))


class TestBiasCorrectedForward:
    def test_zero_coefficients_equal_forward(self):
        bias = BiasModel(0.0, (0.0,), ("scan_position",))
        obs = RadianceObservation(value=260.0, scan_position=3)
        assert bias_corrected_forward(STATE, bias, obs, PARAMS) == forward(STATE, PARAMS)

    def test_constant_only(self):
        obs = RadianceObservation(value=260.0)
        got = bias_corrected_forward(STATE, BiasModel(constant=1.5), obs, PARAMS)
        assert got == pytest.approx(forward(STATE, PARAMS) + 1.5)
        assert got == pytest.approx(266.215, abs=1e-3)

    def test_surface_temperature_coefficient(self):
        bias = BiasModel(0.0, (0.01,), ("surface_temperature",))
        obs = RadianceObservation(value=260.0)
        got = bias_corrected_forward(STATE, bias, obs, PARAMS)
        assert got == pytest.approx(forward(STATE, PARAMS) + 2.9)

    def test_vector_round_trip(self):
        bias = BiasModel(0.2, (0.01,), ("scan_position",))
        assert bias.size == 2
        again = bias.with_vector(bias.as_vector() * 2)
        assert again.constant == 0.4
        assert again.coefficients == (0.02,)
        assert again.predictor_names == ("scan_position",)

    def test_doubling_coefficients_doubles_correction(self):
        rng = np.random.default_rng(9)
        names = ("surface_temperature", "scan_position")
        for _ in range(50):
            bias = BiasModel(rng.uniform(-2.0, 2.0), tuple(rng.normal(scale=0.01, size=2)), names)
            doubled = bias.with_vector(2.0 * bias.as_vector())
            obs = RadianceObservation(value=260.0, scan_position=float(rng.integers(0, 30)))
            state = ColumnState(rng.uniform(0.0, 60.0), rng.uniform(260.0, 300.0), 250.0)
            single = bias_correction(state, bias, obs)
            assert bias_correction(state, doubled, obs) == pytest.approx(2.0 * single, rel=1e-12)
            shifted = bias_corrected_forward(state, doubled, obs, PARAMS) - forward(state, PARAMS)
            assert shifted == pytest.approx(2.0 * single, rel=1e-12, abs=1e-12)
