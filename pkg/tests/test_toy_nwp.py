"""Testes do Lorenz-96 úmido e do harness OSSE."""
import numpy as np
import pytest

from services.errors import ModelBlowUpError, ParameterError
from services.radiance_forward import BiasModel, ColumnState, ForwardOperatorParams, forward
from services.toy_nwp import (
    KELVIN_OFFSET,
    ModelParams,
    ModelState,
    Trajectory,
    diagnostics,
    integrate,
    lead_divergence,
    nature_run,
    observation_locations,
    perturb_state,
    step,
    synthesize_observations,
    tendency,
)

# Lorenz-96 puro: sem acoplamento entre umidade e temperatura
DRY = dict(moisture_coupling=0.0)
# fontes de umidade do cenário padrão
MOIST_SOURCES = dict(evaporation_rate=0.05, moisture_diffusion=0.05)


def _random_state(seed, n=40):
    rng = np.random.default_rng(seed)
    return ModelState(8.0 + rng.normal(size=n), 30.0 + rng.normal(size=n))


def _reference_tendency(temperature, moisture, p):
    """Lado direito escrito termo a termo, com índices explícitos"""
    n = temperature.size
    d_t = np.empty(n)
    d_q = np.empty(n)
    for k in range(n):
        d_t[k] = ((temperature[(k + 1) % n] - temperature[(k - 2) % n]) * temperature[(k - 1) % n]
                  - temperature[k] + p.forcing + p.moisture_coupling * moisture[k])

    def flux(k):
        k1 = (k + 1) % n
        velocity = p.advection_scale * 0.5 * (temperature[k % n] + temperature[k1])
        return velocity * 0.5 * (moisture[k % n] + moisture[k1])

    for k in range(n):
        d_q[k] = (-(flux(k) - flux(k - 1))
                  + p.moisture_diffusion * (moisture[(k + 1) % n] - 2 * moisture[k] + moisture[(k - 1) % n])
                  + p.evaporation_rate * (p.reference_moisture - moisture[k])
                  - p.condensation_rate * max(0.0, moisture[k] - p.condensation_threshold))
    return d_t, d_q


class TestModelState:
    def test_moisture_is_clipped(self):
        state = ModelState(np.full(4, 8.0), np.array([1.0, -2.0, 0.0, 3.0]))
        assert state.moisture.min() == 0.0

    def test_shapes_must_match(self):
        with pytest.raises(ParameterError):
            ModelState(np.zeros(5), np.zeros(4))

    def test_minimum_grid(self):
        with pytest.raises(ParameterError):
            ModelState(np.zeros(3), np.zeros(3))

    def test_vector_layout(self):
        state = _random_state(0, n=6)
        again = ModelState.from_vector(state.as_vector())
        assert np.array_equal(again.temperature, state.temperature)
        assert np.array_equal(again.moisture, state.moisture)


class TestStep:
    def test_lorenz_fixed_point(self):
        params = ModelParams(moisture_coupling=0.0)
        state = ModelState(np.full(40, 8.0), np.zeros(40))
        after = step(state, params)
        assert np.allclose(after.temperature, 8.0, rtol=0, atol=1e-12)
        assert np.all(after.moisture == 0.0)

    def test_deterministic(self):
        params = ModelParams()
        a = step(_random_state(1), params)
        b = step(_random_state(1), params)
        assert np.array_equal(a.temperature, b.temperature)
        assert np.array_equal(a.moisture, b.moisture)

    def test_tendency_matches_explicit_indices(self):
        params = ModelParams(**MOIST_SOURCES)
        state = _random_state(2, n=12)
        got = tendency(state.temperature, state.moisture, params)
        expected = _reference_tendency(state.temperature, state.moisture, params)
        assert np.allclose(got[0], expected[0], rtol=0, atol=1e-12)
        assert np.allclose(got[1], expected[1], rtol=0, atol=1e-12)

    def test_blow_up_detected(self):
        params = ModelParams(dt=50.0)
        state = _random_state(3)
        with pytest.raises(ModelBlowUpError) as exc:
            with np.errstate(over="ignore", invalid="ignore"):
                integrate(state, params, 200)
        assert exc.value.step_index >= 1

    def test_invalid_params(self):
        with pytest.raises(ParameterError):
            ModelParams(dt=0.0)
        with pytest.raises(ParameterError):
            ModelParams(condensation_rate=-1.0)


class TestIntegrate:
    def test_zero_steps(self):
        state = _random_state(4)
        trajectory = integrate(state, ModelParams(), 0)
        assert len(trajectory) == 1
        assert np.array_equal(trajectory.last.temperature, state.temperature)

    def test_matches_repeated_steps(self):
        params = ModelParams()
        state = _random_state(5)
        trajectory = integrate(state, params, 25)
        current = state
        for i in range(25):
            current = step(current, params, i)
        assert np.array_equal(trajectory.last.temperature, current.temperature)
        assert np.array_equal(trajectory.last.moisture, current.moisture)

    def test_flow_composition(self):
        params = ModelParams()
        state = _random_state(6)
        whole = integrate(state, params, 60)
        first = integrate(state, params, 25)
        second = integrate(first.last, params, 35, t0=first.times[-1])
        joined = first.concat(second)
        assert len(joined) == len(whole)
        assert np.allclose(joined.temperature, whole.temperature, rtol=0, atol=1e-12)
        assert np.allclose(joined.times, whole.times)

    def test_rk4_self_convergence(self):
        state = ModelState(8.0 + np.random.default_rng(7).normal(size=40), np.zeros(40))
        finals = []
        for dt in (0.01, 0.005, 0.0025):
            n = int(round(1.0 / dt))
            finals.append(integrate(state, ModelParams(dt=dt, **DRY), n).last.temperature)
        ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
        assert 12.0 <= ratio <= 20.0

    def test_moisture_stays_non_negative_every_step(self):
        rng = np.random.default_rng(15)
        # umidade rala e irregular: a advecção empurra pontos abaixo de zero
        state = ModelState(8.0 + 3.0 * rng.normal(size=40), np.abs(rng.normal(size=40)) * (rng.random(40) < 0.3))
        for params in (ModelParams(), ModelParams(advection_scale=0.5, **MOIST_SOURCES)):
            trajectory = integrate(state, params, 300)
            assert trajectory.moisture.min() >= 0.0

    def test_evaporation_moistens_dry_column(self):
        """Com evaporação ligada, q = 0 não é ponto fixo"""
        state = ModelState(np.full(40, 8.0), np.zeros(40))
        after = step(state, ModelParams(moisture_coupling=0.0, **MOIST_SOURCES))
        assert np.all(after.moisture > 0.0)

    def test_trajectory_times_validated(self):
        with pytest.raises(ParameterError):
            Trajectory(np.zeros((3, 4)), np.zeros((3, 4)), np.array([0.0, 0.2, 0.1]))


class TestDiagnostics:
    def test_dry_column_has_no_precipitation(self):
        params = ModelParams(**DRY)
        trajectory = integrate(ModelState(np.full(40, 8.0), np.full(40, 10.0)), params, 50)
        diag = diagnostics(trajectory, params)
        assert np.all(diag.accumulated_precipitation == 0.0)

    def test_single_step_hand_value(self):
        params = ModelParams(condensation_rate=0.2, dt=0.01)
        moisture = np.full((2, 4), params.condensation_threshold + 5.0)
        trajectory = Trajectory(np.zeros((2, 4)), moisture, np.array([0.0, 0.01]))
        diag = diagnostics(trajectory, params)
        assert np.allclose(diag.accumulated_precipitation, 0.01)
        assert np.allclose(diag.two_meter_temperature, KELVIN_OFFSET)

    def test_precipitation_adds_over_concat(self):
        params = ModelParams(**MOIST_SOURCES)
        state = _random_state(16)
        first = integrate(state, params, 40)
        second = integrate(first.last, params, 25, t0=first.times[-1])
        joined = diagnostics(first.concat(second), params).accumulated_precipitation
        parts = (diagnostics(first, params).accumulated_precipitation
                 + diagnostics(second, params).accumulated_precipitation)
        assert joined.sum() > 0.0
        assert np.allclose(joined, parts, rtol=1e-12, atol=1e-15)

    def test_identical_trajectories_identical_diagnostics(self):
        params = ModelParams()
        a = diagnostics(integrate(_random_state(8), params, 30), params)
        b = diagnostics(integrate(_random_state(8), params, 30), params)
        assert np.array_equal(a.accumulated_precipitation, b.accumulated_precipitation)
        assert np.array_equal(a.two_meter_temperature, b.two_meter_temperature)

    def test_lead_divergence(self):
        params = ModelParams()
        a = integrate(_random_state(9), params, 10)
        assert lead_divergence(a, a, 5) == 0.0
        shifted = Trajectory(a.temperature + 2.0, a.moisture, a.times)
        assert lead_divergence(a, shifted, 5) == pytest.approx(2.0)


class TestNatureRun:
    def test_same_seed_bitwise_identical(self):
        params = ModelParams()
        a = nature_run(params, 42, 100, 50)
        b = nature_run(params, 42, 100, 50)
        assert np.array_equal(a.temperature, b.temperature)
        assert np.array_equal(a.moisture, b.moisture)

    def test_different_seeds_differ(self):
        params = ModelParams()
        a = nature_run(params, 1, 10, 5)
        b = nature_run(params, 2, 10, 5)
        assert not np.array_equal(a.temperature[0], b.temperature[0])

    def test_times_start_after_spinup(self):
        trajectory = nature_run(ModelParams(), 3, 100, 20)
        assert trajectory.times[0] == pytest.approx(1.0)
        assert len(trajectory) == 21

    def test_climatological_variance_band(self):
        """Lorenz-96 padrão (F=8): variância de T na faixa conhecida"""
        params = ModelParams(moisture_coupling=0.0)
        trajectory = nature_run(params, 11, 1000, 5000)
        variance = float(np.var(trajectory.temperature))
        assert 8.0 <= variance <= 18.0

    def test_perturb_state_is_seeded(self):
        truth = _random_state(10)
        a = perturb_state(truth, 5, 1.0, 1.0)
        b = perturb_state(truth, 5, 1.0, 1.0)
        c = perturb_state(truth, 6, 1.0, 1.0)
        assert np.array_equal(a.temperature, b.temperature)
        assert not np.array_equal(a.temperature, c.temperature)


class TestSynthesizeObservations:
    params = ForwardOperatorParams(0.05)

    def test_noiseless_identity(self):
        truth = _random_state(12)
        locations = observation_locations(40)
        obs = synthesize_observations(truth, self.params, BiasModel(), 1, 0.0, locations, error_stddev=1e-12)
        for o in obs:
            t_surf = truth.temperature[o.location] + 273.0
            column = ColumnState(truth.moisture[o.location], t_surf, t_surf - 30.0)
            assert o.value == pytest.approx(forward(column, self.params), abs=1e-9)

    def test_perturbation_shifts_every_observation(self):
        truth = _random_state(13)
        locations = observation_locations(40)
        clean = synthesize_observations(truth, self.params, BiasModel(), 7, 0.0, locations)
        shifted = synthesize_observations(truth, self.params, BiasModel(), 7, 0.26826, locations)
        for a, b in zip(clean, shifted):
            assert b.value - a.value == pytest.approx(0.26826, abs=1e-9)
            assert b.applied_perturbation == 0.26826

    def test_same_seed_same_noise(self):
        truth = _random_state(14)
        locations = observation_locations(40)
        a = synthesize_observations(truth, self.params, BiasModel(0.5), 3, 0.0, locations)
        b = synthesize_observations(truth, self.params, BiasModel(0.5), 3, 0.0, locations)
        assert [o.value for o in a] == [o.value for o in b]

    def test_default_network(self):
        assert observation_locations(40) == list(range(0, 40, 2))
        with pytest.raises(ParameterError):
            observation_locations(10, count=20)
