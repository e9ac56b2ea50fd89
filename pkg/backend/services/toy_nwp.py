"""
Modelo de Previsão de Brinquedo + Harness OSSE
Lorenz-96 úmido (anomalia de temperatura + umidade advectada com condensação por
limiar), integrado por RK4. Inclui nature run, síntese de observações de radiância
e diagnósticos de previsão (precipitação acumulada e temperatura a 2 m).

Convenções de relatório (não entram na dinâmica): 1 unidade de estado = 1 mm de
precipitação; temperatura reportada = T + 273 K.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from services.errors import ModelBlowUpError, ParameterError
from services.radiance_forward import BiasModel, ForwardOperatorParams, RadianceObservation
from services.random_streams import GaussianStream
from services.var_assim import RadianceOperator

logger = logging.getLogger(__name__)

KELVIN_OFFSET = 273.0


@dataclass(frozen=True)
class ModelParams:
    forcing: float = 8.0
    moisture_coupling: float = 0.1
    condensation_threshold: float = 25.0
    condensation_rate: float = 0.2
    dt: float = 0.01
    advection_scale: float = 0.1
    # fontes extras de umidade; 0 = equações sem evaporação nem difusão
    evaporation_rate: float = 0.0
    reference_moisture: float = 30.0
    moisture_diffusion: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError("dt deve ser > 0")
        for name in ("condensation_rate", "evaporation_rate", "moisture_diffusion", "moisture_coupling"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} deve ser >= 0")


@dataclass(frozen=True, eq=False)
class ModelState:
    temperature: np.ndarray
    moisture: np.ndarray

    def __post_init__(self):
        temperature = np.array(self.temperature, dtype=float)
        moisture = np.array(self.moisture, dtype=float)
        if temperature.ndim != 1 or temperature.shape != moisture.shape:
            raise ParameterError("campos de temperatura e umidade com tamanhos diferentes")
        if temperature.size < 4:
            raise ParameterError("a grade precisa de pelo menos 4 pontos")
        if not (np.all(np.isfinite(temperature)) and np.all(np.isfinite(moisture))):
            raise ParameterError("estado com valores não finitos")
        moisture = np.maximum(moisture, 0.0)
        temperature.setflags(write=False)
        moisture.setflags(write=False)
        object.__setattr__(self, "temperature", temperature)
        object.__setattr__(self, "moisture", moisture)

    @property
    def size(self) -> int:
        return self.temperature.size

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.temperature, self.moisture])

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> "ModelState":
        vector = np.asarray(vector, dtype=float)
        n = vector.size // 2
        return cls(vector[:n], vector[n:])


@dataclass(frozen=True, eq=False)
class Trajectory:
    temperature: np.ndarray  # (n_estados, N)
    moisture: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        if len(self.times) == 0:
            raise ParameterError("trajetória vazia")
        if len(self.times) > 1:
            spacing = np.diff(self.times)
            if np.any(spacing <= 0):
                raise ParameterError("tempos da trajetória devem ser estritamente crescentes")
            if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0):
                raise ParameterError("espaçamento da trajetória não é uniforme")

    def __len__(self) -> int:
        return len(self.times)

    def state_at(self, index: int) -> ModelState:
        return ModelState(self.temperature[index], self.moisture[index])

    @property
    def states(self) -> List[ModelState]:
        return [self.state_at(i) for i in range(len(self))]

    @property
    def last(self) -> ModelState:
        return self.state_at(-1)

    def concat(self, other: "Trajectory") -> "Trajectory":
        """Junta uma continuação que começa no último estado desta trajetória"""
        return Trajectory(
            temperature=np.vstack([self.temperature, other.temperature[1:]]),
            moisture=np.vstack([self.moisture, other.moisture[1:]]),
            times=np.concatenate([self.times, other.times[1:]]),
        )


@dataclass(frozen=True, eq=False)
class ForecastDiagnostics:
    accumulated_precipitation: np.ndarray  # mm por ponto
    two_meter_temperature: np.ndarray  # K por ponto


# ---------------------------------------------------------------------------
# Dinâmica
# ---------------------------------------------------------------------------

def tendency(temperature: np.ndarray, moisture: np.ndarray, params: ModelParams):
    """Lado direito do Lorenz-96 úmido (índices cíclicos)"""
    t_p1 = np.roll(temperature, -1)
    t_m1 = np.roll(temperature, 1)
    t_m2 = np.roll(temperature, 2)
    d_temperature = (t_p1 - t_m2) * t_m1 - temperature + params.forcing \
        + params.moisture_coupling * moisture

    q_p1 = np.roll(moisture, -1)
    q_m1 = np.roll(moisture, 1)
    # fluxo na face k+1/2, velocidade proporcional a T
    velocity = params.advection_scale * 0.5 * (temperature + t_p1)
    flux = velocity * 0.5 * (moisture + q_p1)
    d_moisture = -(flux - np.roll(flux, 1)) \
        + params.moisture_diffusion * (q_p1 - 2.0 * moisture + q_m1) \
        + params.evaporation_rate * (params.reference_moisture - moisture) \
        - params.condensation_rate * np.maximum(0.0, moisture - params.condensation_threshold)
    return d_temperature, d_moisture


def _rk4(temperature, moisture, params: ModelParams):
    h = params.dt
    k1t, k1q = tendency(temperature, moisture, params)
    k2t, k2q = tendency(temperature + 0.5 * h * k1t, moisture + 0.5 * h * k1q, params)
    k3t, k3q = tendency(temperature + 0.5 * h * k2t, moisture + 0.5 * h * k2q, params)
    k4t, k4q = tendency(temperature + h * k3t, moisture + h * k3q, params)
    new_t = temperature + (h / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
    new_q = moisture + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    return new_t, np.maximum(new_q, 0.0)


def step(state: ModelState, params: ModelParams, step_index: int = 0) -> ModelState:
    """Um passo RK4; umidade recortada em 0 depois do passo"""
    new_t, new_q = _rk4(state.temperature, state.moisture, params)
    if not (np.all(np.isfinite(new_t)) and np.all(np.isfinite(new_q))):
        raise ModelBlowUpError(step_index)
    return ModelState(new_t, new_q)


def integrate(state: ModelState, params: ModelParams, n_steps: int, t0: float = 0.0) -> Trajectory:
    if n_steps < 0:
        raise ParameterError("n_steps deve ser >= 0")
    temperature = np.empty((n_steps + 1, state.size))
    moisture = np.empty((n_steps + 1, state.size))
    temperature[0], moisture[0] = state.temperature, state.moisture
    t, q = temperature[0], moisture[0]
    for i in range(n_steps):
        t, q = _rk4(t, q, params)
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(q))):
            raise ModelBlowUpError(i + 1)
        temperature[i + 1], moisture[i + 1] = t, q
    times = t0 + params.dt * np.arange(n_steps + 1)
    return Trajectory(temperature, moisture, times)


def diagnostics(trajectory: Trajectory, params: ModelParams) -> ForecastDiagnostics:
    """
    Precipitação acumulada (mm): soma, sobre os passos, de
    condensation_rate * max(0, q - q_c) * dt no estado de início de cada passo.
    Temperatura a 2 m (K): T final + 273.
    """
    excess = np.maximum(0.0, trajectory.moisture[:-1] - params.condensation_threshold)
    precipitation = params.condensation_rate * params.dt * excess.sum(axis=0)
    return ForecastDiagnostics(
        accumulated_precipitation=precipitation,
        two_meter_temperature=trajectory.temperature[-1] + KELVIN_OFFSET,
    )


def lead_divergence(a: Trajectory, b: Trajectory, lead_index: int) -> float:
    """RMS da diferença de temperatura entre duas previsões num mesmo passo"""
    diff = a.temperature[lead_index] - b.temperature[lead_index]
    return float(np.sqrt(np.mean(diff ** 2)))


# ---------------------------------------------------------------------------
# OSSE
# ---------------------------------------------------------------------------

def nature_run(params: ModelParams, seed: int, spinup_steps: int, run_steps: int,
               n_grid: int = 40) -> Trajectory:
    """Verdade sintética: perturbação aleatória em torno de T=F, spin-up e registro"""
    stream = GaussianStream(seed)
    temperature = params.forcing + 0.5 * stream.normal(n_grid)
    moisture = np.maximum(0.0, params.reference_moisture + stream.normal(n_grid))
    initial = ModelState(temperature, moisture)
    spun_up = integrate(initial, params, spinup_steps).last
    logger.debug("nature run: semente %d, spin-up %d passos", seed, spinup_steps)
    return integrate(spun_up, params, run_steps, t0=spinup_steps * params.dt)


def perturb_state(state: ModelState, seed: int, temperature_stddev: float,
                  moisture_stddev: float) -> ModelState:
    """Background = verdade + ruído gaussiano com os desvios de B"""
    stream = GaussianStream(seed)
    return ModelState(
        state.temperature + temperature_stddev * stream.normal(state.size),
        state.moisture + moisture_stddev * stream.normal(state.size),
    )


def observation_locations(n_grid: int, count: int = 20, stride: int = 2, offset: int = 0) -> List[int]:
    locations = list(range(offset, n_grid, stride))[:count]
    if len(locations) < count:
        raise ParameterError(f"a grade de {n_grid} pontos não comporta {count} observações com passo {stride}")
    return locations


def synthesize_observations(truth: ModelState, params: ForwardOperatorParams, bias_truth: BiasModel,
                            obs_error_seed: int, delta_tb: float, obs_locations: Sequence[int],
                            error_stddev: float = 0.3, surface_offset: float = 273.0,
                            atmosphere_lapse: float = 30.0,
                            scan_positions: Optional[Sequence[float]] = None) -> List[RadianceObservation]:
    """
    y_k = Ĥ(verdade no ponto k, viés verdadeiro) + ruído N(0, error_stddev) + delta_tb.

    delta_tb entra igual em todas as observações (vazamento uniforme sobre a superfície).
    """
    scan_positions = list(range(len(obs_locations))) if scan_positions is None else list(scan_positions)
    templates = [
        RadianceObservation(value=0.0, error_stddev=error_stddev, scan_position=scan, location=loc)
        for loc, scan in zip(obs_locations, scan_positions)
    ]
    operator = RadianceOperator(templates, truth.size, params, bias_truth,
                                surface_offset=surface_offset, atmosphere_lapse=atmosphere_lapse)
    clean = operator.evaluate(truth.as_vector(), bias_truth.as_vector())
    noise = error_stddev * GaussianStream(obs_error_seed).normal(len(templates))
    values = (clean + noise) + delta_tb
    return [
        RadianceObservation(
            value=float(v),
            error_stddev=error_stddev,
            scan_position=t.scan_position,
            applied_perturbation=float(delta_tb),
            location=t.location,
        )
        for v, t in zip(values, templates)
    ]
