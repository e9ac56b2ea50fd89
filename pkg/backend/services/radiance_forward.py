"""
Operador de Observação em 23.8 GHz
Estado de coluna -> temperatura de brilho (H), sua tangente e o operador com
correção de viés Ĥ = H(x) + beta0 + sum(beta_i p_i).
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from services.errors import ConfigError, ParameterError
from services.leakage_link import VICTIM_CHANNEL, ChannelSpec

DEFAULT_OPACITY = 0.05  # (kg/m2)^-1


@dataclass(frozen=True)
class ColumnState:
    water_vapor: float
    surface_temperature: float
    atmosphere_temperature: float

    def __post_init__(self):
        if not self.water_vapor >= 0:
            raise ParameterError("vapor d'água integrado deve ser >= 0")
        if not self.surface_temperature > 0 or not self.atmosphere_temperature > 0:
            raise ParameterError("temperaturas devem ser > 0 K")


@dataclass(frozen=True)
class ForwardOperatorParams:
    opacity_coefficient: float = DEFAULT_OPACITY

    def __post_init__(self):
        if not self.opacity_coefficient > 0:
            raise ParameterError("opacity_coefficient deve ser > 0")


@dataclass(frozen=True)
class RadianceObservation:
    value: float
    error_stddev: float = 0.3
    scan_position: float = 0.0
    applied_perturbation: float = 0.0
    location: int = 0
    channel: ChannelSpec = VICTIM_CHANNEL

    def __post_init__(self):
        if not self.error_stddev > 0:
            raise ParameterError("error_stddev deve ser > 0")
        if not math.isfinite(self.value):
            raise ParameterError("valor de observação não finito")


def brightness_temperature(q, t_surf, t_atm, kappa: float):
    """T_b = T_surf e^(-kq) + T_atm (1 - e^(-kq)), vetorizado"""
    transmission = np.exp(-kappa * np.asarray(q, dtype=float))
    return t_atm + (t_surf - t_atm) * transmission


def forward(state: ColumnState, params: ForwardOperatorParams) -> float:
    return float(brightness_temperature(
        state.water_vapor, state.surface_temperature, state.atmosphere_temperature,
        params.opacity_coefficient,
    ))


def forward_tangent(state: ColumnState, params: ForwardOperatorParams) -> float:
    """dT_b/dq = k (T_atm - T_surf) e^(-kq)"""
    kappa = params.opacity_coefficient
    return float(kappa * (state.atmosphere_temperature - state.surface_temperature)
                 * math.exp(-kappa * state.water_vapor))


def forward_temperature_tangent(state: ColumnState, params: ForwardOperatorParams) -> Tuple[float, float]:
    """(dT_b/dT_surf, dT_b/dT_atm)"""
    transmission = math.exp(-params.opacity_coefficient * state.water_vapor)
    return transmission, 1.0 - transmission


# ---------------------------------------------------------------------------
# Preditores de viés
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PredictorDefinition:
    name: str
    extract: Callable[[ColumnState, RadianceObservation], float]
    # derivada do preditor em relação a T_surf (usada no gradiente do 3DVar)
    surface_temperature_derivative: float = 0.0


_PREDICTORS: Dict[str, PredictorDefinition] = {}


def register_predictor(name: str, extract: Callable[[ColumnState, RadianceObservation], float],
                       surface_temperature_derivative: float = 0.0) -> PredictorDefinition:
    definition = PredictorDefinition(name, extract, surface_temperature_derivative)
    _PREDICTORS[name] = definition
    return definition


def get_predictor(name: str) -> PredictorDefinition:
    try:
        return _PREDICTORS[name]
    except KeyError:
        raise ConfigError(
            f"preditor desconhecido '{name}'; disponíveis: {sorted(_PREDICTORS)}",
            field="bias.predictors",
        ) from None


def available_predictors() -> Tuple[str, ...]:
    return tuple(sorted(_PREDICTORS))


# classe "estado do modelo"
register_predictor("surface_temperature", lambda column, obs: column.surface_temperature, 1.0)
# classe "medição"
register_predictor("scan_position", lambda column, obs: float(obs.scan_position))


@dataclass(frozen=True)
class BiasModel:
    """Coeficientes beta0 + beta_i e os preditores associados (resolvidos na construção)"""
    constant: float = 0.0
    coefficients: Tuple[float, ...] = ()
    predictor_names: Tuple[str, ...] = ()
    definitions: Tuple[PredictorDefinition, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        coefficients = tuple(float(c) for c in self.coefficients)
        names = tuple(self.predictor_names)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "predictor_names", names)
        if len(coefficients) != len(names):
            raise ParameterError(
                f"{len(coefficients)} coeficientes para {len(names)} preditores"
            )
        if not all(math.isfinite(c) for c in (self.constant,) + coefficients):
            raise ParameterError("coeficientes de viés não finitos")
        object.__setattr__(self, "definitions", tuple(get_predictor(n) for n in names))

    @property
    def size(self) -> int:
        """Tamanho do vetor de controle de viés [beta0, beta_1..beta_Np]"""
        return len(self.coefficients) + 1

    def as_vector(self) -> np.ndarray:
        return np.array((self.constant,) + self.coefficients, dtype=float)

    def with_vector(self, vector: Sequence[float]) -> "BiasModel":
        vector = [float(v) for v in vector]
        return BiasModel(constant=vector[0], coefficients=tuple(vector[1:]),
                         predictor_names=self.predictor_names)


def predictors(state: ColumnState, obs: RadianceObservation, bias: BiasModel) -> np.ndarray:
    return np.array([d.extract(state, obs) for d in bias.definitions], dtype=float)


def bias_correction(state: ColumnState, bias: BiasModel, obs: RadianceObservation) -> float:
    """beta0 + sum beta_i p_i"""
    values = predictors(state, obs, bias)
    return bias.constant + float(np.dot(np.asarray(bias.coefficients, dtype=float), values))


def bias_corrected_forward(state: ColumnState, bias: BiasModel, obs: RadianceObservation,
                           params: ForwardOperatorParams) -> float:
    return forward(state, params) + bias_correction(state, bias, obs)
