"""
Análise Variacional 3DVar com Correção de Viés (VarBC)
Custo com vetor de controle aumentado (estado + coeficientes de viés), gradiente
analítico e minimizador de gradientes conjugados não linear.

J(x, b) = 1/2 (x - xb)' B^-1 (x - xb)
        + 1/2 (b - bb)' Bb^-1 (b - bb)
        + 1/2 [y - Ĥ(x, b)]' R^-1 [y - Ĥ(x, b)]
"""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass
from typing import NamedTuple, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from services.errors import NonFiniteCostError, ParameterError
from services.radiance_forward import (
    BiasModel,
    ForwardOperatorParams,
    RadianceObservation,
    brightness_temperature,
)

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
SHRINK = 0.5
MAX_BACKTRACKS = 60
# variação relativa de custo abaixo disto é arredondamento
COST_ROUNDING = 1e-10
DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITERATIONS = 500


# ---------------------------------------------------------------------------
# Covariâncias
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    """Covariância diagonal (vetor de variâncias) ou cheia (matriz SPD)"""
    kind: str
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if self.kind == "diagonal":
            if values.ndim != 1:
                raise ParameterError("covariância diagonal espera um vetor de variâncias")
            if not np.all(np.isfinite(values)) or np.any(values <= 0):
                raise ParameterError("variâncias devem ser finitas e > 0")
            factor = None
        elif self.kind == "full":
            if values.ndim != 2 or values.shape[0] != values.shape[1]:
                raise ParameterError("covariância cheia espera matriz quadrada")
            if not np.all(np.isfinite(values)):
                raise ParameterError("covariância com valores não finitos")
            if not np.allclose(values, values.T, rtol=1e-12, atol=1e-14):
                raise ParameterError("covariância cheia não é simétrica")
            try:
                factor = cho_factor(values, lower=True) if values.size else None
            except LinAlgError:
                raise ParameterError("covariância cheia não é positiva definida") from None
        else:
            raise ParameterError(f"tipo de covariância desconhecido: {self.kind}")
        object.__setattr__(self, "_factor", factor)

    @classmethod
    def diagonal(cls, variances: Sequence[float]) -> "CovarianceSpec":
        return cls("diagonal", np.asarray(variances, dtype=float))

    @classmethod
    def scalar(cls, variance: float, dim: int) -> "CovarianceSpec":
        return cls("diagonal", np.full(dim, float(variance)))

    @classmethod
    def full(cls, matrix) -> "CovarianceSpec":
        return cls("full", np.asarray(matrix, dtype=float))

    @classmethod
    def from_observations(cls, observations: Sequence[RadianceObservation]) -> "CovarianceSpec":
        return cls.diagonal([obs.error_stddev ** 2 for obs in observations])

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def solve(self, vector: np.ndarray) -> np.ndarray:
        """C^-1 v"""
        if self.kind == "diagonal":
            return vector / self.values
        if self.dim == 0:
            return np.zeros(0)
        return cho_solve(self._factor, vector)

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.values) if self.kind == "diagonal" else self.values.copy()


# ---------------------------------------------------------------------------
# Operadores de observação
# ---------------------------------------------------------------------------

class ObservationOperator(Protocol):
    n_state: int
    n_bias: int
    n_obs: int

    def evaluate(self, x: np.ndarray, beta: np.ndarray) -> np.ndarray:
        ...

    def linearize(self, x: np.ndarray, beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Ĥ(x, b), dĤ/dx, dĤ/db)"""
        ...


# visão sem validação da coluna; o minimizador pode visitar q < 0
_ColumnView = namedtuple("_ColumnView", "water_vapor surface_temperature atmosphere_temperature")


class RadianceOperator:
    """
    Liga o estado do modelo [T_0..T_N-1, q_0..q_N-1] às observações de radiância.

    Na posição k da observação: q = q_k, T_surf = T_k + surface_offset,
    T_atm = T_surf - atmosphere_lapse.
    """

    def __init__(self, observations: Sequence[RadianceObservation], n_grid: int,
                 params: ForwardOperatorParams, bias_model: BiasModel,
                 surface_offset: float = 273.0, atmosphere_lapse: float = 30.0):
        self.observations = tuple(observations)
        self.n_grid = int(n_grid)
        self.params = params
        self.bias_model = bias_model
        self.surface_offset = float(surface_offset)
        self.atmosphere_lapse = float(atmosphere_lapse)
        self.locations = np.array([obs.location for obs in self.observations], dtype=int)
        if np.any(self.locations < 0) or np.any(self.locations >= self.n_grid):
            raise ParameterError("observação fora da grade")
        self.n_state = 2 * self.n_grid
        self.n_bias = bias_model.size
        self.n_obs = len(self.observations)
        self._dp_dtsurf = np.array(
            [d.surface_temperature_derivative for d in bias_model.definitions], dtype=float
        )

    def _columns(self, x: np.ndarray):
        t_surf = x[self.locations] + self.surface_offset
        q = x[self.n_grid + self.locations]
        return q, t_surf, t_surf - self.atmosphere_lapse

    def _predictor_matrix(self, q, t_surf, t_atm) -> np.ndarray:
        P = np.ones((self.n_obs, self.n_bias))
        for j, obs in enumerate(self.observations):
            column = _ColumnView(q[j], t_surf[j], t_atm[j])
            for i, definition in enumerate(self.bias_model.definitions):
                P[j, i + 1] = definition.extract(column, obs)
        return P

    def evaluate(self, x, beta):
        q, t_surf, t_atm = self._columns(x)
        hb = brightness_temperature(q, t_surf, t_atm, self.params.opacity_coefficient)
        return hb + self._predictor_matrix(q, t_surf, t_atm) @ beta

    def linearize(self, x, beta):
        kappa = self.params.opacity_coefficient
        q, t_surf, t_atm = self._columns(x)
        transmission = np.exp(-kappa * q)
        hb = t_atm + (t_surf - t_atm) * transmission
        P = self._predictor_matrix(q, t_surf, t_atm)

        rows = np.arange(self.n_obs)
        H = np.zeros((self.n_obs, self.n_state))
        # T_surf e T_atm acompanham T_k; preditores dependentes do estado somam beta_i dp_i/dT_surf
        dT = transmission + (1.0 - transmission)
        if self._dp_dtsurf.size:
            dT = dT + float(np.dot(beta[1:], self._dp_dtsurf))
        H[rows, self.locations] = dT
        H[rows, self.n_grid + self.locations] = kappa * (t_atm - t_surf) * transmission
        return hb + P @ beta, H, P


class LinearObservationOperator:
    """Ĥ(x, b) = H x + c + P b"""

    def __init__(self, H, P, offset=None):
        self.H = np.atleast_2d(np.asarray(H, dtype=float))
        self.P = np.atleast_2d(np.asarray(P, dtype=float))
        self.n_obs = self.P.shape[0]
        if self.H.size == 0:
            self.H = np.zeros((self.n_obs, 0))
        self.n_state = self.H.shape[1]
        self.n_bias = self.P.shape[1]
        self.offset = np.zeros(self.n_obs) if offset is None else np.asarray(offset, dtype=float)
        if self.H.shape[0] != self.n_obs or self.offset.shape != (self.n_obs,):
            raise ParameterError("dimensões inconsistentes no operador linear")

    def evaluate(self, x, beta):
        return self.H @ x + self.offset + self.P @ beta

    def linearize(self, x, beta):
        return self.evaluate(x, beta), self.H, self.P


# ---------------------------------------------------------------------------
# Problema, controle e resultado
# ---------------------------------------------------------------------------

class Control(NamedTuple):
    state: np.ndarray
    bias: np.ndarray


@dataclass(frozen=True, eq=False)
class AssimilationProblem:
    background_state: np.ndarray
    background_bias: np.ndarray
    state_covariance: CovarianceSpec
    bias_covariance: CovarianceSpec
    obs_covariance: CovarianceSpec
    observations: Tuple[RadianceObservation, ...]
    operator: ObservationOperator
    hold_bias: bool = False

    def __post_init__(self):
        object.__setattr__(self, "background_state", np.asarray(self.background_state, dtype=float).ravel())
        object.__setattr__(self, "background_bias", np.asarray(self.background_bias, dtype=float).ravel())
        object.__setattr__(self, "observations", tuple(self.observations))
        n_x, n_b, n_y = len(self.background_state), len(self.background_bias), len(self.observations)
        checks = [
            ("B", self.state_covariance.dim, n_x),
            ("B_beta", self.bias_covariance.dim, n_b),
            ("R", self.obs_covariance.dim, n_y),
            ("operador (estado)", self.operator.n_state, n_x),
            ("operador (viés)", self.operator.n_bias, n_b),
            ("operador (observações)", self.operator.n_obs, n_y),
        ]
        for name, got, expected in checks:
            if got != expected:
                raise ParameterError(f"dimensão de {name} = {got}, esperado {expected}")

    @property
    def y(self) -> np.ndarray:
        return np.array([obs.value for obs in self.observations], dtype=float)

    @property
    def background(self) -> Control:
        return Control(self.background_state.copy(), self.background_bias.copy())

    @property
    def size(self) -> int:
        return len(self.background_state) + len(self.background_bias)


@dataclass(frozen=True, eq=False)
class AnalysisResult:
    analysis_state: np.ndarray
    analysis_bias: np.ndarray
    final_cost: float
    gradient_norm: float
    iterations: int
    converged: bool
    initial_cost: float
    tolerance: float

    @property
    def control(self) -> Control:
        return Control(self.analysis_state, self.analysis_bias)


def _as_control(control, problem: AssimilationProblem) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(control[0], dtype=float).ravel()
    beta = np.asarray(control[1], dtype=float).ravel()
    if len(x) != len(problem.background_state) or len(beta) != len(problem.background_bias):
        raise ParameterError(
            f"controle com dimensões ({len(x)}, {len(beta)}), esperado "
            f"({len(problem.background_state)}, {len(problem.background_bias)})"
        )
    return x, beta


def innovation(problem: AssimilationProblem, control) -> np.ndarray:
    """y - Ĥ(x, b)"""
    x, beta = _as_control(control, problem)
    return problem.y - problem.operator.evaluate(x, beta)


def _cost_terms(x, beta, problem: AssimilationProblem) -> float:
    dx = x - problem.background_state
    db = beta - problem.background_bias
    d = problem.y - problem.operator.evaluate(x, beta)
    return 0.5 * (
        float(dx @ problem.state_covariance.solve(dx))
        + float(db @ problem.bias_covariance.solve(db))
        + float(d @ problem.obs_covariance.solve(d))
    )


def cost(control, problem: AssimilationProblem) -> float:
    x, beta = _as_control(control, problem)
    return _cost_terms(x, beta, problem)


def _gradient_terms(x, beta, problem: AssimilationProblem):
    h, H, P = problem.operator.linearize(x, beta)
    weighted = problem.obs_covariance.solve(problem.y - h)
    g_x = problem.state_covariance.solve(x - problem.background_state) - H.T @ weighted
    if problem.hold_bias:
        g_b = np.zeros_like(beta)
    else:
        g_b = problem.bias_covariance.solve(beta - problem.background_bias) - P.T @ weighted
    return g_x, g_b, H, P


def gradient(control, problem: AssimilationProblem) -> Tuple[np.ndarray, np.ndarray]:
    x, beta = _as_control(control, problem)
    g_x, g_b, _, _ = _gradient_terms(x, beta, problem)
    return g_x, g_b


def _gauss_newton_curvature(d_x, d_b, H, P, problem: AssimilationProblem) -> float:
    """d' (B^-1 + Bb^-1 + J' R^-1 J) d com J = [H P]"""
    dh = H @ d_x + P @ d_b
    return (float(d_x @ problem.state_covariance.solve(d_x))
            + float(d_b @ problem.bias_covariance.solve(d_b))
            + float(dh @ problem.obs_covariance.solve(dh)))


def minimize(problem: AssimilationProblem, init=None, tolerance: float = DEFAULT_TOLERANCE,
             max_iterations: int = DEFAULT_MAX_ITERATIONS) -> AnalysisResult:
    """
    Gradientes conjugados Polak-Ribière (PR+, com reinício) e busca linear de
    Armijo com retrocesso. O passo inicial de cada busca vem da curvatura de
    Gauss-Newton ao longo da direção. Perto do mínimo a queda esperada do custo
    some no arredondamento de y - Ĥ (radiâncias ~260 K); quando a variação do
    custo fica abaixo de COST_ROUNDING * |J| o passo é aceito pela condição de
    Armijo aproximada sobre a derivada direcional, phi'(alpha) <= (2c - 1) phi'(0).

    Converge quando ||grad J|| <= tolerance * max(1, ||grad J_0||).
    """
    x, beta = _as_control(init if init is not None else problem.background, problem)
    if problem.hold_bias:
        beta = problem.background_bias.copy()
    n_x = len(x)

    J = _cost_terms(x, beta, problem)
    if not math.isfinite(J):
        raise NonFiniteCostError(Control(x, beta), 0)
    g_x, g_b, H, P = _gradient_terms(x, beta, problem)
    g = np.concatenate([g_x, g_b])
    initial_cost = J
    threshold = tolerance * max(1.0, float(np.linalg.norm(g)))
    restart_every = max(1, problem.size)

    d = -g
    iterations = 0
    since_restart = 0
    converged = float(np.linalg.norm(g)) <= threshold

    while not converged and iterations < max_iterations:
        slope = float(g @ d)
        if slope >= 0.0:
            d = -g
            slope = -float(g @ g)
            since_restart = 0

        curvature = _gauss_newton_curvature(d[:n_x], d[n_x:], H, P, problem)
        alpha = -slope / curvature if curvature > 0.0 and math.isfinite(curvature) else 1.0

        accepted = False
        trial = None
        noise = COST_ROUNDING * max(1.0, abs(J))
        for _ in range(MAX_BACKTRACKS):
            x_new = x + alpha * d[:n_x]
            beta_new = beta + alpha * d[n_x:]
            J_new = _cost_terms(x_new, beta_new, problem)
            if not math.isfinite(J_new):
                raise NonFiniteCostError(Control(x, beta), iterations)
            if J_new <= J + ARMIJO_C * alpha * slope:
                accepted = True
                break
            if abs(J_new - J) <= noise:
                # custo indistinguível: decide pela derivada direcional no ponto novo
                trial = _gradient_terms(x_new, beta_new, problem)
                new_slope = float(np.concatenate(trial[:2]) @ d)
                if new_slope <= (2.0 * ARMIJO_C - 1.0) * slope:
                    accepted = True
                    break
                trial = None
            alpha *= SHRINK
        if not accepted:
            logger.warning("busca linear sem progresso na iteração %d; parando", iterations)
            break

        if trial is None:
            trial = _gradient_terms(x_new, beta_new, problem)
        g_x, g_b, H, P = trial
        g_new = np.concatenate([g_x, g_b])
        if not np.all(np.isfinite(g_new)):
            raise NonFiniteCostError(Control(x, beta), iterations)

        since_restart += 1
        if since_restart >= restart_every:
            pr = 0.0
            since_restart = 0
        else:
            pr = max(0.0, float(g_new @ (g_new - g)) / float(g @ g))
        d = -g_new + pr * d

        x, beta, J, g = x_new, beta_new, J_new, g_new
        iterations += 1
        grad_norm = float(np.linalg.norm(g))
        logger.debug("3dvar it=%d J=%.10g |g|=%.3e alpha=%.3e", iterations, J, grad_norm, alpha)
        converged = grad_norm <= threshold

    grad_norm = float(np.linalg.norm(g))
    if not converged:
        logger.info("3dvar não convergiu: %d iterações, |g|=%.3e (limite %.3e)",
                    iterations, grad_norm, threshold)
    return AnalysisResult(
        analysis_state=x,
        analysis_bias=beta,
        final_cost=J,
        gradient_norm=grad_norm,
        iterations=iterations,
        converged=converged,
        initial_cost=initial_cost,
        tolerance=threshold,
    )
