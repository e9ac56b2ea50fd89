"""
Autoverificação de Invariantes
Bateria rápida executada pelo subcomando `check`: cada verificação devolve
passou/falhou com um detalhe legível, sem depender do pytest.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from services.leakage_link import (
    N258_CHANNEL,
    VICTIM_CHANNEL,
    AntennaModel,
    ChannelSpec,
    EmissionMask,
    aci_leakage_fraction,
    antenna_temperature,
    noise_temperature_curve,
)
from services.random_streams import GaussianStream
from services.toy_nwp import ModelParams, ModelState, integrate
from services.var_assim import (
    AssimilationProblem,
    CovarianceSpec,
    LinearObservationOperator,
    cost,
    gradient,
    minimize,
)
from services.radiance_forward import RadianceObservation

logger = logging.getLogger(__name__)

SELF_CHECK_SEED = 2020


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check_noise_curve() -> Tuple[bool, str]:
    curve = noise_temperature_curve([-20.0, -15.0, -10.0]).set_index("leakage_dBW")["noise_K"]
    ok = (math.isclose(curve[-20.0], 0.26826, rel_tol=1e-5)
          and math.isclose(curve[-15.0], 0.84831, rel_tol=1e-5)
          and math.isclose(curve[-10.0] / curve[-20.0], 10.0, rel_tol=1e-9))
    return ok, f"T(-20)={curve[-20.0]:.6g} K, T(-15)={curve[-15.0]:.6g} K"


def _check_antenna_bounds() -> Tuple[bool, str]:
    stream = GaussianStream(SELF_CHECK_SEED)
    u = stream.uniform(3000).reshape(3, -1)
    t_b, t_p, eta = 400.0 * u[0], 1.0 + 399.0 * u[1], u[2]
    failures = 0
    for tb, tp, e in zip(t_b, t_p, eta):
        if e == 0.0:
            continue
        antenna = AntennaModel.from_efficiency(float(e), float(tp))
        ta = antenna_temperature(float(tb), antenna)
        if not (min(tb, tp) - 1e-9 <= ta <= max(tb, tp) + 1e-9):
            failures += 1
    return failures == 0, f"{failures} violações em {len(t_b)} amostras"


def _check_scalar_assimilation() -> Tuple[bool, str]:
    obs = (RadianceObservation(value=1.0, error_stddev=1.0),)
    problem = AssimilationProblem(
        background_state=np.zeros(0),
        background_bias=np.zeros(1),
        state_covariance=CovarianceSpec.diagonal([]),
        bias_covariance=CovarianceSpec.scalar(1.0, 1),
        obs_covariance=CovarianceSpec.scalar(1.0, 1),
        observations=obs,
        operator=LinearObservationOperator(np.zeros((1, 0)), [[1.0]]),
    )
    result = minimize(problem)
    beta = float(result.analysis_bias[0])
    ok = abs(beta - 0.5) <= 1e-6 and abs(result.final_cost - 0.25) <= 1e-6
    return ok, f"beta={beta:.9g}, J={result.final_cost:.9g}"


def _check_gradient() -> Tuple[bool, str]:
    stream = GaussianStream(SELF_CHECK_SEED + 1)
    n_x, n_b, n_y = 6, 2, 5
    H = stream.normal(n_y * n_x).reshape(n_y, n_x)
    P = np.column_stack([np.ones(n_y), stream.normal(n_y)])
    obs = tuple(RadianceObservation(value=float(v), error_stddev=0.5) for v in stream.normal(n_y))
    problem = AssimilationProblem(
        background_state=stream.normal(n_x),
        background_bias=stream.normal(n_b),
        state_covariance=CovarianceSpec.scalar(2.0, n_x),
        bias_covariance=CovarianceSpec.scalar(0.5, n_b),
        obs_covariance=CovarianceSpec.from_observations(obs),
        observations=obs,
        operator=LinearObservationOperator(H, P),
    )
    x, b = stream.normal(n_x), stream.normal(n_b)
    analytic = np.concatenate(gradient((x, b), problem))
    numeric = np.zeros(n_x + n_b)
    h = 1e-6
    for i in range(n_x + n_b):
        e = np.zeros(n_x + n_b)
        e[i] = h
        plus = cost((x + e[:n_x], b + e[n_x:]), problem)
        minus = cost((x - e[:n_x], b - e[n_x:]), problem)
        numeric[i] = (plus - minus) / (2 * h)
    error = float(np.linalg.norm(analytic - numeric) / max(1.0, np.linalg.norm(analytic)))
    return error <= 1e-6, f"erro relativo {error:.2e}"


def _check_rk4_order() -> Tuple[bool, str]:
    stream = GaussianStream(SELF_CHECK_SEED + 2)
    state = ModelState(8.0 + stream.normal(40), np.zeros(40))
    finals = []
    for dt in (0.01, 0.005, 0.0025):
        n = round(1.0 / dt)
        finals.append(integrate(state, ModelParams(dt=dt, moisture_coupling=0.0), n).last.temperature)
    ratio = float(np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2]))
    return 12.0 <= ratio <= 20.0, f"razão de erro {ratio:.3f}"


def _check_mask_additivity() -> Tuple[bool, str]:
    mask = EmissionMask()
    whole = aci_leakage_fraction(mask, N258_CHANNEL, VICTIM_CHANNEL)
    middle = VICTIM_CHANNEL.center_frequency
    low = ChannelSpec.from_edges(VICTIM_CHANNEL.f_low, middle)
    high = ChannelSpec.from_edges(middle, VICTIM_CHANNEL.f_high)
    parts = aci_leakage_fraction(mask, N258_CHANNEL, low) + aci_leakage_fraction(mask, N258_CHANNEL, high)
    return abs(whole - parts) <= 1e-6 * max(whole, 1e-300), f"fração {whole:.6e}"


CHECKS: List[Tuple[str, Callable[[], Tuple[bool, str]]]] = [
    ("curva de ruído (-20/-15 dBW)", _check_noise_curve),
    ("limites da temperatura de antena", _check_antenna_bounds),
    ("3DVar escalar (beta=0.5, J=0.25)", _check_scalar_assimilation),
    ("gradiente x diferenças finitas", _check_gradient),
    ("ordem do RK4", _check_rk4_order),
    ("aditividade da máscara", _check_mask_additivity),
]


def run_self_check() -> List[CheckResult]:
    results = []
    for name, check in CHECKS:
        try:
            passed, detail = check()
        except Exception as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        if not passed:
            logger.error("verificação falhou: %s (%s)", name, detail)
        results.append(CheckResult(name, bool(passed), detail))
    return results
