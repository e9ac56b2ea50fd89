"""
Serviço de Execução de Cenários
Nature run -> baseline -> varredura de níveis de vazamento, para cada membro do
ensemble; as diferenças são sempre contra o baseline do mesmo membro.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from services.aggregations import ensemble_mean, forecast_differences
from services.config_loader import ScenarioConfig, config_hash, defaults_applied
from services.errors import ParameterError, ScenarioError, SimulationError
from services.leakage_link import (
    aci_leakage_fraction,
    aggregate_leakage_power,
    leakage_chain,
)
from services.random_streams import derive_seed
from services.toy_nwp import (
    ModelState,
    Trajectory,
    diagnostics,
    integrate,
    lead_divergence,
    nature_run,
    observation_locations,
    perturb_state,
    synthesize_observations,
)
from services.var_assim import (
    AssimilationProblem,
    CovarianceSpec,
    RadianceOperator,
    minimize,
)

logger = logging.getLogger(__name__)

BASELINE_INDEX = -1


@dataclass
class MemberRun:
    """Uma análise + previsão (baseline ou nível) de um membro"""
    forecast: Trajectory
    precipitation: np.ndarray
    two_meter_temperature: np.ndarray
    analysis_cost: float
    converged: bool
    analysis_rmse: float


@dataclass
class ScenarioReport:
    config: ScenarioConfig
    config_hash: str
    rows: pd.DataFrame  # média do ensemble, baseline primeiro
    members: pd.DataFrame  # um registro por (nível, membro)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def baseline(self) -> pd.Series:
        return self.rows.iloc[0]

    @property
    def levels(self) -> pd.DataFrame:
        return self.rows.iloc[1:]


class ScenarioRunner:
    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.model_params = config.model.to_domain()
        self.forward_params = config.forward.to_domain()
        self.link = config.link.to_domain()
        self.antenna = config.antenna.to_domain()
        self.mask = config.mask.to_domain()
        self.aggressor = config.mask.aggressor()
        self.victim = config.mask.victim()
        self.field = config.field.to_domain()
        self.bias_background = config.bias.background()
        self.bias_truth = config.bias.truth()
        self.locations = observation_locations(
            config.model.n_grid, config.network.count, config.network.stride, config.network.offset
        )
        self._truth: Optional[Trajectory] = None

    # -- cadeia de vazamento -------------------------------------------------

    def total_leakage(self, level: float) -> float:
        """Nível configurado -> vazamento total no canal vítima (dBW)"""
        if self.config.leakage_interpretation == "aggregate":
            return level
        fraction = aci_leakage_fraction(self.mask, self.aggressor, self.victim)
        per_device = replace(self.field, per_device_eirp=level)
        return aggregate_leakage_power(per_device, fraction)

    def perturbation(self, level: float):
        """(temperatura de ruído K, delta T_b K) para um nível"""
        _, noise, delta = leakage_chain(self.total_leakage(level), self.link, self.victim, self.antenna)
        return noise.value, delta

    def field_leakage(self) -> Optional[float]:
        try:
            fraction = aci_leakage_fraction(self.mask, self.aggressor, self.victim)
        except ParameterError as e:
            logger.warning("vazamento do campo configurado indisponível: %s", e)
            return None
        return aggregate_leakage_power(self.field, fraction)

    # -- OSSE ----------------------------------------------------------------

    @property
    def truth(self) -> Trajectory:
        if self._truth is None:
            self._truth = nature_run(
                self.model_params,
                self.config.seeds.nature,
                self.config.spinup_steps,
                self.config.forecast_steps,
                n_grid=self.config.model.n_grid,
            )
        return self._truth

    def member_seeds(self, member: int):
        seeds = self.config.seeds
        return derive_seed(seeds.init, "member", member), derive_seed(seeds.obs_noise, "member", member)

    def background(self, member: int) -> ModelState:
        init_seed, _ = self.member_seeds(member)
        stddev = math.sqrt(self.config.covariances.state_variance)
        return perturb_state(self.truth.state_at(0), init_seed, stddev, stddev)

    def analyze_and_forecast(self, background: ModelState, member: int, delta_tb: float) -> MemberRun:
        config = self.config
        truth0 = self.truth.state_at(0)
        _, obs_seed = self.member_seeds(member)
        observations = synthesize_observations(
            truth0,
            self.forward_params,
            self.bias_truth,
            obs_seed,
            delta_tb,
            self.locations,
            error_stddev=config.covariances.obs_error_stddev,
            surface_offset=config.forward.surface_offset_k,
            atmosphere_lapse=config.forward.atmosphere_lapse_k,
        )
        operator = RadianceOperator(
            observations, config.model.n_grid, self.forward_params, self.bias_background,
            surface_offset=config.forward.surface_offset_k,
            atmosphere_lapse=config.forward.atmosphere_lapse_k,
        )
        problem = AssimilationProblem(
            background_state=background.as_vector(),
            background_bias=self.bias_background.as_vector(),
            state_covariance=CovarianceSpec.scalar(config.covariances.state_variance, 2 * config.model.n_grid),
            bias_covariance=CovarianceSpec.scalar(config.covariances.bias_variance, self.bias_background.size),
            obs_covariance=CovarianceSpec.from_observations(observations),
            observations=observations,
            operator=operator,
            hold_bias=config.bias.hold_fixed,
        )
        result = minimize(problem, tolerance=config.assimilation.tolerance,
                          max_iterations=config.assimilation.max_iterations)

        analysis = ModelState.from_vector(result.analysis_state)
        forecast = integrate(analysis, self.model_params, config.forecast_steps, t0=float(self.truth.times[0]))
        diag = diagnostics(forecast, self.model_params)
        rmse = float(np.sqrt(np.mean((analysis.temperature - truth0.temperature) ** 2)))
        return MemberRun(
            forecast=forecast,
            precipitation=diag.accumulated_precipitation,
            two_meter_temperature=diag.two_meter_temperature,
            analysis_cost=result.final_cost,
            converged=result.converged,
            analysis_rmse=rmse,
        )

    def run_member(self, member: int, perturbations: List[tuple]) -> List[Dict[str, Any]]:
        """Baseline + todos os níveis de um membro"""
        try:
            background = self.background(member)
            baseline = self.analyze_and_forecast(background, member, 0.0)
        except SimulationError as e:
            raise ScenarioError(e, None, member) from e

        records = [_record(BASELINE_INDEX, math.nan, member, 0.0, 0.0, baseline, baseline, 0)]
        for index, (level, (noise_k, delta_tb)) in enumerate(zip(self.config.leakage_levels, perturbations)):
            try:
                perturbed = self.analyze_and_forecast(background, member, delta_tb)
            except SimulationError as e:
                raise ScenarioError(e, level, member) from e
            records.append(_record(index, level, member, noise_k, delta_tb, perturbed, baseline,
                                   self.config.lead_steps))
            logger.debug("membro %d, nível %g dBW: delta T_b = %.6g K, custo %.6g",
                         member, level, delta_tb, perturbed.analysis_cost)
        logger.info("membro %d concluído (%d níveis)", member, len(self.config.leakage_levels))
        return records

    def run(self) -> ScenarioReport:
        config = self.config
        perturbations = []
        for level in config.leakage_levels:
            try:
                perturbations.append(self.perturbation(level))
            except SimulationError as e:
                raise ScenarioError(e, level, 0) from e
            logger.info("nível %g dBW -> ruído %.6g K, delta T_b %.6g K", level, *perturbations[-1])

        self.truth  # nature run antes de abrir o pool
        members = range(config.ensemble_size)
        if config.max_workers > 1 and config.ensemble_size > 1:
            with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
                per_member = list(pool.map(lambda m: self.run_member(m, perturbations), members))
        else:
            per_member = [self.run_member(m, perturbations) for m in members]

        records = pd.DataFrame([r for member_records in per_member for r in member_records])
        records = records.sort_values(["level_index", "member"], kind="stable").reset_index(drop=True)
        rows = ensemble_mean(records)

        metadata = {
            "config_hash": config_hash(config),
            "defaults_applied": defaults_applied(config),
            "nature_seed": config.seeds.nature,
            "n_observations": len(self.locations),
            "ensemble_size": config.ensemble_size,
            "leakage_interpretation": config.leakage_interpretation,
            "field_leakage_dBW": self.field_leakage(),
            "baseline_analysis_cost": float(rows.iloc[0]["analysis_cost"]),
        }
        return ScenarioReport(config=config, config_hash=metadata["config_hash"], rows=rows,
                              members=records, metadata=metadata)


def _record(index, level, member, noise_k, delta_tb, run: MemberRun, baseline: MemberRun,
            lead_steps: int) -> Dict[str, Any]:
    record = {
        "level_index": index,
        "leakage_dBW": level,
        "member": member,
        "noise_K": noise_k,
        "delta_tb_K": delta_tb,
    }
    record.update(forecast_differences(
        run.precipitation, baseline.precipitation,
        run.two_meter_temperature, baseline.two_meter_temperature,
    ))
    record["analysis_cost"] = run.analysis_cost
    record["converged"] = run.converged
    record["lead_rms_divergence_C"] = lead_divergence(run.forecast, baseline.forecast, lead_steps)
    record["analysis_rmse"] = run.analysis_rmse
    return record


def run_scenario(config: ScenarioConfig) -> ScenarioReport:
    """Executa o cenário completo e devolve o relatório (média do ensemble)"""
    logger.info("executando cenário: %d níveis x %d membros", len(config.leakage_levels), config.ensemble_size)
    return ScenarioRunner(config).run()
