"""
Serviço de Carregamento de Cenários
Única fonte de configuração: um arquivo JSON com seções aninhadas (ver
backend/data/cenario_padrao.json). Um arquivo determina uma execução inteira.
"""

import hashlib
import json
import logging
import math
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from services.errors import ConfigError
from services.leakage_link import (
    DEFAULT_MASK_BREAKPOINTS,
    AntennaModel,
    ChannelSpec,
    DensityClass,
    EmissionMask,
    LinkBudget,
    TransmitterField,
    DENSITY_PRESETS,
    VICTIM_CHANNEL,
)
from services.radiance_forward import BiasModel, ForwardOperatorParams, available_predictors
from services.random_streams import derive_seed
from services.toy_nwp import ModelParams

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent.parent / "data"
DEFAULT_SCENARIO_FILE = DATA_DIR / "cenario_padrao.json"

# Faixa do debate (-55 dBW) + os dois níveis testados (-20 e -15 dBW)
DEFAULT_SWEEP = [-55.0, -45.0, -35.0, -30.0, -25.0, -20.0, -15.0]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LinkSection(_Section):
    distance_km: float = Field(800.0, gt=0)
    nominal_total_pathloss_db: float = Field(130.0, gt=0)
    absorption_coefficient: float = Field(0.0, ge=0, le=1)
    pathloss_model: Literal["nominal", "free_space"] = "nominal"
    system_gain_db: float = 0.0
    frequency_hz: float = Field(VICTIM_CHANNEL.center_frequency, gt=0)

    def to_domain(self) -> LinkBudget:
        return LinkBudget.with_absorption(
            self.absorption_coefficient,
            distance=self.distance_km,
            nominal_total_pathloss=self.nominal_total_pathloss_db,
            pathloss_model=self.pathloss_model,
            system_gain=self.system_gain_db,
            frequency=self.frequency_hz,
        )


class AntennaSection(_Section):
    loss_factor: float = Field(1.0, ge=1)
    physical_temperature_k: float = Field(290.0, gt=0)

    def to_domain(self) -> AntennaModel:
        return AntennaModel.from_loss_factor(self.loss_factor, self.physical_temperature_k)


class MaskSection(_Section):
    breakpoints: List[Tuple[float, float]] = Field(default_factory=lambda: list(DEFAULT_MASK_BREAKPOINTS))
    in_band_power_dbw: float = 0.0
    aggressor_low_hz: float = 24.25e9
    aggressor_high_hz: float = 27.5e9
    victim_center_hz: float = VICTIM_CHANNEL.center_frequency
    victim_bandwidth_hz: float = Field(VICTIM_CHANNEL.bandwidth, gt=0)

    @field_validator("breakpoints")
    @classmethod
    def _sorted_offsets(cls, value):
        offsets = [f for f, _ in value]
        if len(value) < 2 or any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValueError("breakpoints precisam de >= 2 pontos com offsets estritamente crescentes")
        return value

    def to_domain(self) -> EmissionMask:
        return EmissionMask(breakpoints=tuple(tuple(p) for p in self.breakpoints),
                            in_band_power=self.in_band_power_dbw)

    def aggressor(self) -> ChannelSpec:
        return ChannelSpec.from_edges(self.aggressor_low_hz, self.aggressor_high_hz)

    def victim(self) -> ChannelSpec:
        return ChannelSpec.from_center(self.victim_center_hz, self.victim_bandwidth_hz)


class FieldSection(_Section):
    """Presets metropolitan/rural são botões de configuração, não medições"""
    density_class: Literal["metropolitan", "rural", "custom"] = "metropolitan"
    count: Optional[float] = Field(None, ge=0)
    per_device_eirp_dbw: Optional[float] = None
    elevation_gain_db: float = 0.0
    footprint_side_km: float = Field(48.0, gt=0)
    activity_factor: float = Field(1.0, ge=0, le=1)

    @model_validator(mode="after")
    def _custom_needs_values(self):
        if self.density_class == "custom" and (self.count is None or self.per_device_eirp_dbw is None):
            raise ValueError("density_class custom exige count e per_device_eirp_dbw")
        return self

    def to_domain(self) -> TransmitterField:
        density = DensityClass(self.density_class)
        preset = DENSITY_PRESETS.get(density, {})
        return TransmitterField(
            density_class=density,
            count=self.count if self.count is not None else preset["count"],
            per_device_eirp=(self.per_device_eirp_dbw if self.per_device_eirp_dbw is not None
                             else preset["per_device_eirp"]),
            elevation_gain_toward_satellite=self.elevation_gain_db,
            footprint_side=self.footprint_side_km,
            activity_factor=self.activity_factor,
        )


class ForwardSection(_Section):
    opacity_coefficient: float = Field(0.05, gt=0)
    surface_offset_k: float = 273.0
    atmosphere_lapse_k: float = 30.0

    def to_domain(self) -> ForwardOperatorParams:
        return ForwardOperatorParams(opacity_coefficient=self.opacity_coefficient)


class BiasSection(_Section):
    constant: float = 0.0
    predictors: List[str] = Field(default_factory=list)
    coefficients: List[float] = Field(default_factory=list)
    truth_constant: float = 0.0
    truth_coefficients: Optional[List[float]] = None
    hold_fixed: bool = False

    @field_validator("predictors")
    @classmethod
    def _known_predictors(cls, value):
        unknown = [name for name in value if name not in available_predictors()]
        if unknown:
            raise ValueError(f"preditores desconhecidos {unknown}; disponíveis: {list(available_predictors())}")
        return value

    @model_validator(mode="after")
    def _lengths(self):
        if len(self.coefficients) != len(self.predictors):
            raise ValueError("coefficients deve ter o mesmo tamanho de predictors")
        if self.truth_coefficients is not None and len(self.truth_coefficients) != len(self.predictors):
            raise ValueError("truth_coefficients deve ter o mesmo tamanho de predictors")
        return self

    def background(self) -> BiasModel:
        return BiasModel(self.constant, tuple(self.coefficients), tuple(self.predictors))

    def truth(self) -> BiasModel:
        coefficients = self.truth_coefficients if self.truth_coefficients is not None else [0.0] * len(self.predictors)
        return BiasModel(self.truth_constant, tuple(coefficients), tuple(self.predictors))


class CovarianceSection(_Section):
    state_variance: float = Field(1.0, gt=0)
    bias_variance: float = Field(0.5, gt=0)
    obs_error_stddev: float = Field(0.3, gt=0)


class ModelSection(_Section):
    n_grid: int = Field(40, ge=4)
    forcing: float = 8.0
    moisture_coupling: float = Field(0.1, ge=0)
    condensation_threshold: float = 25.0
    condensation_rate: float = Field(0.2, ge=0)
    dt: float = Field(0.01, gt=0)
    advection_scale: float = 0.1
    evaporation_rate: float = Field(0.05, ge=0)
    reference_moisture: float = Field(30.0, ge=0)
    moisture_diffusion: float = Field(0.05, ge=0)

    def to_domain(self) -> ModelParams:
        return ModelParams(**self.model_dump(exclude={"n_grid"}))


class NetworkSection(_Section):
    count: int = Field(20, ge=1)
    stride: int = Field(2, ge=1)
    offset: int = Field(0, ge=0)


class SeedsSection(_Section):
    nature: int = 20200001
    obs_noise: int = 20200002
    init: int = 20200003


class AssimilationSection(_Section):
    tolerance: float = Field(1e-8, gt=0)
    max_iterations: int = Field(500, ge=0)


class ScenarioConfig(_Section):
    leakage_levels: List[float] = Field(default_factory=lambda: list(DEFAULT_SWEEP))
    leakage_interpretation: Literal["aggregate", "per_device"] = "aggregate"
    link: LinkSection = Field(default_factory=LinkSection)
    antenna: AntennaSection = Field(default_factory=AntennaSection)
    mask: MaskSection = Field(default_factory=MaskSection)
    field: FieldSection = Field(default_factory=FieldSection)
    forward: ForwardSection = Field(default_factory=ForwardSection)
    bias: BiasSection = Field(default_factory=BiasSection)
    covariances: CovarianceSection = Field(default_factory=CovarianceSection)
    model: ModelSection = Field(default_factory=ModelSection)
    network: NetworkSection = Field(default_factory=NetworkSection)
    seeds: SeedsSection = Field(default_factory=SeedsSection)
    assimilation: AssimilationSection = Field(default_factory=AssimilationSection)
    spinup_length: float = Field(10.0, ge=0)
    forecast_length: float = Field(12.0, gt=0)
    lead_time: float = Field(1.0, ge=0)
    ensemble_size: int = Field(1, ge=1)
    max_workers: int = Field(1, ge=1)

    @field_validator("leakage_levels")
    @classmethod
    def _ascending_levels(cls, value):
        if not value:
            raise ValueError("leakage_levels não pode ser vazio")
        if any(not math.isfinite(v) for v in value):
            raise ValueError("leakage_levels deve conter apenas valores finitos")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("leakage_levels deve estar em ordem estritamente crescente")
        return value

    @model_validator(mode="after")
    def _consistent(self):
        for name in ("spinup_length", "forecast_length", "lead_time"):
            _steps(getattr(self, name), self.model.dt, name)
        if self.lead_time > self.forecast_length:
            raise ValueError("lead_time não pode exceder forecast_length")
        needed = self.network.offset + self.network.stride * (self.network.count - 1)
        if needed >= self.model.n_grid:
            raise ValueError("a rede de observações não cabe na grade do modelo")
        return self

    # conversões em passos do modelo
    @property
    def spinup_steps(self) -> int:
        return _steps(self.spinup_length, self.model.dt, "spinup_length")

    @property
    def forecast_steps(self) -> int:
        return _steps(self.forecast_length, self.model.dt, "forecast_length")

    @property
    def lead_steps(self) -> int:
        return _steps(self.lead_time, self.model.dt, "lead_time")


def _steps(length: float, dt: float, name: str) -> int:
    steps = round(length / dt)
    if abs(steps * dt - length) > 1e-9 * max(1.0, length):
        raise ValueError(f"{name}={length} não é múltiplo de dt={dt}")
    return int(steps)


def _field_path(loc: Sequence[Union[str, int]]) -> str:
    return ".".join(str(part) for part in loc) or "<raiz>"


def parse_config(text: str, source: str = "<texto>") -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON inválido em {source}: {e.msg}", line=e.lineno, column=e.colno) from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: o documento deve ser um objeto JSON")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], field=_field_path(first["loc"])) from None


def load_config(path) -> ScenarioConfig:
    """Lê, valida e completa com defaults um arquivo de cenário"""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    config = parse_config(text, source=path.name)
    logger.info("cenário carregado de %s (%d níveis, %d membros)",
                path.name, len(config.leakage_levels), config.ensemble_size)
    return config


# Só agendamento; não altera nenhum número da saída
SCHEDULING_FIELDS = {"max_workers"}


def canonical_json(config: ScenarioConfig) -> str:
    data = config.model_dump(mode="json", exclude=SCHEDULING_FIELDS)
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(config: ScenarioConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def defaults_applied(model: BaseModel, prefix: str = "") -> List[str]:
    """Caminhos (pontuados) dos campos preenchidos pelo default"""
    paths = []
    for name in type(model).model_fields:
        path = f"{prefix}{name}"
        value = getattr(model, name)
        if name not in model.model_fields_set:
            paths.append(path)
        elif isinstance(value, BaseModel):
            paths.extend(defaults_applied(value, prefix=f"{path}."))
    return paths


def with_levels(config: ScenarioConfig, levels: Sequence[float]) -> ScenarioConfig:
    # exclude_unset preserva o registro de defaults aplicados
    data = config.model_dump(exclude_unset=True)
    data["leakage_levels"] = list(levels)
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], field=_field_path(first["loc"])) from None


def with_seed_override(config: ScenarioConfig, seed: int) -> ScenarioConfig:
    """Substitui as três sementes por derivações da semente dada"""
    seeds = SeedsSection(
        nature=int(seed),
        obs_noise=derive_seed(seed, "obs_noise"),
        init=derive_seed(seed, "init"),
    )
    return config.model_copy(update={"seeds": seeds})


# Instância global do cenário padrão
_default_config: Optional[ScenarioConfig] = None


def get_default_config() -> ScenarioConfig:
    """Singleton do cenário padrão"""
    global _default_config
    if _default_config is None:
        _default_config = ScenarioConfig()
    return _default_config
