"""
Cadeia de Vazamento 5G -> Radiômetro
Máscara de emissão e interferência de canal adjacente (ACI), agregação dos
transmissores da pegada do sensor, orçamento de enlace até o satélite,
temperatura de ruído induzida e perturbação da temperatura de brilho.

Convenção: parâmetros públicos em dB/dBW; aritmética interna em unidades lineares.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import constants

from services.errors import ParameterError, UndefinedMaskRegionError

logger = logging.getLogger(__name__)

BOLTZMANN = constants.k  # J/K
SPEED_OF_LIGHT = constants.c  # m/s

# PSD igual ou abaixo deste nível conta como potência zero
FLOOR_DB = -300.0

# Resultado "sem vazamento": vira 0 W a jusante
NO_LEAKAGE = float("-inf")

_LN10_OVER_10 = math.log(10.0) / 10.0


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    """Converte potência linear em dB; zero vira NO_LEAKAGE"""
    value = float(value)
    if value <= 0.0:
        return NO_LEAKAGE
    return 10.0 * math.log10(value)


def is_no_leakage(level_dbw: float) -> bool:
    return math.isinf(level_dbw) and level_dbw < 0


# ---------------------------------------------------------------------------
# Canais
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelSpec:
    center_frequency: float
    bandwidth: float
    f_low: float
    f_high: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.center_frequency, self.bandwidth, self.f_low, self.f_high)):
            raise ParameterError("canal com frequências não finitas")
        if not self.f_low < self.f_high:
            raise ParameterError(
                f"bordas do canal invertidas: f_low={self.f_low:g} Hz >= f_high={self.f_high:g} Hz"
            )
        if self.bandwidth <= 0:
            raise ParameterError("largura de banda deve ser positiva")
        if abs((self.f_high - self.f_low) - self.bandwidth) > 1e-9 * self.bandwidth:
            raise ParameterError("bandwidth difere de f_high - f_low")

    @classmethod
    def from_edges(cls, f_low: float, f_high: float) -> "ChannelSpec":
        return cls(
            center_frequency=0.5 * (f_low + f_high),
            bandwidth=f_high - f_low,
            f_low=f_low,
            f_high=f_high,
        )

    @classmethod
    def from_center(cls, center_frequency: float, bandwidth: float) -> "ChannelSpec":
        half = 0.5 * bandwidth
        return cls(
            center_frequency=center_frequency,
            bandwidth=bandwidth,
            f_low=center_frequency - half,
            f_high=center_frequency + half,
        )


# Canal 1 do AMSU-A e banda n258
VICTIM_CHANNEL = ChannelSpec.from_center(23.8e9, 270e6)
N258_CHANNEL = ChannelSpec.from_edges(24.25e9, 27.5e9)


# ---------------------------------------------------------------------------
# Máscara de emissão
# ---------------------------------------------------------------------------

# Roll-off aproximado no estilo 3GPP; offsets relativos ao centro do agressor
DEFAULT_MASK_BREAKPOINTS: Tuple[Tuple[float, float], ...] = (
    (-4.875e9, -80.0),
    (-2.075e9, -45.0),
    (-1.825e9, -28.0),
    (-1.625e9, 0.0),
    (1.625e9, 0.0),
    (1.825e9, -28.0),
    (2.075e9, -45.0),
    (4.875e9, -80.0),
)


@dataclass(frozen=True)
class EmissionMask:
    """
    PSD por partes, linear em dB entre breakpoints.

    breakpoints: pares (offset em Hz relativo ao centro do canal agressor,
    PSD em dB relativa à PSD em banda). in_band_power: potência total em dBW.
    """
    breakpoints: Tuple[Tuple[float, float], ...] = DEFAULT_MASK_BREAKPOINTS
    in_band_power: float = 0.0

    def __post_init__(self):
        points = tuple((float(f), float(p)) for f, p in self.breakpoints)
        object.__setattr__(self, "breakpoints", points)
        if len(points) < 2:
            raise ParameterError("máscara precisa de pelo menos dois breakpoints")
        offsets = np.array([f for f, _ in points])
        psd = np.array([p for _, p in points])
        if not np.all(np.isfinite(offsets)) or not np.all(np.isfinite(psd)):
            raise ParameterError("máscara com valores não finitos")
        if np.any(np.diff(offsets) <= 0):
            raise ParameterError("breakpoints da máscara devem ser estritamente crescentes")
        if not math.isfinite(self.in_band_power):
            raise ParameterError("in_band_power não finita")

    def absolute(self, aggressor: ChannelSpec) -> Tuple[np.ndarray, np.ndarray]:
        """Frequências absolutas (Hz) e PSD (dB) dos breakpoints"""
        offsets = np.array([f for f, _ in self.breakpoints])
        psd = np.array([p for _, p in self.breakpoints])
        return aggressor.center_frequency + offsets, psd

    def leakage_power(self, aggressor: ChannelSpec, victim: ChannelSpec) -> float:
        """Potência (dBW) que cai no canal vítima"""
        return self.in_band_power + linear_to_db(aci_leakage_fraction(self, aggressor, victim))


def _integrate_mask(freqs: np.ndarray, psd_db: np.ndarray, low: float, high: float) -> float:
    """
    Integral exata da PSD linear em [low, high].

    Em cada segmento o dB é linear, logo a potência é exponencial. Escrita a
    partir da ponta mais alta: integral = w * p_max * (1 - exp(-a)) / a, com
    a = |ln(p1 / p0)|. Segmento com as duas pontas em FLOOR_DB ou abaixo conta
    como zero.
    """
    inner = freqs[(freqs > low) & (freqs < high)]
    nodes = np.concatenate(([low], inner, [high]))
    values = np.interp(nodes, freqs, psd_db)

    width = np.diff(nodes)
    d0, d1 = values[:-1], values[1:]
    p_max = 10.0 ** (np.maximum(d0, d1) / 10.0)
    a = np.abs(d1 - d0) * _LN10_OVER_10
    small = a < 1e-12
    safe_a = np.where(small, 1.0, a)
    shape = np.where(small, 1.0 - 0.5 * a, -np.expm1(-safe_a) / safe_a)
    segment = width * p_max * shape
    segment = np.where((d0 <= FLOOR_DB) & (d1 <= FLOOR_DB), 0.0, segment)
    return float(np.sum(segment))


def aci_leakage_fraction(mask: EmissionMask, aggressor: ChannelSpec, victim: ChannelSpec) -> float:
    """
    Fração da potência do agressor que cai em [victim.f_low, victim.f_high].

    Args:
        mask: máscara de emissão (definida sobre todo o canal vítima)
        aggressor: canal agressor (referência dos offsets)
        victim: canal vítima

    Returns:
        fração em [0, 1]
    """
    for channel in (aggressor, victim):
        if not channel.f_low < channel.f_high:
            raise ParameterError("bordas de canal invertidas")

    freqs, psd = mask.absolute(aggressor)
    if victim.f_low < freqs[0]:
        raise UndefinedMaskRegionError(victim.f_low, min(victim.f_high, freqs[0]))
    if victim.f_high > freqs[-1]:
        raise UndefinedMaskRegionError(max(victim.f_low, freqs[-1]), victim.f_high)

    total = _integrate_mask(freqs, psd, freqs[0], freqs[-1])
    if total <= 0.0:
        return 0.0
    in_victim = _integrate_mask(freqs, psd, victim.f_low, victim.f_high)
    return float(min(1.0, max(0.0, in_victim / total)))


# ---------------------------------------------------------------------------
# Campo de transmissores
# ---------------------------------------------------------------------------

class DensityClass(str, Enum):
    METROPOLITAN = "metropolitan"
    RURAL = "rural"
    CUSTOM = "custom"


# Botões de configuração (não são medições): emissores por pegada e
# EIRP efetiva de vazamento por emissor
DENSITY_PRESETS = {
    DensityClass.METROPOLITAN: {"count": 250.0, "per_device_eirp": -43.0},
    DensityClass.RURAL: {"count": 10.0, "per_device_eirp": -43.0},
}


@dataclass(frozen=True)
class TransmitterField:
    density_class: DensityClass
    count: float
    per_device_eirp: float
    elevation_gain_toward_satellite: float = 0.0
    footprint_side: float = 48.0
    activity_factor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "density_class", DensityClass(self.density_class))
        if not self.count >= 0:
            raise ParameterError("count deve ser >= 0")
        if not self.footprint_side > 0:
            raise ParameterError("footprint_side deve ser > 0")
        if not 0.0 <= self.activity_factor <= 1.0:
            raise ParameterError("activity_factor deve estar em [0, 1]")
        if not math.isfinite(self.per_device_eirp) or not math.isfinite(self.elevation_gain_toward_satellite):
            raise ParameterError("EIRP e ganho devem ser finitos")

    @classmethod
    def preset(cls, density_class, **overrides) -> "TransmitterField":
        density_class = DensityClass(density_class)
        if density_class not in DENSITY_PRESETS:
            raise ParameterError(f"classe '{density_class.value}' não tem preset; use custom com count e EIRP")
        values = dict(DENSITY_PRESETS[density_class])
        values.update(overrides)
        return cls(density_class=density_class, **values)

    @property
    def active_count(self) -> float:
        return self.count * self.activity_factor

    @property
    def density_per_km2(self) -> float:
        return self.count / (self.footprint_side ** 2)


def aggregate_leakage_power(field: TransmitterField, fraction: float) -> float:
    """Soma incoerente (em watts) do vazamento de todos os emissores ativos, em dBW"""
    if not 0.0 <= fraction <= 1.0:
        raise ParameterError(f"fração fora de [0, 1]: {fraction}")
    active = field.active_count
    if active == 0 or fraction == 0:
        return NO_LEAKAGE
    total_w = active * 10.0 ** (field.per_device_eirp / 10.0) * fraction
    return 10.0 * math.log10(total_w) + field.elevation_gain_toward_satellite


def combine_leakage(levels_dbw: Iterable[float]) -> float:
    """Soma níveis em dBW no domínio linear"""
    total = 0.0
    for level in levels_dbw:
        if not is_no_leakage(level):
            total += 10.0 ** (level / 10.0)
    return linear_to_db(total)


# ---------------------------------------------------------------------------
# Enlace
# ---------------------------------------------------------------------------

def free_space_pathloss(distance_km: float, frequency_hz: float) -> float:
    """Perda de espaço livre em dB: 20 log10(4 pi d f / c)"""
    if distance_km <= 0 or frequency_hz <= 0:
        raise ParameterError("distância e frequência devem ser positivas")
    return 20.0 * math.log10(4.0 * math.pi * distance_km * 1e3 * frequency_hz / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class LinkBudget:
    """
    Enlace terra -> satélite.

    nominal_total_pathloss já inclui ganhos de antena e sistema; a distância só
    entra no modelo free_space (FSPL - system_gain).
    """
    distance: float = 800.0
    nominal_total_pathloss: float = 130.0
    absorption_coefficient: float = 0.0
    transmittance: float = 1.0
    pathloss_model: str = "nominal"
    system_gain: float = 0.0
    frequency: float = VICTIM_CHANNEL.center_frequency

    def __post_init__(self):
        if not self.distance > 0:
            raise ParameterError("distance deve ser > 0")
        if not self.nominal_total_pathloss > 0:
            raise ParameterError("nominal_total_pathloss deve ser > 0")
        for name in ("absorption_coefficient", "transmittance"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} deve estar em [0, 1]")
        if abs(self.absorption_coefficient + self.transmittance - 1.0) > 1e-12:
            raise ParameterError("absorção + transmitância deve ser 1")
        if self.pathloss_model not in ("nominal", "free_space"):
            raise ParameterError(f"pathloss_model desconhecido: {self.pathloss_model}")

    @classmethod
    def with_absorption(cls, alpha: float, **kwargs) -> "LinkBudget":
        return cls(absorption_coefficient=alpha, transmittance=1.0 - alpha, **kwargs)

    def effective_pathloss(self) -> float:
        if self.pathloss_model == "free_space":
            return free_space_pathloss(self.distance, self.frequency) - self.system_gain
        return self.nominal_total_pathloss


def received_power(leakage: float, link: LinkBudget) -> float:
    """Potência recebida no radiômetro (W)"""
    if link.transmittance == 0.0 or is_no_leakage(leakage):
        return 0.0
    return 10.0 ** ((leakage - link.effective_pathloss()) / 10.0) * link.transmittance


# ---------------------------------------------------------------------------
# Ruído e antena
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseTemperature:
    value: float
    source_power: float
    bandwidth: float

    def __post_init__(self):
        if not self.value >= 0:
            raise ParameterError("temperatura de ruído negativa")
        expected = self.value * BOLTZMANN * self.bandwidth
        if abs(expected - self.source_power) > 1e-9 * max(abs(self.source_power), 1e-300):
            raise ParameterError("temperatura inconsistente com potência e banda")


@dataclass(frozen=True)
class AntennaModel:
    radiation_efficiency: float
    physical_temperature: float
    loss_factor: float

    def __post_init__(self):
        eta, loss = self.radiation_efficiency, self.loss_factor
        if not 0.0 <= eta <= 1.0:
            raise ParameterError("radiation_efficiency deve estar em [0, 1]")
        if not self.physical_temperature > 0:
            raise ParameterError("physical_temperature deve ser > 0")
        if not loss >= 1.0:
            raise ParameterError("loss_factor deve ser >= 1")
        if eta == 0.0:
            if not math.isinf(loss):
                raise ParameterError("eficiência 0 exige loss_factor infinito")
        elif abs(eta * loss - 1.0) > 1e-12:
            raise ParameterError("radiation_efficiency deve ser 1/loss_factor")

    @classmethod
    def from_loss_factor(cls, loss_factor: float, physical_temperature: float = 290.0) -> "AntennaModel":
        eta = 0.0 if math.isinf(loss_factor) else 1.0 / loss_factor
        return cls(radiation_efficiency=eta, physical_temperature=physical_temperature, loss_factor=loss_factor)

    @classmethod
    def from_efficiency(cls, radiation_efficiency: float, physical_temperature: float = 290.0) -> "AntennaModel":
        loss = math.inf if radiation_efficiency == 0.0 else 1.0 / radiation_efficiency
        return cls(radiation_efficiency=radiation_efficiency, physical_temperature=physical_temperature, loss_factor=loss)


def induced_noise_temperature(p_rx: float, channel: ChannelSpec) -> NoiseTemperature:
    """T = P / (k_B B)"""
    if p_rx < 0:
        raise ParameterError(f"potência negativa: {p_rx}")
    return NoiseTemperature(
        value=p_rx / (BOLTZMANN * channel.bandwidth),
        source_power=p_rx,
        bandwidth=channel.bandwidth,
    )


def antenna_temperature(t_b, antenna: AntennaModel):
    """T_a = eta T_b + (1 - eta) T_p"""
    if np.any(np.asarray(t_b) < 0):
        raise ParameterError("temperatura de brilho negativa")
    eta = antenna.radiation_efficiency
    return eta * t_b + (1.0 - eta) * antenna.physical_temperature


def brightness_perturbation(noise: NoiseTemperature, antenna: AntennaModel) -> float:
    """
    Erro equivalente de T_b atribuído à atmosfera quando T_a sobe noise.value.
    Inversão da relação linear T_a(T_b) com T_p fixo.
    """
    if antenna.radiation_efficiency == 0.0:
        raise ParameterError("eficiência de radiação zero: perturbação indefinida")
    return noise.value / antenna.radiation_efficiency


def leakage_chain(leakage: float, link: LinkBudget, channel: ChannelSpec,
                  antenna: AntennaModel) -> Tuple[float, NoiseTemperature, float]:
    """Vazamento (dBW) -> (potência recebida W, ruído, delta T_b K)"""
    p_rx = received_power(leakage, link)
    noise = induced_noise_temperature(p_rx, channel)
    return p_rx, noise, brightness_perturbation(noise, antenna)


def noise_temperature_curve(levels: Sequence[float], link: Optional[LinkBudget] = None,
                            channel: ChannelSpec = VICTIM_CHANNEL,
                            antenna: Optional[AntennaModel] = None) -> pd.DataFrame:
    """Curva temperatura de ruído x vazamento"""
    link = link or LinkBudget()
    antenna = antenna or AntennaModel.from_loss_factor(1.0)
    rows = []
    for level in levels:
        p_rx, noise, delta = leakage_chain(float(level), link, channel, antenna)
        rows.append({
            "leakage_dBW": float(level),
            "received_W": p_rx,
            "noise_K": noise.value,
            "delta_tb_K": delta,
        })
    logger.debug("curva de ruído com %d níveis (perda %.3f dB)", len(rows), link.effective_pathloss())
    return pd.DataFrame(rows, columns=["leakage_dBW", "received_W", "noise_K", "delta_tb_K"])
