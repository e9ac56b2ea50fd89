import pytest

from services.config_loader import ScenarioConfig
from services.experiment import run_scenario


def small_config(**overrides) -> ScenarioConfig:
    """Cenário curto para os testes de ponta a ponta"""
    values = dict(
        leakage_levels=[-45.0, -35.0, -30.0, -25.0, -20.0, -15.0],
        spinup_length=1.0,
        forecast_length=0.5,
        lead_time=0.5,
        ensemble_size=2,
    )
    values.update(overrides)
    return ScenarioConfig(**values)


@pytest.fixture(scope="session")
def small_report():
    return run_scenario(small_config())
