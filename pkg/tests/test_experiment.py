"""Testes de ponta a ponta do runner de cenários."""
import numpy as np
import pytest
from scipy.stats import spearmanr

from services.aggregations import CSV_COLUMNS
from services.errors import NonFiniteCostError, ScenarioError
from services.experiment import ScenarioRunner, run_scenario
from services.leakage_link import (
    N258_CHANNEL,
    VICTIM_CHANNEL,
    AntennaModel,
    EmissionMask,
    LinkBudget,
    TransmitterField,
    aci_leakage_fraction,
    aggregate_leakage_power,
    leakage_chain,
)
from services.transformations import report_csv
from tests.conftest import small_config

DIFFERENCE_COLUMNS = ["precip_diff_max_mm", "precip_diff_rms_mm", "t2m_diff_max_C", "t2m_diff_rms_C"]


class TestNullExperiment:
    def test_negligible_leakage_has_zero_differences(self):
        report = run_scenario(small_config(leakage_levels=[-300.0]))
        for col in DIFFERENCE_COLUMNS + ["lead_rms_divergence_C"]:
            assert (report.rows[col] == 0.0).all(), col

    def test_identical_config_identical_bytes(self):
        config = small_config(leakage_levels=[-300.0, -20.0])
        assert report_csv(run_scenario(config)) == report_csv(run_scenario(config))


class TestScenarioReport:
    def test_baseline_first_and_exactly_zero(self, small_report):
        baseline = small_report.baseline
        assert np.isnan(baseline["leakage_dBW"])
        for col in DIFFERENCE_COLUMNS + ["noise_K", "delta_tb_K"]:
            assert baseline[col] == 0.0

    def test_rows_follow_config_order(self, small_report):
        assert list(small_report.levels["leakage_dBW"]) == small_report.config.leakage_levels
        assert len(small_report.rows) == len(small_report.config.leakage_levels) + 1

    def test_delta_tb_strictly_increasing(self, small_report):
        delta = small_report.rows["delta_tb_K"].to_numpy()
        assert np.all(np.diff(delta) > 0)

    def test_delta_tb_at_minus_20(self, small_report):
        row = small_report.levels.set_index("leakage_dBW").loc[-20.0]
        assert row["delta_tb_K"] == pytest.approx(0.26826, rel=1e-5)
        assert row["noise_K"] == pytest.approx(0.26826, rel=1e-5)

    def test_delta_tb_divided_by_efficiency(self):
        config = small_config(leakage_levels=[-20.0], ensemble_size=1,
                              antenna={"loss_factor": 1.25})
        row = run_scenario(config).levels.iloc[0]
        assert row["delta_tb_K"] == pytest.approx(0.26826 / 0.8, rel=1e-5)

    def test_member_records_and_metadata(self, small_report):
        members = small_report.members
        assert len(members) == 2 * (len(small_report.config.leakage_levels) + 1)
        assert set(members["member"]) == {0, 1}
        assert small_report.metadata["config_hash"] == small_report.config_hash
        assert "seeds" in small_report.metadata["defaults_applied"]
        assert set(CSV_COLUMNS) <= set(small_report.rows.columns)

    def test_analysis_diagnostics(self, small_report):
        assert np.isfinite(small_report.rows["analysis_rmse"]).all()
        assert (small_report.rows["analysis_cost"] > 0).all()
        assert small_report.rows["converged"].dtype == bool


class TestLeakageInterpretation:
    def test_per_device_goes_through_field(self):
        config = small_config(leakage_levels=[-30.0], ensemble_size=1, leakage_interpretation="per_device",
                              field={"density_class": "rural"})
        runner = ScenarioRunner(config)
        fraction = aci_leakage_fraction(EmissionMask(), N258_CHANNEL, VICTIM_CHANNEL)
        total = aggregate_leakage_power(TransmitterField.preset("rural", per_device_eirp=-30.0), fraction)
        _, noise, delta = leakage_chain(total, LinkBudget(), VICTIM_CHANNEL, AntennaModel.from_loss_factor(1.0))
        assert runner.perturbation(-30.0) == pytest.approx((noise.value, delta))

    def test_field_leakage_in_metadata(self, small_report):
        fraction = aci_leakage_fraction(EmissionMask(), N258_CHANNEL, VICTIM_CHANNEL)
        expected = aggregate_leakage_power(TransmitterField.preset("metropolitan"), fraction)
        assert small_report.metadata["field_leakage_dBW"] == pytest.approx(expected)


class TestConcurrency:
    def test_thread_pool_matches_sequential(self):
        sequential = run_scenario(small_config(leakage_levels=[-25.0, -15.0], ensemble_size=3))
        pooled = run_scenario(small_config(leakage_levels=[-25.0, -15.0], ensemble_size=3, max_workers=3))
        assert report_csv(sequential) == report_csv(pooled)
        assert sequential.members.equals(pooled.members)


class TestErrors:
    def test_module_error_annotated_with_level_and_member(self, monkeypatch):
        original = ScenarioRunner.analyze_and_forecast

        def failing(self, background, member, delta_tb):
            if delta_tb > 0:
                raise NonFiniteCostError(None, 3)
            return original(self, background, member, delta_tb)

        monkeypatch.setattr(ScenarioRunner, "analyze_and_forecast", failing)
        with pytest.raises(ScenarioError) as exc:
            run_scenario(small_config(leakage_levels=[-20.0], ensemble_size=1))
        assert exc.value.leakage_level == -20.0
        assert exc.value.member == 0
        assert isinstance(exc.value.cause, NonFiniteCostError)


class TestDirectionalSensitivity:
    def test_divergence_grows_with_leakage(self):
        """Varredura padrão, 20 membros, divergência RMS no lead de 1.0"""
        config = small_config(
            leakage_levels=[-55.0, -45.0, -35.0, -30.0, -25.0, -20.0, -15.0],
            spinup_length=10.0,
            forecast_length=1.0,
            lead_time=1.0,
            ensemble_size=20,
        )
        levels = run_scenario(config).levels
        divergence = levels["lead_rms_divergence_C"].to_numpy()
        rho, _ = spearmanr(levels["leakage_dBW"], divergence)
        assert rho >= 0.9
        assert divergence[-1] > divergence[0]
