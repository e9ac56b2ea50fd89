"""
Agregações do Ensemble
Métricas de diferença contra o baseline e média sobre os membros
"""

from typing import Any, Dict

import numpy as np
import pandas as pd

# Colunas do relatório (as nove primeiras formam o CSV)
REPORT_COLUMNS = [
    'leakage_dBW', 'noise_K', 'delta_tb_K',
    'precip_diff_max_mm', 'precip_diff_rms_mm',
    't2m_diff_max_C', 't2m_diff_rms_C',
    'analysis_cost', 'converged',
    'lead_rms_divergence_C', 'analysis_rmse', 'members',
]
CSV_COLUMNS = REPORT_COLUMNS[:9]


def json_safe(val):
    """Converte valores não-JSON (nan, inf, numpy) para tipos nativos."""
    if val is None:
        return None
    if isinstance(val, (float, np.floating)):
        if np.isnan(val) or np.isinf(val):
            return None
        return float(val)
    if isinstance(val, (bool, np.bool_)):
        return bool(val)
    if isinstance(val, np.integer):
        return int(val)
    return val


def sanitize_for_json(obj):
    """Percorre dicts/listas aplicando json_safe"""
    if isinstance(obj, dict):
        return {k: sanitize_for_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize_for_json(v) for v in obj]
    return json_safe(obj)


def _max_rms(diff: np.ndarray):
    diff = np.asarray(diff, dtype=float)
    if diff.size == 0:
        return 0.0, 0.0
    return float(np.max(np.abs(diff))), float(np.sqrt(np.mean(diff ** 2)))


def forecast_differences(precipitation: np.ndarray, baseline_precipitation: np.ndarray,
                         two_meter_temperature: np.ndarray,
                         baseline_two_meter_temperature: np.ndarray) -> Dict[str, float]:
    """
    Máximo absoluto e RMS (sobre a grade) das diferenças contra o baseline.

    Returns:
        dict com precip_diff_max_mm, precip_diff_rms_mm, t2m_diff_max_C, t2m_diff_rms_C
    """
    precip_max, precip_rms = _max_rms(np.asarray(precipitation) - np.asarray(baseline_precipitation))
    # diferença em K == diferença em °C
    t2m_max, t2m_rms = _max_rms(np.asarray(two_meter_temperature) - np.asarray(baseline_two_meter_temperature))
    return {
        'precip_diff_max_mm': precip_max,
        'precip_diff_rms_mm': precip_rms,
        't2m_diff_max_C': t2m_max,
        't2m_diff_rms_C': t2m_rms,
    }


def ensemble_mean(records: pd.DataFrame) -> pd.DataFrame:
    """
    Uma linha por nível (baseline primeiro), com métricas médias sobre os membros.

    Args:
        records: um registro por (level_index, member); baseline com level_index -1

    Returns:
        DataFrame com REPORT_COLUMNS, na ordem dos níveis da configuração
    """
    grouped = records.groupby('level_index', sort=True).agg(
        leakage_dBW=('leakage_dBW', 'first'),
        # iguais em todos os membros
        noise_K=('noise_K', 'first'),
        delta_tb_K=('delta_tb_K', 'first'),
        precip_diff_max_mm=('precip_diff_max_mm', 'mean'),
        precip_diff_rms_mm=('precip_diff_rms_mm', 'mean'),
        t2m_diff_max_C=('t2m_diff_max_C', 'mean'),
        t2m_diff_rms_C=('t2m_diff_rms_C', 'mean'),
        analysis_cost=('analysis_cost', 'mean'),
        converged=('converged', 'all'),
        lead_rms_divergence_C=('lead_rms_divergence_C', 'mean'),
        analysis_rmse=('analysis_rmse', 'mean'),
        members=('member', 'count'),
    )
    return grouped.reset_index(drop=True)[REPORT_COLUMNS]


def summary_statistics(rows: pd.DataFrame) -> Dict[str, Any]:
    """Resumo dos níveis perturbados (para o sidecar de metadados)"""
    levels = rows.iloc[1:]
    if levels.empty:
        return {'levels': 0}
    worst = levels.loc[levels['t2m_diff_rms_C'].idxmax()]
    return sanitize_for_json({
        'levels': len(levels),
        'max_delta_tb_K': levels['delta_tb_K'].max(),
        'max_precip_diff_mm': levels['precip_diff_max_mm'].max(),
        'max_t2m_diff_C': levels['t2m_diff_max_C'].max(),
        'worst_level_dBW': worst['leakage_dBW'],
        'all_converged': bool(rows['converged'].all()),
    })
