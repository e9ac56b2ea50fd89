"""
Transformações de Saída
Formatação do relatório e emissão de CSV, resumo legível e metadados JSON
"""

import io
import json
import logging
import math
from datetime import datetime
from pathlib import Path
from typing import Optional, TextIO

import numpy as np
import pandas as pd

from services.aggregations import CSV_COLUMNS, sanitize_for_json, summary_statistics

logger = logging.getLogger(__name__)

BASELINE_LABEL = "baseline"


def format_number(value) -> str:
    """Formata número com 9 algarismos significativos"""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return f"{float(value):.9g}"


def metadata_path(csv_path) -> Path:
    """<saida>.meta.json ao lado do CSV"""
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.name + ".meta.json")


def report_table(rows: pd.DataFrame) -> pd.DataFrame:
    """Linhas do relatório já formatadas como texto (colunas do CSV)"""
    table = rows[CSV_COLUMNS].copy().astype(object)
    for col in CSV_COLUMNS:
        table[col] = [format_number(v) for v in rows[col]]
    # baseline sem nível de vazamento
    table.loc[rows['leakage_dBW'].isna().to_numpy(), 'leakage_dBW'] = BASELINE_LABEL
    return table


def _comment_line(config_hash: Optional[str], generated_at: Optional[datetime]) -> str:
    parts = []
    if config_hash:
        parts.append(f"config_sha256={config_hash}")
    if generated_at is not None:
        parts.append(f"generated_at={generated_at.isoformat()}")
    return f"# {' '.join(parts)}\n" if parts else ""


def report_csv(report, generated_at: Optional[datetime] = None) -> str:
    buffer = io.StringIO()
    buffer.write(_comment_line(report.config_hash, generated_at))
    report_table(report.rows).to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def emit_csv(report, path, generated_at: Optional[datetime] = None) -> Path:
    """
    Escreve o relatório em CSV.

    Args:
        report: ScenarioReport
        path: arquivo de saída (diretório precisa existir)
        generated_at: horário de geração; só entra na linha de comentário

    Returns:
        caminho escrito
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(report_csv(report, generated_at))
    logger.info("CSV escrito em %s (%d linhas)", path, len(report.rows))
    return path


def emit_summary(report, stream: TextIO) -> None:
    """Tabela legível das mesmas linhas do CSV"""
    table = report_table(report.rows)
    stream.write(f"Cenário {report.config_hash[:12]} "
                 f"({report.config.ensemble_size} membro(s), {report.config.leakage_interpretation})\n")
    stream.write(table.to_string(index=False))
    stream.write("\n")


def emit_metadata(report, path) -> Path:
    """Sidecar JSON: configuração resolvida, defaults aplicados, hash e resumo"""
    payload = {
        "config_hash": report.config_hash,
        "config": report.config.model_dump(mode="json"),
        "metadata": report.metadata,
        "summary": summary_statistics(report.rows),
        "rows": report.rows.to_dict(orient="records"),
    }
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(sanitize_for_json(payload), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return path


def noise_table_csv(curve: pd.DataFrame) -> str:
    """Curva de ruído x vazamento em CSV (mesma formatação do relatório)"""
    table = curve.copy().astype(object)
    for col in curve.columns:
        table[col] = [format_number(v) if math.isfinite(v) else str(v) for v in curve[col]]
    return table.to_csv(index=False, lineterminator="\n")
