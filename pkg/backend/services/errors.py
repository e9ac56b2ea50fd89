"""
Exceções do Simulador
Hierarquia única usada por todos os serviços e pela CLI (códigos de saída).
"""

from typing import Any, Optional


class SimulationError(Exception):
    """Erro base de qualquer etapa do pipeline"""


class ParameterError(SimulationError, ValueError):
    """Valor fora do domínio de um tipo ou operação (erro de validação)"""


class UndefinedMaskRegionError(ParameterError):
    """A máscara de emissão não cobre parte do canal vítima"""

    def __init__(self, span_low: float, span_high: float):
        self.span_low = span_low
        self.span_high = span_high
        super().__init__(
            f"máscara indefinida entre {span_low:.6g} Hz e {span_high:.6g} Hz"
        )


class ConfigError(ParameterError):
    """Erro de leitura ou validação do arquivo de cenário"""

    def __init__(self, message: str, field: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.field = field
        self.line = line
        self.column = column
        where = []
        if field:
            where.append(f"campo '{field}'")
        if line is not None:
            where.append(f"linha {line}, coluna {column}")
        prefix = f"[{'; '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class ModelBlowUpError(SimulationError):
    """Estado não finito após um passo do modelo (dt grande demais)"""

    def __init__(self, step_index: int, message: str = ""):
        self.step_index = step_index
        super().__init__(
            message or f"estado não finito no passo {step_index}; reduza dt"
        )


class NonFiniteCostError(SimulationError):
    """Custo não finito durante a busca linear"""

    def __init__(self, last_control: Any, iteration: int):
        self.last_control = last_control
        self.iteration = iteration
        super().__init__(f"custo não finito na iteração {iteration}")


class ScenarioError(SimulationError):
    """Erro de módulo anotado com nível de vazamento e membro do ensemble"""

    def __init__(self, cause: Exception, leakage_level: Optional[float], member: int):
        self.cause = cause
        self.leakage_level = leakage_level
        self.member = member
        nivel = "baseline" if leakage_level is None else f"{leakage_level:g} dBW"
        super().__init__(f"nível {nivel}, membro {member}: {cause}")
