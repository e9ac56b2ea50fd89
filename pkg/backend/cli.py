"""
Simulador OSSE de Vazamento 5G - CLI
Vazamento 5G -> ruído no radiômetro de 23.8 GHz -> 3DVar/VarBC -> previsão de brinquedo

Uso: python backend/cli.py {run,sweep,noise-table,check} ...
Códigos de saída: 0 sucesso, 1 erro de validação, 2 erro de execução.
"""

import argparse
import logging
import os
import sys

# Imports relativos para funcionar quando executado da raiz
try:
    from commands import check, noise_table, run
    from services.errors import ParameterError, SimulationError
except ImportError:
    from backend.commands import check, noise_table, run
    from backend.services.errors import ParameterError, SimulationError

logger = logging.getLogger("osse")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="osse-5g",
        description="Impacto do vazamento 5G (n258) em radiâncias de 23.8 GHz e na previsão",
    )
    parser.add_argument("--verbose", action="store_true", help="log em nível DEBUG (traço do 3DVar)")
    # --verbose aceito antes ou depois do subcomando
    verbose = argparse.ArgumentParser(add_help=False)
    verbose.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in (run, noise_table, check):
        command.register(subparsers, parents=[verbose])
    return parser


def configure_logging(verbose: bool) -> None:
    level = "DEBUG" if verbose else os.getenv("OSSE_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    # sem stack trace para o usuário; a mensagem já diz onde falhou
    try:
        return args.handler(args)
    except ParameterError as e:
        logger.error("erro de validação: %s", e)
        return EXIT_VALIDATION
    except SimulationError as e:
        logger.error("erro de execução: %s", e)
        return EXIT_RUNTIME
    except OSError as e:
        logger.error("erro de E/S: %s", e)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
