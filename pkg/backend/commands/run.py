"""
Comandos run e sweep
"""

import sys
from datetime import datetime, timezone

from services.config_loader import DEFAULT_SWEEP, load_config, with_levels, with_seed_override
from services.experiment import run_scenario
from services.transformations import emit_csv, emit_metadata, emit_summary, metadata_path


def register(subparsers, parents=()):
    run = subparsers.add_parser("run", parents=list(parents), help="executa um cenário (níveis do arquivo)")
    run.add_argument("config", help="arquivo JSON do cenário")
    _common(run)
    run.set_defaults(handler=handle_run)

    sweep = subparsers.add_parser("sweep", parents=list(parents), help="varredura de níveis de vazamento")
    sweep.add_argument("config", help="arquivo JSON do cenário")
    sweep.add_argument("--levels", type=float, nargs="+", default=None,
                       help=f"níveis em dBW (padrão: {' '.join(f'{v:g}' for v in DEFAULT_SWEEP)})")
    _common(sweep)
    sweep.set_defaults(handler=handle_sweep)


def _common(parser):
    parser.add_argument("--out", default=None, help="arquivo CSV de saída (padrão: stdout)")
    parser.add_argument("--seed-override", type=int, default=None, help="substitui as sementes do cenário")
    parser.add_argument("--timestamp", action="store_true",
                        help="inclui o horário de geração na linha de comentário do CSV")


def _execute(config, args) -> int:
    if args.seed_override is not None:
        config = with_seed_override(config, args.seed_override)
    report = run_scenario(config)
    generated_at = datetime.now(timezone.utc) if args.timestamp else None
    if args.out:
        emit_csv(report, args.out, generated_at=generated_at)
        emit_metadata(report, metadata_path(args.out))
        emit_summary(report, sys.stderr)
    else:
        emit_summary(report, sys.stdout)
    return 0


def handle_run(args) -> int:
    """Retorna 0 após escrever o relatório"""
    return _execute(load_config(args.config), args)


def handle_sweep(args) -> int:
    config = load_config(args.config)
    return _execute(with_levels(config, args.levels or DEFAULT_SWEEP), args)
