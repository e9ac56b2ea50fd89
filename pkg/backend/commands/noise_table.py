"""
Comando noise-table: curva temperatura de ruído x vazamento
"""

import sys

import numpy as np

from services.config_loader import get_default_config, load_config
from services.leakage_link import noise_temperature_curve
from services.transformations import noise_table_csv

# -55 ... -15 dBW, passo de 5 dB
DEFAULT_TABLE_LEVELS = np.arange(-55.0, -14.0, 5.0)


def register(subparsers, parents=()):
    parser = subparsers.add_parser("noise-table", parents=list(parents), help="emite a curva de ruído induzido em CSV")
    parser.add_argument("--config", default=None, help="cenário com enlace/antena (padrão: valores nominais)")
    parser.add_argument("--out", default=None, help="arquivo CSV de saída (padrão: stdout)")
    parser.set_defaults(handler=handle)


def handle(args) -> int:
    config = load_config(args.config) if args.config else get_default_config()
    curve = noise_temperature_curve(
        [float(v) for v in DEFAULT_TABLE_LEVELS],
        link=config.link.to_domain(),
        channel=config.mask.victim(),
        antenna=config.antenna.to_domain(),
    )
    text = noise_table_csv(curve)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0
