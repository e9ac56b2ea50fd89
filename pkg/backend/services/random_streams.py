"""
Fontes Aleatórias Reprodutíveis
Gerador portátil (PCG64 do numpy) + Box-Muller explícito, e derivação de sementes
por rótulo. Mesma semente => mesmos bytes em qualquer plataforma.
"""

import hashlib

import numpy as np


def derive_seed(base: int, *labels) -> int:
    """
    Deriva uma semente de 32 bits a partir da semente base e de rótulos.

    Algoritmo: SHA-256 sobre "base|rotulo1|rotulo2|..." (UTF-8); os 4 primeiros
    bytes, big-endian, formam a semente.
    """
    text = "|".join([str(int(base))] + [str(label) for label in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


class GaussianStream:
    """
    Fluxo gaussiano N(0, 1) sobre o fluxo uniforme do PCG64.

    Cada par (u1, u2) do fluxo uniforme vira um par normal por Box-Muller:
        z0 = sqrt(-2 ln(1 - u1)) cos(2 pi u2)
        z1 = sqrt(-2 ln(1 - u1)) sin(2 pi u2)
    (1 - u1) fica em (0, 1], então o log é sempre finito.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, size: int) -> np.ndarray:
        return self._generator.random(size)

    def normal(self, size: int) -> np.ndarray:
        if size <= 0:
            return np.zeros(0)
        n_pairs = (size + 1) // 2
        u = self._generator.random(2 * n_pairs)
        u1, u2 = u[0::2], u[1::2]
        radius = np.sqrt(-2.0 * np.log1p(-u1))
        angle = 2.0 * np.pi * u2
        z = np.empty(2 * n_pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return z[:size]
