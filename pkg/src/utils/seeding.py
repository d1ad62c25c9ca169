"""
Generadores aleatorios deterministas.

Se usa Philox (generador basado en contador) alimentado por una SeedSequence con
la ruta de claves del consumidor, de modo que cada tarea/iteración tiene su propio
flujo independiente del orden de ejecución entre hilos.
"""
import zlib
from typing import Union

import numpy as np

Key = Union[int, str]


def _as_entropy(key: Key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if key < 0:
        raise ValueError(f"las claves de semilla deben ser >= 0 (recibido {key})")
    return int(key)


def make_rng(seed: int, *keys: Key) -> np.random.Generator:
    """
    Crea un generador Philox para la ruta (seed, *keys).

    Args:
        seed: Semilla global de la corrida.
        *keys: Ruta de claves (enteros >= 0 o cadenas), ej: ("meta", 3, 1).

    Returns:
        np.random.Generator: Mismo flujo de números para la misma ruta, siempre.

    Examples:
        >>> a = make_rng(7, "meta", 0).random()
        >>> b = make_rng(7, "meta", 0).random()
        >>> a == b
        True
    """
    entropy = [_as_entropy(seed)] + [_as_entropy(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

