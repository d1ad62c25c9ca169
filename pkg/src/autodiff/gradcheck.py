"""
Oráculos de diferencias finitas centrales para verificar gradientes.
"""
from typing import Callable

import numpy as np

FD_STEP = 1e-5
"""Paso por defecto de las diferencias centrales (float64)"""


def central_difference(fn: Callable[[np.ndarray], float], x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """
    Gradiente numérico de una función escalar fn(x) por diferencias centrales.

    Args:
        fn: Función de un arreglo a un float.
        x: Punto de evaluación (no se modifica).
        step: Paso h; cada coordenada usa (f(x+h) - f(x-h)) / 2h.

    Returns:
        np.ndarray: Gradiente con la forma de x.
    """
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    flat = x.reshape(-1)
    grad_flat = out.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        plus = fn(x)
        flat[i] = original - step
        minus = fn(x)
        flat[i] = original
        grad_flat[i] = (plus - minus) / (2.0 * step)
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Error relativo en norma: ‖a - n‖ / max(‖a‖, ‖n‖, floor)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
    return float(np.linalg.norm(analytic - numeric) / scale)
