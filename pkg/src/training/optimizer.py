"""
Adam con corrección de sesgo, tal como se usa en el bucle interno.

La actualización es θ ← θ − α · m̂ / √(v̂ + ε), con ε dentro de la raíz.
El estado es inmutable: adam_step devuelve un estado nuevo.
"""
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from src.errors import ShapeError
from src.models.parameters import ParameterSet


@dataclass(frozen=True)
class AdamState:
    """
    Momentos de Adam por parámetro.

    Attributes:
        m: Primer momento (misma estructura que los parámetros).
        v: Segundo momento.
        step: Pasos ya aplicados (i).
        beta1, beta2, eps: Constantes del método.
        lr: Tasa de aprendizaje α.
    """

    m: ParameterSet
    v: ParameterSet
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr: float = 0.001

    @classmethod
    def fresh(
        cls,
        params: ParameterSet,
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> "AdamState":
        zeros = params.zeros_like()
        return cls(m=zeros, v=zeros, step=0, beta1=beta1, beta2=beta2, eps=eps, lr=lr)


def adam_step(state: AdamState, params: ParameterSet, grads: ParameterSet) -> Tuple[ParameterSet, AdamState]:
    """
    Aplica un paso de Adam.

    Args:
        state: Estado previo (momentos y contador).
        params: Parámetros actuales θ.
        grads: Gradientes alineados con params.

    Returns:
        Tuple[ParameterSet, AdamState]: (θ actualizado, estado nuevo).

    Raises:
        ShapeError: Si grads o los momentos no están alineados con params.

    Examples:
        >>> theta = ParameterSet({"w": [1.0]})
        >>> new, _ = adam_step(AdamState.fresh(theta), theta, ParameterSet({"w": [2.0]}))
        >>> round(float(new["w"][0]), 6)
        0.999
    """
    try:
        params.check_compatible(grads)
        params.check_compatible(state.m)
    except ShapeError as exc:
        raise ShapeError(f"adam_step: {exc}") from None

    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    m = state.m.zip_map(grads, lambda m_, g: b1 * m_ + (1.0 - b1) * g)
    v = state.v.zip_map(grads, lambda v_, g: b2 * v_ + (1.0 - b2) * g * g)
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step
    new_params = ParameterSet(
        (name, theta - state.lr * (m[name] / c1) / np.sqrt(v[name] / c2 + state.eps))
        for name, theta in params.items()
    )
    return new_params, replace(state, m=m, v=v, step=step)

