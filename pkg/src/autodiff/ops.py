"""
Operaciones compuestas que usan las redes (afín, softmax por filas, layer norm,
dropout, MSE) y la tabla de despacho forward_op.

Todas se construyen con las primitivas de tensor.py, por lo que sus gradientes
(y los gradientes de sus gradientes) salen del mismo motor.
"""
from typing import Callable, Dict, Optional

import numpy as np

from src.autodiff.tensor import (
    ArrayLike,
    Tensor,
    as_tensor,
    concat,
    exp,
    matmul,
    relu,
    tanh,
)
from src.errors import OpArgumentError, ShapeError, UnknownOpError

LAYER_NORM_EPS = 1e-5
"""Estabilizador ε_ln sumado a la varianza en layer normalization"""


def linear(x: ArrayLike, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    Capa afín x @ W + b con W de forma (entrada, salida).

    Args:
        x: Tensor (..., entrada).
        weight: Tensor (entrada, salida).
        bias: Tensor (salida,) opcional.

    Returns:
        Tensor: (..., salida).
    """
    x = as_tensor(x)
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"linear: entrada con {x.shape[-1]} columnas para pesos {weight.shape}")
    out = matmul(x, weight) if x.ndim >= 2 else matmul(x.reshape(1, -1), weight).reshape(weight.shape[1])
    return out if bias is None else out + bias


def softmax(x: ArrayLike, axis: int = -1) -> Tensor:
    """
    Softmax a lo largo de `axis` (por filas con el valor por defecto).

    Se resta el máximo (constante, sin gradiente) antes de exponenciar;
    el resultado es matemáticamente el mismo.

    Examples:
        >>> softmax(Tensor([[1.0, 1.0, 1.0]])).data
        array([[0.33333333, 0.33333333, 0.33333333]])
    """
    x = as_tensor(x)
    shift = Tensor(np.max(x.data, axis=axis, keepdims=True))
    e = exp(x - shift)
    return e / e.sum(axis=axis, keepdims=True)


def layer_norm(
    x: ArrayLike,
    gamma: Optional[Tensor] = None,
    beta: Optional[Tensor] = None,
    eps: float = LAYER_NORM_EPS,
) -> Tensor:
    """
    Normaliza el último eje: (x - μ) / √(σ² + ε), luego escala y desplaza.

    Args:
        x: Tensor (..., d).
        gamma: Escala (d,) opcional.
        beta: Desplazamiento (d,) opcional.
        eps: Estabilizador de la varianza.

    Returns:
        Tensor: Misma forma que x. Un vector constante da ceros (antes de beta).
    """
    x = as_tensor(x)
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    out = centered / (var + eps).sqrt()
    if gamma is not None:
        out = out * gamma
    if beta is not None:
        out = out + beta
    return out


def dropout(x: ArrayLike, rate: float, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """
    Dropout invertido: en entrenamiento apaga cada elemento con probabilidad
    `rate` y escala los restantes por 1/(1-rate); en evaluación es la identidad.
    """
    if not 0.0 <= rate < 1.0:
        raise OpArgumentError(f"dropout: la tasa debe estar en [0, 1) (recibido {rate})")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise OpArgumentError("dropout en modo entrenamiento requiere un generador aleatorio")
    keep = (rng.random(x.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return x * Tensor(keep)


def mse(prediction: ArrayLike, target: ArrayLike) -> Tensor:
    """Error cuadrático medio entre dos tensores de igual forma."""
    prediction, target = as_tensor(prediction), as_tensor(target)
    if prediction.shape != target.shape:
        raise ShapeError(f"mse: formas distintas {prediction.shape} y {target.shape}")
    diff = prediction - target
    return (diff * diff).mean()


OPS: Dict[str, Callable[..., Tensor]] = {
    "add": lambda a, b: as_tensor(a) + b,
    "sub": lambda a, b: as_tensor(a) - b,
    "mul": lambda a, b: as_tensor(a) * b,
    "div": lambda a, b: as_tensor(a) / b,
    "matmul": matmul,
    "linear": linear,
    "tanh": tanh,
    "relu": relu,
    "exp": exp,
    "softmax": softmax,
    "layer_norm": layer_norm,
    "concat": lambda *tensors, axis=-1: concat(tensors, axis=axis),
    "sum": lambda a, axis=None: as_tensor(a).sum(axis=axis),
    "mean": lambda a, axis=None: as_tensor(a).mean(axis=axis),
    "mse": mse,
    "dropout": dropout,
}
"""Tabla de despacho de forward_op: nombre de operación -> función"""


def forward_op(op_kind: str, *inputs, **kwargs) -> Tensor:
    """
    Ejecuta una operación por nombre y registra el nodo en el grafo.

    Args:
        op_kind: Clave de OPS (ej: "tanh", "softmax", "layer_norm").
        *inputs: Tensores de entrada.
        **kwargs: Parámetros de la operación (ej: axis, eps).

    Returns:
        Tensor: Resultado de la operación.

    Raises:
        UnknownOpError: Si op_kind no existe.
        ShapeError: Si las formas no cumplen la regla de la operación.
        NonFiniteError: Si la salida contiene NaN o Inf.

    Examples:
        >>> forward_op("tanh", Tensor(0.0)).item()
        0.0
    """
    try:
        fn = OPS[op_kind]
    except KeyError:
        raise UnknownOpError(f"operación desconocida: {op_kind!r}") from None
    return fn(*inputs, **kwargs)
