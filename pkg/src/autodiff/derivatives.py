"""
Derivadas respecto de entradas (no parámetros) que necesita el residuo físico:
∂û/∂t, ∇_h û y la diagonal de ∇²_h û.

Todas se calculan con create_graph=True para que la pérdida física pueda
derivarse después respecto de los parámetros de las tres redes.
"""
from typing import List, Optional, Sequence

from src.autodiff.tensor import Tensor, concat, grad


def input_gradients(scalar_output: Tensor, wrt: Sequence[Tensor]) -> List[Tensor]:
    """
    Gradientes diferenciables de una salida escalar respecto de varias entradas.

    Si la salida no depende de alguna entrada se devuelve un tensor de ceros
    para ella (no es un error).
    """
    return grad(scalar_output, list(wrt), create_graph=True, retain_graph=True)


def input_gradient(scalar_output: Tensor, wrt: Tensor) -> Tensor:
    """
    ∇_{wrt} de una salida escalar, como tensor diferenciable (grafo sobre grafo).

    Args:
        scalar_output: Tensor de forma [] (típicamente la suma de û sobre el lote,
                       ya que cada muestra solo depende de su propia fila).
        wrt: Entrada respecto de la que se deriva (t, h, ...).

    Returns:
        Tensor: Misma forma que wrt; ceros si la salida no depende de wrt.

    Raises:
        NotScalarError: Si scalar_output no es escalar.

    Examples:
        >>> t = Tensor([[0.3]], requires_grad=True)
        >>> input_gradient((t * 1.0).sum(), t).data
        array([[1.]])
    """
    return input_gradients(scalar_output, [wrt])[0]


def second_input_derivative(
    scalar_output: Tensor,
    wrt: Tensor,
    first: Optional[Tensor] = None,
) -> Tensor:
    """
    Diagonal de la Hessiana de entrada: ∂²(salida)/∂wrt_i² por coordenada del último eje.

    Se deriva cada columna del gradiente (sumada sobre el lote) respecto de wrt
    y se conserva solo la columna correspondiente. Requiere un nivel de
    anidamiento; pedir un tercer nivel lanza CapabilityError.

    Args:
        scalar_output: Tensor de forma [].
        wrt: Tensor (..., d).
        first: Gradiente ya calculado con input_gradient (se reutiliza si se da).

    Returns:
        Tensor: Misma forma que wrt.

    Raises:
        CapabilityError: Si el gradiente ya está en el nivel máximo de anidamiento.
    """
    if first is None:
        first = input_gradient(scalar_output, wrt)
    columns = []
    for i in range(wrt.shape[-1]):
        index = (slice(None),) * (wrt.ndim - 1)
        column = first[index + (i,)]
        (second,) = grad(column.sum(), [wrt], create_graph=True, retain_graph=True)
        columns.append(second[index + (slice(i, i + 1),)])
    return concat(columns, axis=-1)
