"""
Motor mínimo de diferenciación automática en modo reverso sobre numpy (float64).

Cada operación registra sus padres y una función de retropropagación escrita con
las mismas operaciones de Tensor. Así, cuando se pide create_graph=True, el propio
cálculo del gradiente queda registrado y se puede volver a derivar (grafo sobre
grafo): es lo que necesitan ∂û/∂t, ∇_h û y la diagonal de la Hessiana de entrada.

El grafo es implícito (cada tensor apunta a sus padres), acíclico por
construcción, y el orden topológico se obtiene en cada pasada hacia atrás.
Un grafo pertenece a un solo hilo; el modo de gradiente es local al hilo.
"""
import threading
from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import (
    CapabilityError,
    GraphConsumedError,
    NonFiniteError,
    NotScalarError,
    ShapeError,
)

MAX_GRAPH_DEPTH = 2
"""Niveles de grafo soportados: 0 = forward, 1 = gradiente, 2 = gradiente del gradiente"""

_local = threading.local()

BackwardFn = Callable[["Tensor"], Tuple[Optional["Tensor"], ...]]
ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]


def is_grad_enabled() -> bool:
    """Indica si las operaciones del hilo actual se registran en el grafo."""
    return getattr(_local, "enabled", True)


def _current_level() -> int:
    return getattr(_local, "level", 0)


@contextmanager
def no_grad() -> Iterator[None]:
    """
    Desactiva el registro de operaciones dentro del bloque (evaluación/inferencia).

    Examples:
        >>> with no_grad():
        ...     y = (x * 2).sum()   # y no tiene padres aunque x requiera gradiente
    """
    previous = is_grad_enabled()
    _local.enabled = False
    try:
        yield
    finally:
        _local.enabled = previous


@contextmanager
def _backward_context(create_graph: bool, level: int) -> Iterator[None]:
    previous = (is_grad_enabled(), _current_level())
    _local.enabled = create_graph
    _local.level = level
    try:
        yield
    finally:
        _local.enabled, _local.level = previous


class Tensor:
    """
    Arreglo denso float64 que participa en un grafo diferenciable.

    Attributes:
        data: Valores en orden row-major (np.ndarray float64, siempre finitos).
        requires_grad: Si es True el tensor es hoja diferenciable o resultado
                       registrado de una operación.
        grad: Gradiente acumulado por backward() (Tensor de la misma forma) o None.
        depth: Nivel de anidamiento del grafo en que se creó el tensor.
    """

    __array_priority__ = 100.0

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError("se intentó crear un tensor con valores no finitos")
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[Tensor] = None
        self._parents: Tuple[Tensor, ...] = ()
        self._backward_fn: Optional[BackwardFn] = None
        self._op = "leaf"
        self._freed = False
        self.depth = 0

    # ------------------------------------------------------------------
    # Propiedades
    # ------------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # ------------------------------------------------------------------
    # Aritmética
    # ------------------------------------------------------------------

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return add(other, neg(self))

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def __rmatmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(other, self)

    def __getitem__(self, index) -> "Tensor":
        return getitem(self, index)

    # ------------------------------------------------------------------
    # Reducciones, forma y funciones elementales
    # ------------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else tuple(axis)
            count = int(np.prod([self.shape[a] for a in axes]))
        return reduce_sum(self, axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def swap_last(self) -> "Tensor":
        """Intercambia los dos últimos ejes (transpuesta por lotes)."""
        axes = list(range(self.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
        return transpose(self, tuple(axes))

    def broadcast_to(self, shape: Tuple[int, ...]) -> "Tensor":
        return broadcast_to(self, shape)

    def tanh(self) -> "Tensor":
        return tanh(self)

    def relu(self) -> "Tensor":
        return relu(self)

    def exp(self) -> "Tensor":
        return exp(self)

    def sqrt(self) -> "Tensor":
        return sqrt(self)

    # ------------------------------------------------------------------
    # Retropropagación
    # ------------------------------------------------------------------

    def backward(self, retain_graph: bool = False) -> None:
        """
        Acumula en .grad de cada hoja diferenciable el gradiente de este escalar.

        Los gradientes se suman a lo que ya tuviera .grad (acumulación aditiva).

        Raises:
            NotScalarError: Si el tensor no tiene forma [].
            GraphConsumedError: Si el grafo ya fue liberado por un backward previo.
        """
        leaves = [n for n in _topological_order(self) if n.is_leaf and n.requires_grad]
        grads = grad(self, leaves, retain_graph=retain_graph)
        for leaf, g in zip(leaves, grads):
            leaf.grad = Tensor(g.data) if leaf.grad is None else Tensor(leaf.grad.data + g.data)


# =========================================================================
# Construcción de nodos
# =========================================================================

def as_tensor(value: ArrayLike) -> Tensor:
    """Convierte constantes (escalares, listas, arreglos) en Tensor sin gradiente."""
    return value if isinstance(value, Tensor) else Tensor(value)


def _checked(compute: Callable[[], np.ndarray], op: str) -> np.ndarray:
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return compute()
    except ValueError as exc:
        raise ShapeError(f"operación '{op}': {exc}") from exc


def _result(data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn, op: str) -> Tensor:
    data = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"la operación '{op}' produjo valores no finitos")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._freed = False
    out._op = op
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward
        out.depth = max([p.depth for p in parents] + [_current_level()])
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward_fn = None
        out.depth = 0
    return out


def _unbroadcast(g: Tensor, shape: Tuple[int, ...]) -> Tensor:
    """Suma g sobre los ejes que se expandieron por broadcasting hasta volver a `shape`."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = reduce_sum(g, axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = reduce_sum(g, axis=axes, keepdims=True)
    return g


# =========================================================================
# Operaciones primitivas
# =========================================================================

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = _checked(lambda: a.data + b.data, "add")

    def backward(g: Tensor):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(g, b.shape) if b.requires_grad else None,
        )

    return _result(data, (a, b), backward, "add")


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (neg(g),), "neg")


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = _checked(lambda: a.data * b.data, "mul")

    def backward(g: Tensor):
        return (
            _unbroadcast(g * b, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a, b.shape) if b.requires_grad else None,
        )

    return _result(data, (a, b), backward, "mul")


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = _checked(lambda: a.data / b.data, "div")
    out: Optional[Tensor] = None

    def backward(g: Tensor):
        return (
            _unbroadcast(g / b, a.shape) if a.requires_grad else None,
            _unbroadcast(neg(g * out) / b, b.shape) if b.requires_grad else None,
        )

    out = _result(data, (a, b), backward, "div")
    return out


def power(a: ArrayLike, exponent: float) -> Tensor:
    a = as_tensor(a)
    exponent = float(exponent)
    data = _checked(lambda: a.data ** exponent, "pow")

    def backward(g: Tensor):
        if exponent == 1.0:
            return (g,)
        return (g * (power(a, exponent - 1.0) * exponent),)

    return _result(data, (a,), backward, "pow")


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul requiere operandos de al menos 2 ejes (recibido {a.shape} @ {b.shape})")
    data = _checked(lambda: np.matmul(a.data, b.data), "matmul")

    def backward(g: Tensor):
        return (
            _unbroadcast(matmul(g, b.swap_last()), a.shape) if a.requires_grad else None,
            _unbroadcast(matmul(a.swap_last(), g), b.shape) if b.requires_grad else None,
        )

    return _result(data, (a, b), backward, "matmul")


def reduce_sum(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = _checked(lambda: np.sum(a.data, axis=axis, keepdims=keepdims), "sum")
    if axis is None:
        kept_shape = (1,) * a.ndim
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(ax % a.ndim for ax in axes)
        kept_shape = tuple(1 if i in axes else n for i, n in enumerate(a.shape))

    def backward(g: Tensor):
        expanded = g if keepdims else reshape(g, kept_shape)
        return (broadcast_to(expanded, a.shape),)

    return _result(data, (a,), backward, "sum")


def broadcast_to(a: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    data = _checked(lambda: np.broadcast_to(a.data, shape), "broadcast_to")
    return _result(data, (a,), lambda g: (_unbroadcast(g, a.shape),), "broadcast_to")


def reshape(a: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    data = _checked(lambda: np.reshape(a.data, shape), "reshape")
    return _result(data, (a,), lambda g: (reshape(g, a.shape),), "reshape")


def transpose(a: ArrayLike, axes: Optional[Tuple[int, ...]] = None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    data = _checked(lambda: np.transpose(a.data, axes), "transpose")
    inverse = tuple(int(i) for i in np.argsort(axes))
    return _result(data, (a,), lambda g: (transpose(g, inverse),), "transpose")


def getitem(a: ArrayLike, index) -> Tensor:
    a = as_tensor(a)
    data = _checked(lambda: a.data[index], "getitem")
    return _result(np.array(data), (a,), lambda g: (_scatter(g, index, a.shape),), "getitem")


def _scatter(g: Tensor, index, shape: Tuple[int, ...]) -> Tensor:
    """Coloca g en las posiciones `index` de un tensor de ceros (adjunta de getitem)."""
    data = np.zeros(shape)
    np.add.at(data, index, g.data)
    return _result(data, (g,), lambda gg: (getitem(gg, index),), "scatter")


def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat requiere al menos un tensor")
    data = _checked(lambda: np.concatenate([t.data for t in tensors], axis=axis), "concat")
    ndim = tensors[0].ndim
    ax = axis % ndim
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def backward(g: Tensor):
        grads = []
        for t, start, stop in zip(tensors, bounds[:-1], bounds[1:]):
            if not t.requires_grad:
                grads.append(None)
                continue
            index = (slice(None),) * ax + (slice(int(start), int(stop)),)
            grads.append(getitem(g, index))
        return tuple(grads)

    return _result(data, tuple(tensors), backward, "concat")


def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out: Optional[Tensor] = None

    def backward(g: Tensor):
        return (g * (1.0 - out * out),)

    out = _result(np.tanh(a.data), (a,), backward, "tanh")
    return out


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    mask = (a.data > 0).astype(np.float64)
    return _result(a.data * mask, (a,), lambda g: (g * Tensor(mask),), "relu")


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out: Optional[Tensor] = None

    def backward(g: Tensor):
        return (g * out,)

    out = _result(_checked(lambda: np.exp(a.data), "exp"), (a,), backward, "exp")
    return out


def sqrt(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out: Optional[Tensor] = None

    def backward(g: Tensor):
        return (g * 0.5 / out,)

    out = _result(_checked(lambda: np.sqrt(a.data), "sqrt"), (a,), backward, "sqrt")
    return out


# =========================================================================
# Gradientes
# =========================================================================

def _topological_order(root: Tensor) -> List[Tensor]:
    """Orden topológico (padres antes que hijos) de los nodos alcanzables desde root."""
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def grad(
    output: Tensor,
    inputs: Sequence[Tensor],
    grad_output: Optional[ArrayLike] = None,
    create_graph: bool = False,
    retain_graph: Optional[bool] = None,
) -> List[Tensor]:
    """
    Calcula d(output)/d(input) para cada tensor de `inputs` en modo reverso.

    Los inputs pueden ser hojas o nodos intermedios del grafo (ej: el estado
    oculto h producido por el HSM). Un input del que la salida no depende recibe
    un gradiente de ceros, no un error.

    Args:
        output: Tensor de forma [] (o cualquier forma si se da grad_output).
        inputs: Tensores respecto de los que se deriva.
        grad_output: Semilla del producto vector-Jacobiano; por defecto 1.
        create_graph: Si es True las operaciones del cálculo del gradiente se
                      registran, de modo que el resultado es diferenciable.
        retain_graph: Si es False el grafo recorrido queda marcado como consumido.
                      Por defecto igual a create_graph.

    Returns:
        List[Tensor]: Un gradiente por input, con la forma del input.

    Raises:
        NotScalarError: Salida no escalar sin grad_output.
        CapabilityError: Se pidió construir un grafo por encima de MAX_GRAPH_DEPTH.
        GraphConsumedError: El grafo ya fue liberado por una pasada anterior.

    Examples:
        >>> x, y = Tensor(2.0, requires_grad=True), Tensor(3.0, requires_grad=True)
        >>> gx, gy = grad(x * y, [x, y])
        >>> gx.item(), gy.item()
        (3.0, 2.0)
    """
    inputs = list(inputs)
    if retain_graph is None:
        retain_graph = create_graph

    if grad_output is None:
        if output.ndim != 0:
            raise NotScalarError(f"se esperaba una salida escalar, forma recibida {output.shape}")
        seed = Tensor(np.ones(()))
    else:
        seed = as_tensor(grad_output)
        if seed.shape != output.shape:
            raise ShapeError(f"grad_output {seed.shape} no coincide con la salida {output.shape}")

    zeros = [Tensor(np.zeros(t.shape)) for t in inputs]
    if not output.requires_grad:
        return zeros

    if create_graph and output.depth + 1 > MAX_GRAPH_DEPTH:
        raise CapabilityError(
            f"el motor soporta {MAX_GRAPH_DEPTH} niveles de derivación; "
            f"la salida ya está en el nivel {output.depth}"
        )

    order = _topological_order(output)
    target_ids = {id(t) for t in inputs}
    needed = set()
    for node in order:
        if id(node) in target_ids or any(id(p) in needed for p in node._parents):
            needed.add(id(node))
    if id(output) not in needed:
        return zeros

    for node in order:
        if node._freed and id(node) in needed:
            raise GraphConsumedError(
                "el grafo ya fue consumido por un backward anterior; use retain_graph=True"
            )

    grads = {id(output): seed}
    with _backward_context(create_graph, output.depth + 1):
        for node in reversed(order):
            if id(node) not in needed or not node._parents:
                continue
            g = grads.get(id(node))
            if g is None:
                continue
            for parent, pg in zip(node._parents, node._backward_fn(g)):
                if pg is None or id(parent) not in needed:
                    continue
                previous = grads.get(id(parent))
                grads[id(parent)] = pg if previous is None else previous + pg

    if not retain_graph:
        for node in order:
            if node._parents and id(node) in needed:
                node._freed = True

    return [grads.get(id(t), z) for t, z in zip(inputs, zeros)]
