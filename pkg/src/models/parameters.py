"""
ParameterSet: conjunto inmutable y ordenado de parámetros con nombre.

Los meta-parámetros Φ, los parámetros adaptados θ, los momentos de Adam y los
gradientes se representan con esta misma estructura. Los arreglos se guardan en
float64 y marcados como solo lectura, de modo que compartir un ParameterSet entre
hilos no permite modificaciones accidentales.
"""
from collections.abc import Mapping
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from src.autodiff.tensor import Tensor
from src.errors import ShapeError


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


class ParameterSet(Mapping):
    """
    Mapa ordenado nombre canónico -> arreglo float64 (ej: "hsm.block0.Wq").

    El orden de iteración es el de inserción y es parte del contrato: las
    reducciones (meta-update, checksums, checkpoints) lo recorren siempre igual.

    Examples:
        >>> phi = ParameterSet({"w": [1.0, 2.0]})
        >>> phi.map(lambda a: a * 2)["w"]
        array([2., 4.])
    """

    def __init__(self, arrays: Optional[Iterable] = None):
        items = arrays.items() if isinstance(arrays, Mapping) else (arrays or [])
        self._arrays: Dict[str, np.ndarray] = {}
        for name, value in items:
            if isinstance(value, Tensor):
                value = value.data
            self._arrays[str(name)] = _frozen(value)

    # Mapping
    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def __repr__(self) -> str:
        return f"ParameterSet({len(self)} tensores, {self.size} valores)"

    @property
    def size(self) -> int:
        return int(sum(a.size for a in self._arrays.values()))

    def names(self) -> List[str]:
        return list(self._arrays)

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: a.shape for name, a in self._arrays.items()}

    def clone(self) -> "ParameterSet":
        """Copia profunda (los arreglos no se comparten)."""
        return ParameterSet(self._arrays)

    def as_tensors(self, requires_grad: bool = True) -> Dict[str, Tensor]:
        """Hojas del grafo, una por parámetro, en el mismo orden."""
        return {name: Tensor(a, requires_grad=requires_grad) for name, a in self._arrays.items()}

    def check_compatible(self, other: "ParameterSet") -> None:
        """
        Verifica que `other` tenga los mismos nombres, en el mismo orden, y formas.

        Raises:
            ShapeError: Ante la primera diferencia encontrada.
        """
        if list(other.keys()) != self.names():
            missing = set(self.names()) ^ set(other.keys())
            raise ShapeError(f"conjuntos de parámetros con nombres distintos: {sorted(missing)[:5]}")
        for name, a in self._arrays.items():
            if other[name].shape != a.shape:
                raise ShapeError(f"parámetro '{name}': forma {other[name].shape}, se esperaba {a.shape}")

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "ParameterSet":
        return ParameterSet((name, fn(a)) for name, a in self._arrays.items())

    def zip_map(self, other: "ParameterSet", fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "ParameterSet":
        self.check_compatible(other)
        return ParameterSet((name, fn(a, other[name])) for name, a in self._arrays.items())

    def zeros_like(self) -> "ParameterSet":
        return self.map(np.zeros_like)

    def equals(self, other: "ParameterSet") -> bool:
        """Igualdad bit a bit (nombres, orden, formas y valores)."""
        if list(other.keys()) != self.names():
            return False
        return all(
            a.shape == other[name].shape and a.tobytes() == np.asarray(other[name], dtype=np.float64).tobytes()
            for name, a in self._arrays.items()
        )

    def flatten(self) -> np.ndarray:
        """Todos los valores concatenados en orden canónico."""
        if not self._arrays:
            return np.zeros(0)
        return np.concatenate([a.reshape(-1) for a in self._arrays.values()])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self._arrays.values())
