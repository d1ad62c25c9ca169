"""
Bucle interno (Adapt_k con Adam), actualización externa de primer orden y
adaptación few-shot.

    θ⁽⁰⁾ = copia de Φ
    θ⁽ⁱ⁾ = adam_step(θ⁽ⁱ⁻¹⁾, ∇L(θ⁽ⁱ⁻¹⁾; mini-lote i))      i = 1..k
    Φ ← Φ + η · (1/B) · Σ_p (θ_p⁽ᵏ⁾ − Φ)
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from src.errors import EmptyTaskError, MetaUpdateError, NonFiniteError, NonFiniteLossError, ShapeError
from src.models.parameters import ParameterSet
from src.training.optimizer import AdamState, adam_step


class TaskData(Protocol):
    """Cualquier colección indexable por lotes (ej: SampleBatch)."""

    def __len__(self) -> int: ...

    def take(self, indices) -> "TaskData": ...


Objective = Callable[[ParameterSet, TaskData, Optional[np.random.Generator]], Tuple[float, ParameterSet]]


def sample_minibatch(data: TaskData, batch_size: int, rng: np.random.Generator) -> TaskData:
    """
    Mini-lote de la tarea: sin reemplazo si hay suficientes muestras, con
    reemplazo si la tarea es más chica que el lote (soportes K-shot).
    """
    n = len(data)
    if n >= batch_size:
        indices = rng.choice(n, size=batch_size, replace=False)
    else:
        indices = rng.integers(0, n, size=batch_size)
    return data.take(np.sort(indices))


def inner_adapt(
    phi: ParameterSet,
    data: TaskData,
    objective: Objective,
    steps: int,
    batch_size: int,
    rng: np.random.Generator,
    lr: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    history: Optional[List[float]] = None,
) -> ParameterSet:
    """
    Adapt_k: k pasos de Adam desde una copia de Φ sobre mini-lotes de la tarea.

    Φ nunca se modifica; cada llamada usa un AdamState nuevo.

    Args:
        phi: Meta-parámetros Φ.
        data: Split de entrenamiento de la tarea (𝒟^tr).
        objective: objective(θ, lote, rng) -> (pérdida, gradientes).
        steps: k (k = 0 devuelve una copia exacta de Φ).
        batch_size: Tamaño de los mini-lotes internos.
        rng: Generador de la tarea (muestreo de lotes y dropout).
        lr, beta1, beta2, eps: Hiperparámetros de Adam.
        history: Si se da, se le agrega la pérdida de cada paso.

    Returns:
        ParameterSet: θ⁽ᵏ⁾.

    Raises:
        EmptyTaskError: Si la tarea no tiene muestras.
        NonFiniteLossError: Si la pérdida deja de ser finita.
    """
    if len(data) == 0:
        raise EmptyTaskError("la tarea no tiene muestras de entrenamiento")
    theta = phi.clone()
    state = AdamState.fresh(theta, lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for step in range(steps):
        batch = sample_minibatch(data, batch_size, rng)
        try:
            loss, grads = objective(theta, batch, rng)
        except NonFiniteError as exc:
            raise NonFiniteLossError(f"paso interno {step + 1}: {exc}") from exc
        if not np.isfinite(loss):
            raise NonFiniteLossError(f"paso interno {step + 1}: pérdida no finita ({loss})")
        if history is not None:
            history.append(float(loss))
        theta, state = adam_step(state, theta, grads)
    return theta


def meta_update(phi_old: ParameterSet, adapted: Sequence[ParameterSet], outer_rate: float) -> ParameterSet:
    """
    Φ_nuevo = Φ_viejo + η · (1/B) · Σ_p (θ_p − Φ_viejo).

    Los desplazamientos se suman en el orden de `adapted`, de modo que el
    resultado no depende de cómo se ejecutaron las adaptaciones.

    Args:
        phi_old: Φ actual.
        adapted: Parámetros adaptados θ_p, uno por tarea del meta-lote.
        outer_rate: η.

    Returns:
        ParameterSet: Φ actualizado.

    Raises:
        MetaUpdateError: Si B = 0 o algún θ_p no tiene la estructura de Φ.

    Examples:
        >>> phi = ParameterSet({"w": [0.0]})
        >>> meta_update(phi, [ParameterSet({"w": [2.0]}), ParameterSet({"w": [4.0]})], 0.5)["w"]
        array([1.5])
    """
    if not adapted:
        raise MetaUpdateError("meta_update requiere al menos una tarea adaptada")
    total = phi_old.zeros_like()
    for p, theta in enumerate(adapted):
        try:
            phi_old.check_compatible(theta)
        except ShapeError as exc:
            raise MetaUpdateError(f"tarea {p}: {exc}") from None
        total = ParameterSet((name, total[name] + (theta[name] - phi_old[name])) for name in phi_old)
    scale = outer_rate / len(adapted)
    return phi_old.zip_map(total, lambda phi, d: phi + scale * d)


def few_shot_adapt(
    phi_star: ParameterSet,
    support: TaskData,
    objective: Objective,
    steps: int,
    batch_size: int,
    rng: np.random.Generator,
    lr: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ParameterSet:
    """
    Adapta Φ* con K muestras de soporte (K = len(support)) y k' pasos internos.

    K = 0 es el caso 0-shot: se devuelve Φ* sin tocar.

    Examples:
        >>> few_shot_adapt(phi, support.take([]), objective, 8, 64, rng) is phi
        True
    """
    if len(support) == 0:
        return phi_star
    return inner_adapt(phi_star, support, objective, steps, batch_size, rng, lr, beta1, beta2, eps)


def adapt_many(
    jobs: Sequence[Callable[[], ParameterSet]],
    workers: int = 1,
) -> List[ParameterSet]:
    """
    Ejecuta adaptaciones independientes (en hilos si workers > 1) y devuelve los
    resultados en el orden de `jobs`.
    """
    if workers <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]
