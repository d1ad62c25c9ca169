"""
Sonda de la expansión de Taylor del desplazamiento interno de primer orden.

Con SGD y k pasos, el desplazamiento d = θ⁽ᵏ⁾ − θ⁽⁰⁾ de una tarea cumple

    d = −α Σ_i ḡ_i + α² Σ_i Σ_{j<i} H̄_i ḡ_j + O(α³)

donde ḡ_i y H̄_i son gradiente y Hessiana de la pérdida del paso i evaluados en
θ⁽⁰⁾. Para pérdidas cuadráticas y k = 2 el resto es exactamente cero; con un
término cuártico el resto escala como α³. Solo se usa para verificación.
"""
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np


@dataclass(frozen=True)
class StepLoss:
    """
    Pérdida de un mini-lote: ½ θᵀAθ + bᵀθ + (c/4) Σ θ_i⁴.

    Attributes:
        A: Matriz simétrica (n, n).
        b: Vector (n,).
        quartic: Coeficiente c del término cuártico (0 = cuadrática pura).
    """

    A: np.ndarray
    b: np.ndarray
    quartic: float = 0.0

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        return self.A @ theta + self.b + self.quartic * theta**3

    def hessian(self, theta: np.ndarray) -> np.ndarray:
        return self.A + np.diag(3.0 * self.quartic * theta**2)


@dataclass
class ProbeResult:
    """Residuos medios por α y pendiente ajustada de log(residuo) vs log(α)."""

    alphas: np.ndarray
    residuals: np.ndarray
    slope: float


def random_task_family(
    rng: np.random.Generator,
    n_tasks: int,
    dim: int,
    steps: int = 2,
    quartic: float = 0.0,
    shared_quadratic: bool = False,
) -> List[List[StepLoss]]:
    """
    Familia de tareas; cada tarea es la secuencia de pérdidas de sus k mini-lotes.

    Args:
        rng: Generador.
        n_tasks: Número de tareas.
        dim: Dimensión de θ.
        steps: k (mini-lotes por tarea).
        quartic: Coeficiente cuártico común.
        shared_quadratic: Si es True todos los pasos de una tarea usan la misma pérdida.

    Returns:
        List[List[StepLoss]]
    """
    family = []
    for _ in range(n_tasks):
        losses = []
        for i in range(steps):
            if shared_quadratic and losses:
                losses.append(losses[0])
                continue
            M = rng.normal(size=(dim, dim)) / np.sqrt(dim)
            A = M @ M.T + 0.5 * np.eye(dim)
            losses.append(StepLoss(A=A, b=rng.normal(size=dim), quartic=quartic))
        family.append(losses)
    return family


def sgd_displacement(losses: Sequence[StepLoss], theta0: np.ndarray, alpha: float) -> np.ndarray:
    """θ⁽ᵏ⁾ − θ⁽⁰⁾ tras un paso de SGD por cada pérdida de la secuencia."""
    theta = np.array(theta0, dtype=np.float64)
    for loss in losses:
        theta = theta - alpha * loss.gradient(theta)
    return theta - theta0


def taylor_expansion(losses: Sequence[StepLoss], theta0: np.ndarray, alpha: float) -> np.ndarray:
    """−α Σ_i ḡ_i + α² Σ_i Σ_{j<i} H̄_i ḡ_j evaluado en θ⁽⁰⁾."""
    grads = [loss.gradient(theta0) for loss in losses]
    first = -alpha * np.sum(grads, axis=0)
    second = np.zeros_like(theta0, dtype=np.float64)
    for i, loss in enumerate(losses):
        if i == 0:
            continue
        second = second + loss.hessian(theta0) @ np.sum(grads[:i], axis=0)
    return first + alpha**2 * second


def reptile_direction_terms(k: int, alpha: float, avg_grad: np.ndarray, avg_grad_inner: np.ndarray) -> np.ndarray:
    """
    Desplazamiento esperado −kα·AvgGrad + k(k−1)/2·α²·AvgGradInner.

    AvgGrad es el gradiente medio (descenso de entrenamiento conjunto) y
    AvgGradInner = H̄ ḡ el término de alineación entre mini-lotes de una tarea.
    """
    avg_grad = np.asarray(avg_grad, dtype=np.float64)
    avg_grad_inner = np.asarray(avg_grad_inner, dtype=np.float64)
    return -k * alpha * avg_grad + 0.5 * k * (k - 1) * alpha**2 * avg_grad_inner


def reptile_taylor_probe(
    family: Sequence[Sequence[StepLoss]],
    theta0: np.ndarray,
    alphas: Sequence[float],
) -> ProbeResult:
    """
    Mide ‖d_p − expansión‖ promediado sobre las tareas para cada α y ajusta la
    pendiente de log(residuo) frente a log(α).

    Args:
        family: Tareas (secuencias de pérdidas de mini-lote; k = longitud).
        theta0: Punto inicial común θ⁽⁰⁾ = Φ.
        alphas: Grilla de tasas de aprendizaje (geométrica).

    Returns:
        ProbeResult: La pendiente es ~3 cuando el resto es O(α³).
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    theta0 = np.asarray(theta0, dtype=np.float64)
    residuals = np.array(
        [
            np.mean(
                [np.linalg.norm(sgd_displacement(task, theta0, a) - taylor_expansion(task, theta0, a)) for task in family]
            )
            for a in alphas
        ]
    )
    positive = residuals > 0
    if positive.sum() >= 2:
        slope = float(np.polyfit(np.log(alphas[positive]), np.log(residuals[positive]), 1)[0])
    else:
        slope = float("nan")
    return ProbeResult(alphas=alphas, residuals=residuals, slope=slope)
