"""
Estado compartido del grafo de meta-entrenamiento.
"""
from dataclasses import dataclass
from typing import Callable, List, Optional, TypedDict

import numpy as np

from src.config.run_config import RunConfig
from src.data.records import TaskBatches
from src.models.parameters import ParameterSet


class TrainingLogRecord(TypedDict):
    """
    Una fila del registro de entrenamiento.

    Attributes:
        iteration: Meta-iteraciones completadas (0 = antes de entrenar).
        train_loss: Pérdida media de los pasos internos de la iteración
                    (None en la fila inicial).
        val_loss: Pérdida de consulta post-adaptación sobre las tareas de
                  validación; None si en esa iteración no se validó.
        seconds: Tiempo de pared acumulado desde el inicio.
    """
    iteration: int
    train_loss: Optional[float]
    val_loss: Optional[float]
    seconds: float


@dataclass
class MetaTrainResult:
    """
    Resultado de meta_train (y de joint_train).

    Attributes:
        params: Mejor Φ según la pérdida de validación (Φ*).
        final_params: Φ al terminar la última iteración.
        log: Registro por iteración (iteración, pérdida de entrenamiento, de validación, segundos).
        best_iteration: Iteración de la que proviene params.
        best_val_loss: Pérdida de validación de params (None sin tareas de validación).
    """

    params: ParameterSet
    final_params: ParameterSet
    log: List[TrainingLogRecord]
    best_iteration: int
    best_val_loss: Optional[float]


@dataclass
class MetaTrainingContext:
    """
    Objetos fijos durante todo el entrenamiento (no cambian entre nodos).

    Attributes:
        config: Configuración completa de la corrida.
        train_tasks: Tareas de meta-entrenamiento.
        val_tasks: Tareas de validación (mejor Φ según su pérdida).
        objective: Objetivo del bucle interno (PinnObjective o equivalente).
        verbose: Si es True se registran mensajes de progreso por iteración.
    """

    config: RunConfig
    train_tasks: List[TaskBatches]
    val_tasks: List[TaskBatches]
    objective: Callable
    verbose: bool = False
    started_at: float = 0.0


class MetaTrainingState(TypedDict):
    """
    Estado global compartido entre los nodos del grafo de meta-entrenamiento.

    Cada nodo devuelve solo los campos que modifica; LangGraph los combina.

    Attributes:
        context: Objetos inmutables de la corrida (tareas, objetivo, config).

        phi: Meta-parámetros Φ actuales.
        best_phi: Φ con la menor pérdida de validación observada.
        best_val_loss: Esa pérdida (inf si todavía no hubo validación).
        best_iteration: Iteración en que se obtuvo best_phi.

        iteration: Meta-iteraciones completadas.
        total_iterations: Presupuesto total de meta-iteraciones.
        iterations_per_epoch: ⌈#tareas de entrenamiento / B⌉.

        batch_tasks: Índices de las tareas del meta-lote en curso.
        adapted: θ_p⁽ᵏ⁾ de cada tarea del meta-lote, en el mismo orden.
        task_losses: Pérdida de entrenamiento de cada tarea del meta-lote.

        log: Filas del registro de entrenamiento.
    """
    context: MetaTrainingContext

    phi: ParameterSet
    best_phi: ParameterSet
    best_val_loss: float
    best_iteration: int

    iteration: int
    total_iterations: int
    iterations_per_epoch: int

    batch_tasks: List[int]
    adapted: List[ParameterSet]
    task_losses: List[float]

    log: List[TrainingLogRecord]


# Constantes del workflow de meta-entrenamiento
# Valores por defecto del protocolo; la configuración de la corrida los puede pisar

MIN_VALIDATION_TASKS = 1
"""Mínimo de tareas de validación cuando validation_fraction > 0"""

NODES_PER_ITERATION = 4
"""Nodos que recorre una meta-iteración (muestreo, adaptación, actualización, validación)"""

RECURSION_MARGIN = 10
"""Pasos extra de recursión de LangGraph por encima de NODES_PER_ITERATION × iteraciones"""

INITIAL_BEST_LOSS = float(np.inf)
"""Pérdida de validación de referencia antes de la primera validación"""
