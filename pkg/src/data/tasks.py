"""
Armado de meta-tareas y selección de soportes K-shot.
"""
import math
from typing import Dict, List, Literal, Sequence, Tuple

import numpy as np

from src.data.records import MetaTask, SampleBatch, SampleWindow, TaskBatches
from src.errors import PreprocessingError
from src.utils.logging_setup import get_logger
from src.utils.seeding import make_rng

logger = get_logger(__name__)

MIN_TASK_SAMPLES = 2
"""Una tarea necesita al menos una muestra de soporte y una de consulta"""


def _split_task(
    task_id: str,
    windows: Sequence[SampleWindow],
    rng: np.random.Generator,
    support_fraction: float,
    unit_id: int,
    segment: Tuple[int, int],
) -> MetaTask:
    n = len(windows)
    n_support = min(n - 1, max(1, int(round(support_fraction * n))))
    order = rng.permutation(n)
    support_idx = np.sort(order[:n_support])
    query_idx = np.sort(order[n_support:])
    return MetaTask(
        task_id=task_id,
        support=[windows[i] for i in support_idx],
        query=[windows[i] for i in query_idx],
        unit_id=unit_id,
        segment=segment,
    )


def build_meta_tasks(
    unit_windows: Dict[int, List[SampleWindow]],
    profile: Literal["cmapss", "synthetic"],
    seed: int,
    support_fraction: float = 0.5,
    segment_length: int = 40,
) -> List[MetaTask]:
    """
    Construye las meta-tareas a partir de las ventanas de cada unidad.

    - Perfil C-MAPSS: una tarea por unidad; soporte/consulta por partición
      aleatoria (sembrada por unidad).
    - Perfil sintético/bombas: cada vida se corta en segmentos contiguos de
      `segment_length` ventanas; una tarea por segmento.

    Las tareas con menos de 2 muestras se descartan con una advertencia.

    Args:
        unit_windows: {unit_id: ventanas en orden cronológico}.
        profile: "cmapss" o "synthetic".
        seed: Semilla de la corrida.
        support_fraction: Proporción 𝒟^tr / tarea (0.5 por defecto).
        segment_length: Ventanas por segmento (solo perfil sintético).

    Returns:
        List[MetaTask]: Ordenadas por unidad y segmento.

    Examples:
        >>> tasks = build_meta_tasks({1: windows}, "cmapss", seed=0)
        >>> len(tasks[0].support) + len(tasks[0].query) == len(windows)
        True
    """
    if not 0.0 < support_fraction < 1.0:
        raise PreprocessingError(f"support_fraction debe estar en (0, 1), recibido {support_fraction}")
    tasks: List[MetaTask] = []
    for unit_id in sorted(unit_windows):
        windows = unit_windows[unit_id]
        if profile == "cmapss":
            pieces = [(f"unit{unit_id}", 0, len(windows))]
        else:
            pieces = [
                (f"unit{unit_id}-seg{k}", start, min(start + segment_length, len(windows)))
                for k, start in enumerate(range(0, len(windows), segment_length))
            ]
        for task_id, start, stop in pieces:
            chunk = windows[start:stop]
            if len(chunk) < MIN_TASK_SAMPLES:
                logger.warning(f"[Tareas] {task_id}: {len(chunk)} muestra(s), tarea descartada")
                continue
            rng = make_rng(seed, "task", unit_id, start)
            tasks.append(_split_task(task_id, chunk, rng, support_fraction, unit_id, (start, stop)))
    return tasks


def select_support(
    windows: Sequence[SampleWindow],
    shots: int,
    rng: np.random.Generator,
    stage_fraction: float = 1.0,
) -> Tuple[List[SampleWindow], List[SampleWindow]]:
    """
    Elige K ventanas de soporte; el resto de la unidad es la consulta.

    Con stage_fraction < 1 el soporte solo se toma del primer tramo cronológico
    de la vida (estudio de etapas de degradación).

    Args:
        windows: Ventanas de la unidad en orden cronológico.
        shots: K (0 = sin soporte).
        rng: Generador.
        stage_fraction: Fracción inicial de la vida de la que se toma el soporte.

    Returns:
        Tuple[List[SampleWindow], List[SampleWindow]]: (soporte, consulta).

    Raises:
        PreprocessingError: Si K supera las ventanas disponibles en el tramo o
                            no quedaría consulta.
    """
    if not 0.0 < stage_fraction <= 1.0:
        raise PreprocessingError(f"stage_fraction debe estar en (0, 1], recibido {stage_fraction}")
    n = len(windows)
    pool = max(1, int(math.ceil(stage_fraction * n)))
    if shots < 0 or shots > pool or shots >= n:
        raise PreprocessingError(f"no se pueden tomar {shots} shots de {pool} ventanas disponibles (unidad con {n})")
    chosen = set(int(i) for i in rng.choice(pool, size=shots, replace=False)) if shots else set()
    support = [w for i, w in enumerate(windows) if i in chosen]
    query = [w for i, w in enumerate(windows) if i not in chosen]
    return support, query


def split_validation_tasks(tasks: Sequence[MetaTask], fraction: float, seed: int, minimum: int = 1):
    """
    Separa (sembrado) una fracción de tareas para validación.

    Returns:
        Tuple[List[MetaTask], List[MetaTask]]: (entrenamiento, validación).
    """
    if fraction <= 0.0 or len(tasks) < 2:
        return list(tasks), []
    n_val = min(len(tasks) - 1, max(minimum, int(math.floor(fraction * len(tasks)))))
    order = make_rng(seed, "split").permutation(len(tasks))
    val_idx = set(int(i) for i in order[:n_val])
    train = [t for i, t in enumerate(tasks) if i not in val_idx]
    val = [t for i, t in enumerate(tasks) if i in val_idx]
    return train, val


def to_task_batches(tasks: Sequence[MetaTask], label_scale: float) -> List[TaskBatches]:
    """Convierte cada MetaTask en lotes de soporte y consulta."""
    return [
        TaskBatches(
            task_id=task.task_id,
            support=SampleBatch.from_windows(task.support, label_scale),
            query=SampleBatch.from_windows(task.query, label_scale),
        )
        for task in tasks
    ]
