"""
Entrenamiento conjunto (sin meta-aprendizaje): Adam sobre todas las ventanas de
las tareas de origen juntas. Es el régimen de las variantes "Base Learner" y
"KDPINN" del estudio de ablación.
"""
import math
import time
from typing import Optional, Sequence

import numpy as np

from src.config.run_config import RunConfig
from src.data.records import MetaTask, SampleBatch
from src.data.tasks import split_validation_tasks, to_task_batches
from src.errors import NonFiniteError, NonFiniteLossError, TrainingError
from src.models.networks import init_parameters
from src.models.parameters import ParameterSet
from src.state import INITIAL_BEST_LOSS, MIN_VALIDATION_TASKS, MetaTrainResult, TrainingLogRecord
from src.training.losses import PinnObjective
from src.training.meta import sample_minibatch
from src.training.optimizer import AdamState, adam_step
from src.utils.logging_setup import get_logger
from src.utils.seeding import make_rng

logger = get_logger(__name__)


def joint_train(
    tasks: Sequence[MetaTask],
    config: RunConfig,
    phi: Optional[ParameterSet] = None,
    objective=None,
    label_scale: Optional[float] = None,
    verbose: bool = False,
) -> MetaTrainResult:
    """
    Entrena un único modelo sobre la unión de las tareas de entrenamiento.

    Usa la misma separación de tareas de validación, la misma inicialización y
    el mismo protocolo de mejor modelo que meta_train. Una época son
    ⌈#ventanas / inner_batch_size⌉ pasos de Adam (tasa meta.inner_lr). La
    validación es la pérdida de consulta media de las tareas reservadas, sin
    adaptación.

    Args:
        tasks: Meta-tareas de origen.
        config: Configuración de la corrida.
        phi: Parámetros iniciales (opcional).
        objective: Objetivo de entrenamiento; por defecto PinnObjective(config).
        label_scale: Divisor de las etiquetas; por defecto data.rul_cap.
        verbose: Mensajes de progreso.

    Returns:
        MetaTrainResult

    Raises:
        TrainingError: Sin tareas de entrenamiento.
        NonFiniteLossError: Pérdida o parámetros no finitos.
    """
    meta = config.meta
    train, val = split_validation_tasks(tasks, meta.validation_fraction, config.seed, MIN_VALIDATION_TASKS)
    if not train:
        raise TrainingError("no hay tareas de entrenamiento")
    scale = label_scale if label_scale is not None else config.data.rul_cap
    if phi is None:
        phi = init_parameters(config.model, make_rng(config.seed, "init"))
    if objective is None:
        objective = PinnObjective(config.model, config.loss)

    pooled = SampleBatch.from_windows([w for task in train for w in task.support + task.query], scale)
    val_tasks = to_task_batches(val, scale)
    per_epoch = math.ceil(len(pooled) / meta.inner_batch_size)
    total = per_epoch * meta.epochs
    if meta.max_iterations is not None:
        total = min(total, meta.max_iterations)
    interval = meta.validation_interval or per_epoch

    def validate(params: ParameterSet) -> Optional[float]:
        if not val_tasks:
            return None
        value = float(np.mean([objective.loss(params, task.query) for task in val_tasks]))
        if not np.isfinite(value):
            raise NonFiniteLossError(f"pérdida de validación no finita ({value})")
        return value

    started = time.perf_counter()
    first = validate(phi)
    log = [TrainingLogRecord(iteration=0, train_loss=None, val_loss=first, seconds=0.0)]
    best_phi, best_loss, best_iteration = phi, first if first is not None else INITIAL_BEST_LOSS, 0
    state = AdamState.fresh(phi, lr=meta.inner_lr, beta1=meta.beta1, beta2=meta.beta2, eps=meta.adam_eps)

    for iteration in range(1, total + 1):
        rng = make_rng(config.seed, "joint", iteration)
        batch = sample_minibatch(pooled, meta.inner_batch_size, rng)
        try:
            loss, grads = objective(phi, batch, rng)
        except NonFiniteError as exc:
            raise NonFiniteLossError(f"paso {iteration}: {exc}") from exc
        if not np.isfinite(loss):
            raise NonFiniteLossError(f"paso {iteration}: pérdida no finita ({loss})")
        phi, state = adam_step(state, phi, grads)

        val_loss = validate(phi) if iteration % interval == 0 or iteration == total else None
        log.append(
            TrainingLogRecord(
                iteration=iteration, train_loss=float(loss), val_loss=val_loss, seconds=time.perf_counter() - started
            )
        )
        if val_loss is not None and val_loss < best_loss:
            best_phi, best_loss, best_iteration = phi, val_loss, iteration
        if not val_tasks:
            best_phi, best_iteration = phi, iteration
        if verbose and val_loss is not None:
            logger.info(f"[JointTrain] paso {iteration}/{total} train={loss:.6f} val={val_loss:.6f}")

    return MetaTrainResult(
        params=best_phi,
        final_params=phi,
        log=log,
        best_iteration=best_iteration,
        best_val_loss=None if math.isinf(best_loss) else best_loss,
    )
