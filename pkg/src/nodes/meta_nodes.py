"""
Nodos del ciclo de meta-entrenamiento: muestreo de tareas, adaptación interna,
actualización de Φ y validación.
"""
import time
from typing import List, Optional

import numpy as np

from src.errors import NonFiniteLossError
from src.models.parameters import ParameterSet
from src.state import MetaTrainingContext, MetaTrainingState, TaskBatches, TrainingLogRecord
from src.training.meta import adapt_many, inner_adapt, meta_update
from src.utils.logging_setup import get_logger
from src.utils.seeding import make_rng

logger = get_logger(__name__)


def _adapt(context: MetaTrainingContext, phi: ParameterSet, task: TaskBatches, rng, history=None) -> ParameterSet:
    meta = context.config.meta
    return inner_adapt(
        phi,
        task.support,
        context.objective,
        steps=meta.inner_steps,
        batch_size=meta.inner_batch_size,
        rng=rng,
        lr=meta.inner_lr,
        beta1=meta.beta1,
        beta2=meta.beta2,
        eps=meta.adam_eps,
        history=history,
    )


def validation_loss(context: MetaTrainingContext, phi: ParameterSet) -> Optional[float]:
    """
    Pérdida de consulta media tras adaptar Φ en cada tarea de validación.

    Cada tarea usa siempre el mismo generador, así que dos validaciones del
    mismo Φ dan exactamente el mismo valor.

    Returns:
        float o None si no hay tareas de validación.
    """
    if not context.val_tasks:
        return None
    seed = context.config.seed
    losses = []
    for index, task in enumerate(context.val_tasks):
        theta = _adapt(context, phi, task, make_rng(seed, "validation", index))
        losses.append(context.objective.loss(theta, task.query))
    value = float(np.mean(losses))
    if not np.isfinite(value):
        raise NonFiniteLossError(f"pérdida de validación no finita ({value})")
    return value


def _record(state: MetaTrainingState, train_loss: Optional[float], val_loss: Optional[float]) -> TrainingLogRecord:
    return {
        "iteration": state["iteration"],
        "train_loss": train_loss,
        "val_loss": val_loss,
        "seconds": time.perf_counter() - state["context"].started_at,
    }


def validador_inicial(state: MetaTrainingState) -> dict:
    """
    Nodo: Evalúa Φ inicial en validación y abre el registro (fila de la iteración 0).

    Campos que MODIFICA: best_phi, best_val_loss, best_iteration, log
    """
    context = state["context"]
    val = validation_loss(context, state["phi"])
    if context.verbose:
        logger.info(f"[MetaTrain] validación inicial: {val if val is not None else '-'}")
    update = {"log": state["log"] + [_record(state, None, val)]}
    if val is not None:
        update.update({"best_phi": state["phi"], "best_val_loss": val, "best_iteration": 0})
    return update


def muestreador_tareas(state: MetaTrainingState) -> dict:
    """
    Nodo: Elige las B tareas de la meta-iteración.

    Cada época recorre una permutación (sembrada por época) de las tareas de
    entrenamiento; el último meta-lote de la época se completa dando la vuelta
    al inicio de la misma permutación.

    Campos que LEE: iteration, iterations_per_epoch
    Campos que MODIFICA: batch_tasks
    """
    context = state["context"]
    n = len(context.train_tasks)
    B = context.config.meta.meta_batch_size
    epoch, position = divmod(state["iteration"], state["iterations_per_epoch"])
    order = make_rng(context.config.seed, "epoch", epoch).permutation(n)
    batch = [int(order[(position * B + slot) % n]) for slot in range(B)]
    return {"batch_tasks": batch}


def adaptador_interno(state: MetaTrainingState) -> dict:
    """
    Nodo: Ejecuta Adapt_k (Adam) desde Φ en cada tarea del meta-lote.

    Cada tarea tiene su generador (semilla, "meta", iteración, posición), por lo que
    ejecutar las adaptaciones en hilos no cambia ningún resultado.

    Campos que LEE: phi, batch_tasks, iteration
    Campos que MODIFICA: adapted, task_losses
    """
    context = state["context"]
    phi = state["phi"]
    seed = context.config.seed
    histories: List[List[float]] = [[] for _ in state["batch_tasks"]]

    def job(slot: int, task_index: int):
        task = context.train_tasks[task_index]
        rng = make_rng(seed, "meta", state["iteration"], slot)
        return lambda: _adapt(context, phi, task, rng, histories[slot])

    jobs = [job(slot, index) for slot, index in enumerate(state["batch_tasks"])]
    adapted = adapt_many(jobs, workers=context.config.meta.workers)

    losses = []
    for slot, index in enumerate(state["batch_tasks"]):
        if histories[slot]:
            losses.append(histories[slot][-1])
        else:
            losses.append(context.objective.loss(adapted[slot], context.train_tasks[index].support))
    return {"adapted": adapted, "task_losses": losses}


def actualizador_meta(state: MetaTrainingState) -> dict:
    """
    Nodo: Φ ← Φ + η · promedio(θ_p − Φ) y avanza el contador de iteraciones.

    Campos que LEE: phi, adapted
    Campos que MODIFICA: phi, iteration

    Raises:
        NonFiniteLossError: Si Φ deja de ser finito.
    """
    context = state["context"]
    phi = meta_update(state["phi"], state["adapted"], context.config.meta.outer_rate)
    if not phi.is_finite():
        raise NonFiniteLossError(f"Φ dejó de ser finito en la iteración {state['iteration'] + 1}")
    return {"phi": phi, "iteration": state["iteration"] + 1}


def _validation_due(state: MetaTrainingState) -> bool:
    interval = state["context"].config.meta.validation_interval or state["iterations_per_epoch"]
    return state["iteration"] % interval == 0 or state["iteration"] >= state["total_iterations"]


def validador_meta(state: MetaTrainingState) -> dict:
    """
    Nodo: Registra la iteración y, cuando corresponde, valida y guarda el mejor Φ.

    Se valida al final de cada época (o cada validation_interval iteraciones)
    y siempre en la última iteración. Solo una mejora estricta reemplaza best_phi.

    Campos que LEE: phi, iteration, task_losses, best_val_loss
    Campos que MODIFICA: log, best_phi, best_val_loss, best_iteration
    """
    context = state["context"]
    train_loss = float(np.mean(state["task_losses"]))
    if not np.isfinite(train_loss):
        raise NonFiniteLossError(f"pérdida de entrenamiento no finita en la iteración {state['iteration']}")

    val = validation_loss(context, state["phi"]) if _validation_due(state) else None
    update: dict = {"log": state["log"] + [_record(state, train_loss, val)]}

    if val is not None and val < state["best_val_loss"]:
        update.update({"best_phi": state["phi"], "best_val_loss": val, "best_iteration": state["iteration"]})
    if not context.val_tasks:
        update["best_phi"] = state["phi"]
        update["best_iteration"] = state["iteration"]

    if context.verbose:
        shown = f"{val:.6f}" if val is not None else "-"
        logger.info(
            f"[MetaTrain] iteración {state['iteration']}/{state['total_iterations']} "
            f"train={train_loss:.6f} val={shown}"
        )
    return update
