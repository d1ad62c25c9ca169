"""
Construcción del grafo de meta-entrenamiento con LangGraph.
"""
import math
import time
from typing import Optional, Sequence

from langgraph.graph import END, StateGraph

from src.config.run_config import RunConfig
from src.data.records import MetaTask
from src.data.tasks import split_validation_tasks, to_task_batches
from src.errors import NonFiniteError, NonFiniteLossError, TrainingError
from src.models.networks import init_parameters
from src.models.parameters import ParameterSet
from src.nodes.decision_nodes import decision_entrenamiento
from src.nodes.meta_nodes import (
    actualizador_meta,
    adaptador_interno,
    muestreador_tareas,
    validador_inicial,
    validador_meta,
)
from src.state import (
    INITIAL_BEST_LOSS,
    MIN_VALIDATION_TASKS,
    NODES_PER_ITERATION,
    RECURSION_MARGIN,
    MetaTrainingContext,
    MetaTrainingState,
    MetaTrainResult,
)
from src.training.losses import PinnObjective
from src.utils.seeding import make_rng


def create_meta_training_graph():
    """
    Crea y configura el grafo del ciclo de meta-entrenamiento.

    El flujo es:
    - Validación inicial de Φ (fila 0 del registro)
    - Ciclo por meta-iteración: muestrear B tareas → adaptar cada una (Adam, k pasos)
      → actualizar Φ con el promedio de desplazamientos → registrar/validar
    - Decisión: otra iteración o fin

    Returns:
        CompiledGraph: Grafo compilado listo para invoke() con un MetaTrainingState.

    Examples:
        >>> app = create_meta_training_graph()
        >>> final_state = app.invoke(initial_state, config={"recursion_limit": 100})
    """
    workflow = StateGraph(MetaTrainingState)

    # =========================================================================
    # AGREGAR NODOS
    # =========================================================================

    workflow.add_node("validador_inicial", validador_inicial)
    workflow.add_node("muestreador_tareas", muestreador_tareas)
    workflow.add_node("adaptador_interno", adaptador_interno)
    workflow.add_node("actualizador_meta", actualizador_meta)
    workflow.add_node("validador_meta", validador_meta)

    # =========================================================================
    # FLUJO
    # =========================================================================

    workflow.set_entry_point("validador_inicial")
    workflow.add_edge("validador_inicial", "muestreador_tareas")
    workflow.add_edge("muestreador_tareas", "adaptador_interno")
    workflow.add_edge("adaptador_interno", "actualizador_meta")
    workflow.add_edge("actualizador_meta", "validador_meta")

    # Decision_Entrenamiento (CONDICIONAL)
    workflow.add_conditional_edges(
        "validador_meta",
        decision_entrenamiento,
        {
            "siguiente_iteracion": "muestreador_tareas",  # CICLO: otra meta-iteración
            "finalizar": END,
        },
    )

    return workflow.compile()


def initialize_state(
    tasks: Sequence[MetaTask],
    config: RunConfig,
    phi: Optional[ParameterSet] = None,
    objective=None,
    label_scale: Optional[float] = None,
    verbose: bool = False,
) -> MetaTrainingState:
    """
    Inicializa el estado del grafo para comenzar el meta-entrenamiento.

    Args:
        tasks: Meta-tareas de origen (se separa la fracción de validación).
        config: Configuración de la corrida.
        phi: Φ inicial; por defecto se inicializa con la semilla de la corrida.
        objective: Objetivo del bucle interno; por defecto PinnObjective(config).
        label_scale: Divisor de las etiquetas RUL; por defecto data.rul_cap.
        verbose: Mensajes de progreso por iteración.

    Returns:
        MetaTrainingState

    Raises:
        TrainingError: Si quedan menos tareas de entrenamiento que B.
    """
    meta = config.meta
    train, val = split_validation_tasks(tasks, meta.validation_fraction, config.seed, MIN_VALIDATION_TASKS)
    if len(train) < meta.meta_batch_size:
        raise TrainingError(
            f"se necesitan al menos {meta.meta_batch_size} tareas de entrenamiento (hay {len(train)})"
        )
    scale = label_scale if label_scale is not None else config.data.rul_cap
    if phi is None:
        phi = init_parameters(config.model, make_rng(config.seed, "init"))
    if objective is None:
        objective = PinnObjective(config.model, config.loss)

    context = MetaTrainingContext(
        config=config,
        train_tasks=to_task_batches(train, scale),
        val_tasks=to_task_batches(val, scale),
        objective=objective,
        verbose=verbose,
        started_at=time.perf_counter(),
    )
    per_epoch = math.ceil(len(train) / meta.meta_batch_size)
    total = per_epoch * meta.epochs
    if meta.max_iterations is not None:
        total = min(total, meta.max_iterations)

    return {
        "context": context,
        "phi": phi,
        "best_phi": phi,
        "best_val_loss": INITIAL_BEST_LOSS,
        "best_iteration": 0,
        "iteration": 0,
        "total_iterations": total,
        "iterations_per_epoch": per_epoch,
        "batch_tasks": [],
        "adapted": [],
        "task_losses": [],
        "log": [],
    }


def meta_train(
    tasks: Sequence[MetaTask],
    config: RunConfig,
    phi: Optional[ParameterSet] = None,
    objective=None,
    label_scale: Optional[float] = None,
    verbose: bool = False,
) -> MetaTrainResult:
    """
    Meta-entrenamiento de primer orden completo.

    Repite {muestrear B tareas → adaptar cada una en paralelo → actualizar Φ}
    durante las épocas configuradas (una época = ⌈#tareas/B⌉ meta-iteraciones),
    valida sobre el 10% de tareas reservado y conserva el mejor Φ.

    Args:
        tasks: Meta-tareas de origen.
        config: Configuración de la corrida.
        phi: Φ inicial (opcional).
        objective: Objetivo del bucle interno (opcional).
        label_scale: Divisor de las etiquetas (opcional).
        verbose: Si es True imprime el encabezado y el resumen.

    Returns:
        MetaTrainResult

    Raises:
        TrainingError: Tareas insuficientes.
        NonFiniteLossError: Pérdida o parámetros no finitos (se aborta con diagnóstico).
    """
    state = initialize_state(tasks, config, phi, objective, label_scale, verbose)
    if verbose:
        print("=" * 80)
        print("META-ENTRENAMIENTO")
        print("=" * 80)
        print(f"\nTareas de entrenamiento: {len(state['context'].train_tasks)}")
        print(f"Tareas de validación: {len(state['context'].val_tasks)}")
        print(f"Meta-iteraciones: {state['total_iterations']}\n")

    app = create_meta_training_graph()
    limit = NODES_PER_ITERATION * state["total_iterations"] + RECURSION_MARGIN
    try:
        final_state = app.invoke(state, config={"recursion_limit": limit})
    except NonFiniteError as exc:
        raise NonFiniteLossError(f"meta-entrenamiento abortado: {exc}") from exc

    best_loss = final_state["best_val_loss"]
    result = MetaTrainResult(
        params=final_state["best_phi"],
        final_params=final_state["phi"],
        log=final_state["log"],
        best_iteration=final_state["best_iteration"],
        best_val_loss=None if math.isinf(best_loss) else best_loss,
    )
    if verbose:
        print("\n" + "=" * 80)
        print(f"META-ENTRENAMIENTO COMPLETADO (mejor iteración: {result.best_iteration})")
        print("=" * 80)
    return result
