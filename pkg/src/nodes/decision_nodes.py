"""
Nodos de decisión condicionales para el flujo del grafo.
"""
from typing import Literal

from src.state import MetaTrainingState
from src.utils.logging_setup import get_logger

logger = get_logger(__name__)


def decision_entrenamiento(state: MetaTrainingState) -> Literal[
    "siguiente_iteracion",
    "finalizar"
]:
    """
    Nodo de decisión: Determina si ejecutar otra meta-iteración o terminar.

    Lógica de decisión:

    1. Si iteration >= total_iterations (presupuesto de épocas agotado):
       → "finalizar" (END; el resultado es best_phi)

    2. En otro caso:
       → "siguiente_iteracion" (vuelve a muestreador_tareas)

    Campos del estado que LEE:
        - iteration: Meta-iteraciones completadas
        - total_iterations: Presupuesto total

    Returns:
        str: "siguiente_iteracion" o "finalizar".
    """
    if state["iteration"] >= state["total_iterations"]:
        logger.debug(f"[Decision] → finalizar ({state['iteration']} iteraciones)")
        return "finalizar"
    return "siguiente_iteracion"
