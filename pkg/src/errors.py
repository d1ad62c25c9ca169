"""
Jerarquía de excepciones del sistema de predicción de vida útil remanente (RUL).

Todas las excepciones propias derivan de RulMetaPinnError para que la CLI pueda
capturarlas con un único except y reducirlas a una línea de diagnóstico.
"""
from typing import List, Optional


class RulMetaPinnError(Exception):
    """Raíz de todas las excepciones del paquete."""


# =========================================================================
# Motor de diferenciación automática
# =========================================================================

class AutodiffError(RulMetaPinnError):
    """Error genérico del motor de diferenciación automática."""


class ShapeError(AutodiffError, ValueError):
    """Las formas de los operandos no cumplen la regla de la operación."""


class NonFiniteError(AutodiffError, FloatingPointError):
    """Una operación produjo NaN o Inf."""


class NotScalarError(AutodiffError, ValueError):
    """Se pidió un gradiente de una salida que no es escalar."""


class GraphConsumedError(AutodiffError, RuntimeError):
    """El grafo ya fue liberado por un backward previo sin retain_graph."""


class CapabilityError(AutodiffError, NotImplementedError):
    """Se pidió un nivel de anidamiento de derivadas no soportado."""


class UnknownOpError(AutodiffError, KeyError):
    """El tipo de operación solicitado no existe en la tabla de despacho."""


class OpArgumentError(AutodiffError, ValueError):
    """Argumento fuera de dominio para una operación (ej. tasa de dropout fuera de [0, 1))."""


# =========================================================================
# Configuración
# =========================================================================

class ConfigError(RulMetaPinnError, ValueError):
    """
    Configuración inválida.

    Attributes:
        errors: Lista de mensajes "ruta.al.campo: motivo", uno por problema.
    """

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "configuración inválida")


# =========================================================================
# Datos
# =========================================================================

class DataFormatError(RulMetaPinnError, ValueError):
    """Archivo de entrada mal formado (se informa la línea cuando se conoce)."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f", línea {line}"
            location += ": "
        super().__init__(f"{location}{message}")


class PreprocessingError(RulMetaPinnError, ValueError):
    """Parámetros o entradas inválidas en el preprocesamiento."""


# =========================================================================
# Entrenamiento
# =========================================================================

class TrainingError(RulMetaPinnError):
    """Error genérico de entrenamiento."""


class EmptyTaskError(TrainingError, ValueError):
    """La tarea o el lote no contiene muestras."""


class NonFiniteLossError(TrainingError, FloatingPointError):
    """La pérdida dejó de ser finita durante el entrenamiento."""


class MetaUpdateError(TrainingError, ValueError):
    """Parámetros adaptados incompatibles con Φ o lote de tareas vacío."""


# =========================================================================
# Evaluación y persistencia
# =========================================================================

class MetricError(RulMetaPinnError, ValueError):
    """Entradas inválidas para una métrica."""


class ReportError(RulMetaPinnError, ValueError):
    """No se pudo emitir o leer un reporte."""


class CheckpointError(RulMetaPinnError, ValueError):
    """Checkpoint corrupto, truncado o incompatible con la configuración."""
