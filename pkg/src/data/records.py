"""
Tipos de datos del pipeline: unidades crudas, ventanas, lotes y meta-tareas.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.errors import EmptyTaskError, ShapeError

CMAPSS_SENSOR_NAMES = [f"S{i}" for i in range(1, 22)]
"""Nombres de los 21 sensores C-MAPSS en el orden de las columnas"""


@dataclass
class UnitRecord:
    """
    Una unidad (motor o bomba) con su serie completa.

    Attributes:
        unit_id: Identificador de la unidad.
        cycles: Ciclos (u horas) 1, 2, ..., L.
        settings: Condiciones de operación (L, 3); vacío para perfiles sin condiciones.
        sensors: Lecturas (L, n_sensores).
        sensor_names: Nombre de cada columna de `sensors`.
        rul: RUL verdadera por ciclo (solo cuando se conoce; ej: flota sintética).
        rms: Energía de vibración por muestra (detección de paradas), opcional.
        idle: Marca de funcionamiento en vacío por muestra, opcional.
    """

    unit_id: int
    cycles: np.ndarray
    settings: np.ndarray
    sensors: np.ndarray
    sensor_names: List[str]
    rul: Optional[np.ndarray] = None
    rms: Optional[np.ndarray] = None
    idle: Optional[np.ndarray] = None

    @property
    def length(self) -> int:
        return int(len(self.cycles))

    def with_sensors(self, sensors: np.ndarray, sensor_names: Optional[List[str]] = None) -> "UnitRecord":
        """Copia con otras lecturas (mismos ciclos y condiciones)."""
        return UnitRecord(
            unit_id=self.unit_id,
            cycles=self.cycles,
            settings=self.settings,
            sensors=np.asarray(sensors, dtype=np.float64),
            sensor_names=list(sensor_names if sensor_names is not None else self.sensor_names),
            rul=self.rul,
            rms=self.rms,
            idle=self.idle,
        )


@dataclass(frozen=True)
class SampleWindow:
    """
    Una muestra: ventana (w × f), tiempo de operación normalizado t y etiqueta RUL u.

    Attributes:
        features: Matriz (pasos de tiempo × características).
        run_time: t = ciclo final / escala temporal.
        rul_label: RUL (ya con tope) en el ciclo final de la ventana.
        unit_id: Unidad de origen.
        cycle: Ciclo final de la ventana.
    """

    features: np.ndarray
    run_time: float
    rul_label: float
    unit_id: int = 0
    cycle: int = 0


@dataclass
class SampleBatch:
    """
    Lote en forma de arreglos listo para las redes.

    Las etiquetas se guardan divididas por `label_scale` (las redes trabajan con
    RUL normalizada); las predicciones se reescalan al evaluar.
    """

    features: np.ndarray
    run_times: np.ndarray
    labels: np.ndarray
    label_scale: float = 1.0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.run_times = np.asarray(self.run_times, dtype=np.float64).reshape(-1)
        self.labels = np.asarray(self.labels, dtype=np.float64).reshape(-1)
        n = len(self.features)
        if len(self.run_times) != n or len(self.labels) != n:
            raise ShapeError(
                f"lote inconsistente: {n} ventanas, {len(self.run_times)} tiempos, {len(self.labels)} etiquetas"
            )

    @classmethod
    def from_windows(cls, windows: Sequence[SampleWindow], label_scale: float = 1.0) -> "SampleBatch":
        if not windows:
            raise EmptyTaskError("no se puede armar un lote sin ventanas")
        return cls(
            features=np.stack([w.features for w in windows]),
            run_times=np.array([w.run_time for w in windows]),
            labels=np.array([w.rul_label for w in windows]) / label_scale,
            label_scale=label_scale,
        )

    def __len__(self) -> int:
        return int(len(self.labels))

    def take(self, indices) -> "SampleBatch":
        indices = np.asarray(indices, dtype=np.int64)
        return SampleBatch(self.features[indices], self.run_times[indices], self.labels[indices], self.label_scale)

    @property
    def raw_labels(self) -> np.ndarray:
        return self.labels * self.label_scale


@dataclass
class MetaTask:
    """
    Episodio de adaptación: soporte (𝒟^tr) y consulta (𝒟^val) de una unidad o segmento.

    Attributes:
        task_id: Identificador legible (ej: "unit12" o "unit3-seg2").
        support: Ventanas para los pasos internos.
        query: Ventanas para medir el error tras adaptar (disjuntas del soporte).
        unit_id: Unidad de origen.
        segment: Rango [inicio, fin) de ventanas de la unidad que cubre la tarea.
    """

    task_id: str
    support: List[SampleWindow]
    query: List[SampleWindow]
    unit_id: int = 0
    segment: Tuple[int, int] = (0, 0)
    metadata: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.support) + len(self.query)

    def windows(self) -> List[SampleWindow]:
        """Todas las ventanas en orden cronológico."""
        return sorted(self.support + self.query, key=lambda w: w.cycle)


@dataclass
class TaskBatches:
    """Soporte y consulta de una tarea ya convertidos en lotes."""

    task_id: str
    support: SampleBatch
    query: SampleBatch
