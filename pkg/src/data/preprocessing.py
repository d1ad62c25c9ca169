"""
Preprocesamiento de series: estandarización por condición de operación (CS) o
global (GS), suavizado EWMA, etiquetas RUL con tope y ventanas deslizantes.

Las estadísticas se ajustan solo con datos de entrenamiento y luego se aplican
a ambos splits.
"""
import hashlib
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.data.records import SampleWindow, UnitRecord
from src.errors import PreprocessingError
from src.utils.logging_setup import get_logger

logger = get_logger(__name__)

CONSTANT_STD = 1e-12
"""Desvíos por debajo de este valor se consideran sensor constante (se mapea a 0)"""


def _zscore_stats(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    constant = std <= CONSTANT_STD
    return mean, np.where(constant, 1.0, std), constant


def _apply_z(values: np.ndarray, mean: np.ndarray, std: np.ndarray, constant: np.ndarray) -> np.ndarray:
    return np.where(constant, 0.0, (values - mean) / std)


# =========================================================================
# Estandarización por condición (CS)
# =========================================================================

@dataclass
class ConditionModel:
    """
    Centroides de condiciones de operación y estadísticas por (condición, sensor).

    Attributes:
        centroids: (C, 3) promedio de las condiciones crudas de cada grupo.
        means: (C, S) medias de entrenamiento.
        stds: (C, S) desvíos poblacionales (1.0 donde el sensor es constante).
        constant: (C, S) True si el sensor es constante dentro de la condición.
        sensor_names: Nombres de las S columnas.
    """

    centroids: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray
    sensor_names: List[str]

    @property
    def n_conditions(self) -> int:
        return int(len(self.centroids))

    def assign(self, settings: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Condición más cercana de cada fila y su distancia euclídea."""
        distances = np.linalg.norm(settings[:, None, :] - self.centroids[None, :, :], axis=-1)
        index = distances.argmin(axis=1)
        return index, distances[np.arange(len(settings)), index]

    def checksum(self) -> str:
        """SHA-256 de todas las estadísticas (detecta fugas de datos de prueba)."""
        digest = hashlib.sha256()
        for array in (self.centroids, self.means, self.stds, self.constant.astype(np.float64)):
            digest.update(np.ascontiguousarray(array, dtype=np.float64).tobytes())
        return digest.hexdigest()


def discover_conditions(settings: np.ndarray, decimals: int = 2, merge_tolerance: float = 1.0) -> np.ndarray:
    """
    Centroides de las condiciones de operación.

    Cada terna de condiciones se redondea a `decimals`; las ternas únicas a menos
    de `merge_tolerance` de un grupo existente se unen a él (absorbe el ruido de
    las condiciones). El centroide es la media de las ternas crudas del grupo.

    Returns:
        np.ndarray: (C, 3), en el orden de las ternas redondeadas.
    """
    rounded = np.round(settings, decimals)
    unique, inverse = np.unique(rounded, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    representatives: List[np.ndarray] = []
    group_of_unique = np.empty(len(unique), dtype=np.int64)
    for u, row in enumerate(unique):
        for g, rep in enumerate(representatives):
            if np.linalg.norm(row - rep) <= merge_tolerance:
                group_of_unique[u] = g
                break
        else:
            group_of_unique[u] = len(representatives)
            representatives.append(row)
    groups = group_of_unique[inverse]
    return np.stack([settings[groups == g].mean(axis=0) for g in range(len(representatives))])


def fit_conditions(
    train_records: Sequence[UnitRecord],
    decimals: int = 2,
    merge_tolerance: float = 1.0,
) -> ConditionModel:
    """
    Ajusta el modelo de condiciones con los datos de entrenamiento.

    Args:
        train_records: Unidades de entrenamiento (sensores ya seleccionados).
        decimals: Redondeo de las condiciones antes de buscar ternas únicas.
        merge_tolerance: Distancia máxima para unir ternas redondeadas.

    Returns:
        ConditionModel

    Examples:
        >>> fit_conditions(select_sensors(train_fd002)).n_conditions
        6
    """
    if not train_records:
        raise PreprocessingError("fit_conditions requiere al menos una unidad de entrenamiento")
    settings = np.vstack([r.settings for r in train_records])
    sensors = np.vstack([r.sensors for r in train_records])
    centroids = discover_conditions(settings, decimals, merge_tolerance)
    model = ConditionModel(
        centroids=centroids,
        means=np.zeros((len(centroids), sensors.shape[1])),
        stds=np.ones((len(centroids), sensors.shape[1])),
        constant=np.zeros((len(centroids), sensors.shape[1]), dtype=bool),
        sensor_names=list(train_records[0].sensor_names),
    )
    index, _ = model.assign(settings)
    for c in range(len(centroids)):
        rows = sensors[index == c]
        if len(rows) == 0:
            model.constant[c] = True
            continue
        model.means[c], model.stds[c], model.constant[c] = _zscore_stats(rows)
    return model


def apply_cs(
    model: ConditionModel,
    records: Sequence[UnitRecord],
    max_distance: Optional[float] = None,
) -> List[UnitRecord]:
    """
    Estandariza cada lectura con las estadísticas de su condición más cercana.

    Las filas a más de `max_distance` de todo centroide se asignan igual al más
    cercano, con una advertencia.
    """
    out = []
    far_rows = 0
    for record in records:
        index, distance = model.assign(record.settings)
        if max_distance is not None:
            far_rows += int((distance > max_distance).sum())
        z = _apply_z(record.sensors, model.means[index], model.stds[index], model.constant[index])
        out.append(record.with_sensors(z))
    if far_rows:
        logger.warning(f"[CS] {far_rows} fila(s) lejos de toda condición conocida; se asignaron a la más cercana")
    return out


def global_stats(train_records: Sequence[UnitRecord]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(media, desvío, constante) por sensor sobre todas las filas de entrenamiento."""
    if not train_records:
        raise PreprocessingError("global_standardize requiere al menos una unidad de entrenamiento")
    return _zscore_stats(np.vstack([r.sensors for r in train_records]))


def global_standardize(train_records: Sequence[UnitRecord], records: Sequence[UnitRecord]) -> List[UnitRecord]:
    """
    Un único z-score por sensor con estadísticas de entrenamiento (GS).

    Los sensores de varianza nula se mapean a 0 con una advertencia.
    """
    mean, std, constant = global_stats(train_records)
    if constant.any():
        names = [n for n, c in zip(train_records[0].sensor_names, constant) if c]
        logger.warning(f"[GS] sensores constantes mapeados a 0: {', '.join(names)}")
    return [r.with_sensors(_apply_z(r.sensors, mean, std, constant)) for r in records]


# =========================================================================
# Suavizado, etiquetas y ventanas
# =========================================================================

def ewma(series: np.ndarray, rho: float) -> np.ndarray:
    """
    s'_t = ρ·s_t + (1−ρ)·s'_{t−1} con s'_1 = s_1, columna por columna.

    Args:
        series: (L,) o (L, n_columnas).
        rho: 0 < ρ ≤ 1.

    Returns:
        np.ndarray: Misma forma que series.

    Raises:
        PreprocessingError: Si ρ está fuera de (0, 1].

    Examples:
        >>> ewma(np.array([0.0, 1.0]), 0.5)
        array([0. , 0.5])
    """
    if not 0.0 < rho <= 1.0:
        raise PreprocessingError(f"ρ de EWMA fuera de (0, 1]: {rho}")
    values = np.asarray(series, dtype=np.float64)
    smoothed = pd.DataFrame(values.reshape(len(values), -1)).ewm(alpha=rho, adjust=False).mean().to_numpy()
    return smoothed.reshape(values.shape)


def cap_rul(u_raw: Union[float, np.ndarray], cap: float = 125.0):
    """
    min(u, cap); rechaza valores negativos.

    Examples:
        >>> cap_rul(130.0), cap_rul(60.0)
        (125.0, 60.0)
    """
    values = np.asarray(u_raw, dtype=np.float64)
    if np.any(values < 0):
        raise PreprocessingError("la RUL no puede ser negativa")
    capped = np.minimum(values, cap)
    return float(capped) if capped.ndim == 0 else capped


def rul_labels(length: int, final_rul: float = 0.0) -> np.ndarray:
    """RUL por ciclo de una serie de `length` ciclos cuya RUL en el último ciclo es final_rul."""
    return final_rul + np.arange(length - 1, -1, -1, dtype=np.float64)


def sliding_windows(
    unit: UnitRecord,
    window: int,
    rul: np.ndarray,
    time_scale: float,
    cap: Optional[float] = 125.0,
    stride: int = 1,
) -> List[SampleWindow]:
    """
    Ventanas deslizantes de una unidad.

    La ventana que termina en el ciclo c recibe t = c / time_scale y u = min(RUL(c), cap).

    Args:
        unit: Serie de la unidad (sensores ya procesados).
        window: Longitud w.
        rul: RUL cruda por ciclo (misma longitud que la serie).
        time_scale: Escala del tiempo de operación (ej: ciclo máximo de entrenamiento).
        cap: Tope de la RUL (None = sin tope).
        stride: Paso entre ventanas.

    Returns:
        List[SampleWindow]: L − w + 1 ventanas con stride 1; vacía (con advertencia) si L < w.
    """
    L = unit.length
    if L < window:
        logger.warning(f"[Ventanas] unidad {unit.unit_id}: {L} ciclos < ventana {window}, se omite")
        return []
    labels = np.asarray(rul, dtype=np.float64)
    if cap is not None:
        labels = cap_rul(labels, cap)
    out = []
    for end in range(window - 1, L, stride):
        out.append(
            SampleWindow(
                features=unit.sensors[end - window + 1 : end + 1].copy(),
                run_time=float(unit.cycles[end]) / time_scale,
                rul_label=float(labels[end]),
                unit_id=unit.unit_id,
                cycle=int(unit.cycles[end]),
            )
        )
    return out
