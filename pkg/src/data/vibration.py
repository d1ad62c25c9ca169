"""
Características de vibración por hora, ranking de Pearson y limpieza de paradas
y funcionamiento en vacío.

Las potencias de las componentes de una descomposición modal se sustituyen por
potencias en bandas de octava del espectro de magnitud.
"""
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from src.errors import PreprocessingError

SEGMENTS_PER_HOUR = 6
"""Segmentos de señal registrados por hora de operación"""

N_BANDS = 8
"""Bandas de octava usadas como potencias espectrales"""

SHUTDOWN_RMS = 0.1
"""Umbral de RMS por debajo del cual la muestra es una parada"""

TIME_FEATURES = [
    "mean",
    "std",
    "rms",
    "max",
    "min",
    "peak_to_peak",
    "kurtosis",
    "skewness",
    "crest_factor",
    "shape_factor",
    "clearance_factor",
    "impulse_factor",
]
SPECTRAL_FEATURES = ["peak_frequency", "total_power", "spectral_centroid"]
FEATURE_NAMES = TIME_FEATURES + SPECTRAL_FEATURES + [f"band_power_{i}" for i in range(N_BANDS)]
"""Nombres de las columnas que produce extract_vibration_features"""


def _safe_ratio(num: float, den: float) -> float:
    return float(num / den) if den > 0 else 0.0


def segment_features(signal: np.ndarray, sampling_rate: float, n_bands: int = N_BANDS) -> np.ndarray:
    """
    Vector de características de un segmento de señal.

    Examples:
        >>> f = segment_features(np.array([3.0, 4.0]), 1.0)
        >>> round(f[FEATURE_NAMES.index("rms")], 4)
        3.5355
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.size == 0:
        raise PreprocessingError("segmento de señal vacío")
    abs_x = np.abs(x)
    rms = float(np.sqrt(np.mean(x * x)))
    peak = float(abs_x.max())
    mean_abs = float(abs_x.mean())
    if x.std() > 0:
        kurt = float(stats.kurtosis(x, fisher=False))
        skew = float(stats.skew(x))
    else:
        kurt, skew = 0.0, 0.0

    power = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(x.size, d=1.0 / sampling_rate)
    total = float(power.sum())
    peak_freq = float(freqs[1 + np.argmax(power[1:])]) if power.size > 1 else 0.0
    centroid = _safe_ratio(float((freqs * power).sum()), total)
    nyquist = sampling_rate / 2.0
    edges = [0.0] + [nyquist / 2.0**k for k in range(n_bands - 1, -1, -1)]
    bands = []
    for i, (low, high) in enumerate(zip(edges[:-1], edges[1:])):
        upper = freqs <= high if i == n_bands - 1 else freqs < high
        bands.append(float(power[(freqs >= low) & upper].sum()))

    values = [
        float(x.mean()),
        float(x.std()),
        rms,
        float(x.max()),
        float(x.min()),
        float(x.max() - x.min()),
        kurt,
        skew,
        _safe_ratio(peak, rms),
        _safe_ratio(rms, mean_abs),
        _safe_ratio(peak, float(np.mean(np.sqrt(abs_x))) ** 2),
        _safe_ratio(peak, mean_abs),
        peak_freq,
        total,
        centroid,
    ]
    return np.array(values + bands)


def extract_vibration_features(
    segments: Sequence[np.ndarray],
    sampling_rate: float,
    segments_per_hour: int = SEGMENTS_PER_HOUR,
) -> np.ndarray:
    """
    Una fila de características por hora: promedio de los vectores de sus segmentos.

    Args:
        segments: Segmentos consecutivos de señal cruda.
        sampling_rate: Frecuencia de muestreo en Hz.
        segments_per_hour: Segmentos que forman una hora (el último grupo puede ser parcial).

    Returns:
        np.ndarray: (horas, len(FEATURE_NAMES)).

    Raises:
        PreprocessingError: Si no hay segmentos.
    """
    if len(segments) == 0:
        raise PreprocessingError("no hay segmentos para agrupar por hora")
    per_segment = np.stack([segment_features(s, sampling_rate) for s in segments])
    hours = [
        per_segment[start : start + segments_per_hour].mean(axis=0)
        for start in range(0, len(per_segment), segments_per_hour)
    ]
    return np.stack(hours)


def pearson_correlations(features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """|r| no se calcula aquí: devuelve r de Pearson por columna (0 para columnas constantes)."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum(axis=0) * (yc * yc).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (xc * yc[:, None]).sum(axis=0) / denom
    return np.where(denom > 0, r, 0.0)


def rank_features_pearson(features: np.ndarray, labels: np.ndarray, top_n: int = 15) -> np.ndarray:
    """
    Índices de las top_n características más correlacionadas (|r| de Pearson) con la RUL.

    Empates de |r| se resuelven por índice de columna.

    Args:
        features: (n_muestras, n_características).
        labels: (n_muestras,) RUL.
        top_n: Cantidad a devolver (15 por defecto).

    Returns:
        np.ndarray: Índices ordenados por |r| descendente.

    Raises:
        PreprocessingError: Menos de 2 muestras o etiquetas constantes.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise PreprocessingError(f"matriz {X.shape} incompatible con {len(y)} etiquetas")
    if len(y) < 2:
        raise PreprocessingError("se necesitan al menos 2 muestras para la correlación")
    if np.all(y == y[0]):
        raise PreprocessingError("etiquetas constantes: la correlación no está definida")
    strength = np.abs(pearson_correlations(X, y))
    order = sorted(range(X.shape[1]), key=lambda j: (-strength[j], j))
    return np.array(order[:top_n], dtype=np.int64)


def mask_nonoperating(
    rms: np.ndarray,
    rul: np.ndarray,
    idle: Optional[np.ndarray] = None,
    threshold: float = SHUTDOWN_RMS,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quita las paradas y recalcula la RUL contando solo tiempo de operación efectiva.

    - Muestras con RMS < threshold (paradas): se eliminan y su duración no se
      descuenta de la RUL de las muestras anteriores.
    - Muestras en vacío (idle): se conservan, pero la RUL no disminuye mientras
      dura el vacío (queda igual a la de la muestra previa).

    Args:
        rms: RMS de la señal por muestra.
        rul: RUL por tiempo transcurrido (decreciente).
        idle: Marca booleana de funcionamiento en vacío (opcional).
        threshold: Umbral de parada.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (índices conservados, RUL recalculada para ellos).

    Examples:
        >>> keep, labels = mask_nonoperating(np.ones(5), np.array([4., 3., 2., 1., 0.]))
        >>> labels
        array([4., 3., 2., 1., 0.])
    """
    rms = np.asarray(rms, dtype=np.float64)
    rul = np.asarray(rul, dtype=np.float64)
    if len(rms) != len(rul):
        raise PreprocessingError("RMS y RUL deben tener la misma longitud")
    idle = np.zeros(len(rul), dtype=bool) if idle is None else np.asarray(idle, dtype=bool)
    shutdown = rms < threshold
    effective = ~shutdown & ~idle

    labels = np.empty(len(rul))
    remaining = rul[-1] if len(rul) else 0.0
    for i in range(len(rul) - 1, -1, -1):
        labels[i] = remaining
        if i > 0 and effective[i]:
            remaining = remaining + (rul[i - 1] - rul[i])
    keep = np.flatnonzero(~shutdown)
    return keep, labels[keep]
