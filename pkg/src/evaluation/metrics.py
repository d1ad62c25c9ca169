"""
Métricas de predicción de RUL: RMSE, MAE, R² y el SCORE asimétrico de NASA.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.errors import MetricError
from src.utils.logging_setup import get_logger

logger = get_logger(__name__)

EARLY_DENOMINATOR = 13.0
"""Denominador del SCORE cuando la predicción es temprana (û < u)"""

LATE_DENOMINATOR = 10.0
"""Denominador del SCORE cuando la predicción es tardía (û ≥ u)"""


def _pair(true: Sequence[float], pred: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    u = np.asarray(true, dtype=np.float64).reshape(-1)
    u_hat = np.asarray(pred, dtype=np.float64).reshape(-1)
    if len(u) != len(u_hat):
        raise MetricError(f"longitudes distintas: {len(u)} valores reales y {len(u_hat)} predichos")
    if len(u) == 0:
        raise MetricError("no hay muestras para evaluar")
    return u, u_hat


def rmse(true: Sequence[float], pred: Sequence[float]) -> float:
    """
    √(Σ(u − û)² / n).

    Examples:
        >>> round(rmse([0, 0], [3, 4]), 4)
        3.5355
    """
    u, u_hat = _pair(true, pred)
    return float(np.sqrt(np.mean((u - u_hat) ** 2)))


def mae(true: Sequence[float], pred: Sequence[float]) -> float:
    """
    Σ|u − û| / n.

    Examples:
        >>> mae([0, 0], [3, -4])
        3.5
    """
    u, u_hat = _pair(true, pred)
    return float(np.mean(np.abs(u - u_hat)))


def r2(true: Sequence[float], pred: Sequence[float]) -> float:
    """
    1 − SSE/SST.

    Raises:
        MetricError: Si los valores reales son constantes (SST = 0).

    Examples:
        >>> r2([1, 2, 3], [1, 2, 4])
        0.5
    """
    u, u_hat = _pair(true, pred)
    sst = float(np.sum((u - u.mean()) ** 2))
    if sst == 0.0:
        raise MetricError("R² no está definido con valores reales constantes")
    return 1.0 - float(np.sum((u - u_hat) ** 2)) / sst


def nasa_score(true: Sequence[float], pred: Sequence[float]) -> float:
    """
    Σ e^{(u − û)/13} − 1 si û < u (temprana); Σ e^{(û − u)/10} − 1 si û ≥ u (tardía).

    Examples:
        >>> round(nasa_score([0.0], [10.0]), 4), round(nasa_score([13.0], [0.0]), 4)
        (1.7183, 1.7183)
    """
    u, u_hat = _pair(true, pred)
    d = u_hat - u
    early = np.expm1(-d / EARLY_DENOMINATOR)
    late = np.expm1(d / LATE_DENOMINATOR)
    return float(np.sum(np.where(d < 0, early, late)))


@dataclass
class MetricsReport:
    """
    Métricas de un conjunto de predicciones.

    Attributes:
        rmse, mae, score: Métricas de error.
        r2: Coeficiente de determinación (None si los valores reales son constantes).
        n: Cantidad de muestras.
        pairs: (real, predicho) por muestra.
        skipped: Unidades excluidas (ej: más cortas que la ventana).
    """

    rmse: float
    mae: float
    r2: Optional[float]
    score: float
    n: int
    pairs: List[Tuple[float, float]] = field(default_factory=list)
    skipped: int = 0

    @classmethod
    def from_predictions(cls, true: Sequence[float], pred: Sequence[float], skipped: int = 0) -> "MetricsReport":
        """
        Calcula todas las métricas.

        Raises:
            MetricError: Longitudes distintas o sin muestras.
        """
        u, u_hat = _pair(true, pred)
        try:
            r2_value: Optional[float] = r2(u, u_hat)
        except MetricError:
            logger.warning(f"[Métricas] R² indefinido para {len(u)} muestra(s) con RUL constante")
            r2_value = None
        return cls(
            rmse=rmse(u, u_hat),
            mae=mae(u, u_hat),
            r2=r2_value,
            score=nasa_score(u, u_hat),
            n=len(u),
            pairs=[(float(a), float(b)) for a, b in zip(u, u_hat)],
            skipped=skipped,
        )

    @property
    def true(self) -> np.ndarray:
        return np.array([p[0] for p in self.pairs])

    @property
    def predicted(self) -> np.ndarray:
        return np.array([p[1] for p in self.pairs])

    def summary(self) -> dict:
        return {"rmse": self.rmse, "mae": self.mae, "r2": self.r2, "score": self.score, "n": self.n, "skipped": self.skipped}
