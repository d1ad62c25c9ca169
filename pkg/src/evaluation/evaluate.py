"""
Protocolos de evaluación: último punto de C-MAPSS, few-shot por unidad,
barrido de shots, trayectorias de vida completa y línea base de RUL media.
"""
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.config.run_config import RunConfig
from src.data.preprocessing import cap_rul
from src.data.records import SampleBatch, SampleWindow
from src.data.tasks import select_support
from src.evaluation.metrics import MetricsReport
from src.models.parameters import ParameterSet
from src.training.losses import PinnObjective
from src.training.meta import few_shot_adapt
from src.utils.logging_setup import get_logger
from src.utils.seeding import make_rng

logger = get_logger(__name__)

UnitWindows = Mapping[int, Sequence[SampleWindow]]


def _objective(config: RunConfig, objective: Optional[PinnObjective]) -> PinnObjective:
    return objective if objective is not None else PinnObjective(config.model, config.loss)


def predict_windows(
    params: ParameterSet,
    windows: Sequence[SampleWindow],
    config: RunConfig,
    label_scale: float,
    objective: Optional[PinnObjective] = None,
) -> np.ndarray:
    """Predicción de RUL (en ciclos) para cada ventana."""
    batch = SampleBatch.from_windows(windows, label_scale)
    return _objective(config, objective).predict(params, batch)


def evaluate_cmapss_last_point(
    params: ParameterSet,
    test_windows: UnitWindows,
    config: RunConfig,
    label_scale: float,
    objective: Optional[PinnObjective] = None,
) -> MetricsReport:
    """
    Una predicción por unidad de prueba desde su última ventana (protocolo 0-shot).

    La etiqueta de la última ventana ya es la RUL del archivo de RUL; se le aplica
    el tope data.rul_cap igual que a las etiquetas de entrenamiento.

    Args:
        params: Φ* (o parámetros adaptados).
        test_windows: {unidad: ventanas}; una lista vacía marca una unidad más
                      corta que la ventana.
        config: Configuración de la corrida.
        label_scale: Divisor de las etiquetas usado en entrenamiento.

    Returns:
        MetricsReport: n = unidades utilizables; skipped = unidades omitidas.
    """
    last = [test_windows[u][-1] for u in sorted(test_windows) if test_windows[u]]
    skipped = len(test_windows) - len(last)
    if skipped:
        logger.warning(f"[Evaluación] {skipped} unidad(es) de prueba más cortas que la ventana fueron omitidas")
    targets = cap_rul(np.array([w.rul_label for w in last]), config.data.rul_cap)
    preds = predict_windows(params, last, config, label_scale, objective)
    return MetricsReport.from_predictions(targets, preds, skipped=skipped)


@dataclass
class FewShotResult:
    """
    Resultado de evaluate_few_shot.

    Attributes:
        shots: K.
        pooled: Métricas sobre todas las consultas tras adaptar.
        per_unit: Métricas por unidad tras adaptar.
        zero_shot: Métricas de Φ* sin adaptar sobre las mismas consultas.
        zero_shot_per_unit: Ídem por unidad.
    """

    shots: int
    pooled: MetricsReport
    per_unit: Dict[int, MetricsReport]
    zero_shot: MetricsReport
    zero_shot_per_unit: Dict[int, MetricsReport]

    def improved_units(self) -> List[int]:
        """Unidades cuyo RMSE tras adaptar es estrictamente menor que el 0-shot."""
        return [u for u in self.per_unit if self.per_unit[u].rmse < self.zero_shot_per_unit[u].rmse]


def evaluate_few_shot(
    phi_star: ParameterSet,
    target_windows: UnitWindows,
    config: RunConfig,
    label_scale: float,
    shots: Optional[int] = None,
    seed: Optional[int] = None,
    objective: Optional[PinnObjective] = None,
) -> FewShotResult:
    """
    Adapta Φ* por unidad objetivo con K ventanas de soporte y evalúa la consulta.

    Por unidad: soporte = K ventanas elegidas al azar (dentro del primer tramo
    data.support_stage_fraction de la vida), consulta = el resto; k' =
    meta.adapt_steps pasos de Adam. K = 0 equivale a evaluar Φ* directamente.

    Args:
        phi_star: Meta-parámetros entrenados.
        target_windows: {unidad: ventanas en orden cronológico}.
        config: Configuración de la corrida.
        label_scale: Divisor de las etiquetas.
        shots: K (por defecto meta.shots).
        seed: Semilla del muestreo de soportes (por defecto la de la corrida).

    Returns:
        FewShotResult
    """
    meta = config.meta
    shots = meta.shots if shots is None else shots
    seed = config.seed if seed is None else seed
    objective = _objective(config, objective)

    per_unit: Dict[int, MetricsReport] = {}
    zero_per_unit: Dict[int, MetricsReport] = {}
    all_true: List[float] = []
    all_pred: List[float] = []
    all_zero: List[float] = []
    for unit in sorted(target_windows):
        windows = list(target_windows[unit])
        if not windows:
            continue
        rng = make_rng(seed, "support", unit, shots)
        support, query = select_support(windows, shots, rng, config.data.support_stage_fraction)
        if support:
            theta = few_shot_adapt(
                phi_star,
                SampleBatch.from_windows(support, label_scale),
                objective,
                steps=meta.adapt_steps,
                batch_size=meta.inner_batch_size,
                rng=make_rng(seed, "adapt", unit, shots),
                lr=meta.inner_lr,
                beta1=meta.beta1,
                beta2=meta.beta2,
                eps=meta.adam_eps,
            )
        else:
            theta = phi_star
        true = np.array([w.rul_label for w in query])
        pred = predict_windows(theta, query, config, label_scale, objective)
        zero = pred if theta is phi_star else predict_windows(phi_star, query, config, label_scale, objective)
        per_unit[unit] = MetricsReport.from_predictions(true, pred)
        zero_per_unit[unit] = MetricsReport.from_predictions(true, zero)
        all_true.extend(true)
        all_pred.extend(pred)
        all_zero.extend(zero)

    return FewShotResult(
        shots=shots,
        pooled=MetricsReport.from_predictions(all_true, all_pred),
        per_unit=per_unit,
        zero_shot=MetricsReport.from_predictions(all_true, all_zero),
        zero_shot_per_unit=zero_per_unit,
    )


@dataclass
class ShotSweepRow:
    shots: int
    seed: int
    rmse: float
    mae: float
    r2: Optional[float]


def shot_sweep(
    phi_star: ParameterSet,
    target_windows: UnitWindows,
    config: RunConfig,
    label_scale: float,
    shots_list: Sequence[int] = (5, 10, 15, 20),
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    objective: Optional[PinnObjective] = None,
) -> List[ShotSweepRow]:
    """Estudio de tamaño de soporte: una fila por (K, semilla) con las métricas agrupadas."""
    rows = []
    for shots in shots_list:
        for seed in seeds:
            result = evaluate_few_shot(phi_star, target_windows, config, label_scale, shots, seed, objective)
            rows.append(ShotSweepRow(shots, seed, result.pooled.rmse, result.pooled.mae, result.pooled.r2))
    return rows


def shot_medians(rows: Sequence[ShotSweepRow]) -> Dict[int, float]:
    """Mediana del RMSE por tamaño de soporte."""
    by_shots: Dict[int, List[float]] = {}
    for row in rows:
        by_shots.setdefault(row.shots, []).append(row.rmse)
    return {k: float(np.median(v)) for k, v in sorted(by_shots.items())}


def predict_trajectory(
    params: ParameterSet,
    windows: Sequence[SampleWindow],
    config: RunConfig,
    label_scale: float,
    objective: Optional[PinnObjective] = None,
) -> List[Tuple[int, float, float]]:
    """
    Predicción de toda la vida de una unidad, lista para graficar.

    Returns:
        List[Tuple[int, float, float]]: (ciclo, RUL real, RUL predicha) en orden de ciclo.
    """
    ordered = sorted(windows, key=lambda w: w.cycle)
    preds = predict_windows(params, ordered, config, label_scale, objective)
    return [(w.cycle, w.rul_label, float(p)) for w, p in zip(ordered, preds)]


def mean_rul_baseline(train_labels: Sequence[float], test_targets: Sequence[float]) -> MetricsReport:
    """Comparador constante: predice la RUL media de entrenamiento para cada objetivo."""
    labels = np.asarray(train_labels, dtype=np.float64)
    targets = np.asarray(test_targets, dtype=np.float64)
    return MetricsReport.from_predictions(targets, np.full(len(targets), labels.mean()))
