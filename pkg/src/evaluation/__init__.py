"""
Métricas, protocolos de evaluación, ablación y reportes.
"""
from src.evaluation.metrics import MetricsReport, mae, nasa_score, r2, rmse
from src.evaluation.evaluate import (
    evaluate_cmapss_last_point,
    evaluate_few_shot,
    mean_rul_baseline,
    predict_trajectory,
    shot_sweep,
)
from src.evaluation.report import emit_report, read_report

__all__ = [
    "MetricsReport",
    "mae",
    "nasa_score",
    "r2",
    "rmse",
    "evaluate_cmapss_last_point",
    "evaluate_few_shot",
    "mean_rul_baseline",
    "predict_trajectory",
    "shot_sweep",
    "emit_report",
    "read_report",
]
