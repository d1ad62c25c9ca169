"""
Estudio de ablación: {pérdida física sí/no} × {meta-entrenamiento / entrenamiento conjunto}.

    Base Learner   conjunto, sin física
    KDPINN         conjunto, con física
    Meta Learner   meta,     sin física
    MKDPINN        meta,     con física
"""
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

from src.config.run_config import RunConfig
from src.data.cache import ProcessedDataset
from src.data.pipeline import dataset_tasks
from src.errors import ReportError
from src.evaluation.evaluate import evaluate_cmapss_last_point, evaluate_few_shot
from src.evaluation.metrics import MetricsReport
from src.graph import meta_train
from src.training.joint import joint_train
from src.utils.logging_setup import get_logger

logger = get_logger(__name__)

VARIANTS = [
    ("Base Learner", False, False),
    ("KDPINN", True, False),
    ("Meta Learner", False, True),
    ("MKDPINN", True, True),
]
"""(nombre, usa pérdida física, usa meta-entrenamiento)"""

ABLATION_COLUMNS = ["variant", "physics", "meta", "seed", "rmse", "mae", "r2", "score", "n"]
"""Encabezado del CSV de la tabla de ablación"""


@dataclass
class AblationRow:
    variant: str
    physics: bool
    meta: bool
    seed: int
    report: MetricsReport


def _variant_config(config: RunConfig, physics: bool, seed: int) -> RunConfig:
    doc = config.model_dump(mode="json")
    doc["seed"] = seed
    if not physics:
        doc["loss"]["w_p"] = 0.0
    return RunConfig.model_validate(doc)


def run_ablation(
    dataset: ProcessedDataset,
    config: RunConfig,
    repeats: int = 1,
    seeds: Optional[Sequence[int]] = None,
    verbose: bool = False,
) -> List[AblationRow]:
    """
    Entrena y evalúa las cuatro variantes con las mismas semillas.

    La evaluación sigue el perfil del conjunto: último punto (0-shot) para
    C-MAPSS, few-shot con meta.shots sobre las unidades objetivo para el resto.

    Args:
        dataset: Conjunto procesado (origen para entrenar, objetivo para evaluar).
        config: Configuración base; cada variante solo cambia loss.w_p y la semilla.
        repeats: Corridas por variante (semillas seed, seed+1, ...) si no se dan seeds.
        seeds: Semillas explícitas (pisan a repeats).
        verbose: Mensajes de progreso.

    Returns:
        List[AblationRow]: 4 × #semillas filas, agrupadas por semilla en el orden de VARIANTS.
    """
    seeds = list(seeds) if seeds is not None else [config.seed + r for r in range(repeats)]
    rows: List[AblationRow] = []
    for seed in seeds:
        for name, physics, meta in VARIANTS:
            variant = _variant_config(config, physics, seed)
            tasks = dataset_tasks(dataset, variant)
            trainer = meta_train if meta else joint_train
            result = trainer(tasks, variant, label_scale=dataset.label_scale)
            if dataset.profile == "cmapss":
                report = evaluate_cmapss_last_point(result.params, dataset.target, variant, dataset.label_scale)
            else:
                report = evaluate_few_shot(result.params, dataset.target, variant, dataset.label_scale).pooled
            if verbose:
                logger.info(f"[Ablación] {name} (semilla {seed}): RMSE={report.rmse:.4f} SCORE={report.score:.4f}")
            rows.append(AblationRow(name, physics, meta, seed, report))
    return rows


def write_ablation_csv(rows: Sequence[AblationRow], path: Union[str, Path]) -> Path:
    """
    Escribe la tabla de ablación (una fila por variante y semilla, con encabezado).

    Raises:
        ReportError: Si el archivo no se puede escribir.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(ABLATION_COLUMNS)
            for row in rows:
                r = row.report
                writer.writerow(
                    [
                        row.variant,
                        int(row.physics),
                        int(row.meta),
                        row.seed,
                        format(r.rmse, ".17g"),
                        format(r.mae, ".17g"),
                        "" if r.r2 is None else format(r.r2, ".17g"),
                        format(r.score, ".17g"),
                        r.n,
                    ]
                )
    except OSError as exc:
        raise ReportError(f"no se pudo escribir {path}: {exc.strerror or exc}") from None
    return path
