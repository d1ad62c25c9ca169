"""
Emisión de reportes (CSV / JSON) y del registro de entrenamiento.

CSV: encabezado "true,predicted", una fila por muestra y al final un bloque de
resumen con líneas "# métrica,valor". Todos los reales se escriben con 17
cifras significativas, de modo que leer lo escrito devuelve los mismos valores.
"""
import csv
import json
from pathlib import Path
from typing import List, Optional, Sequence, Union

from src.errors import ReportError
from src.evaluation.metrics import MetricsReport
from src.state import TrainingLogRecord

REPORT_FORMATS = ("csv", "json")
"""Formatos soportados por emit_report"""

LOG_COLUMNS = ["iteration", "train_loss", "val_loss", "seconds"]
"""Columnas del registro de entrenamiento en disco"""

LOSS_COLUMNS = LOG_COLUMNS[:3]
"""Columnas reproducibles bit a bit entre corridas con la misma semilla"""

SUMMARY_PREFIX = "# "


def _num(value: Optional[float]) -> str:
    return "" if value is None else format(float(value), ".17g")


def _opt(text: str) -> Optional[float]:
    return None if text in ("", "None") else float(text)


def emit_report(report: MetricsReport, path: Union[str, Path], fmt: Optional[str] = None) -> Path:
    """
    Escribe un MetricsReport.

    Args:
        report: Reporte con al menos una muestra.
        path: Archivo de salida.
        fmt: "csv" o "json"; por defecto se toma de la extensión.

    Returns:
        Path: El archivo escrito.

    Raises:
        ReportError: Formato desconocido, reporte vacío o ruta no escribible.
    """
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt not in REPORT_FORMATS:
        raise ReportError(f"formato de reporte desconocido: {fmt!r} (use csv o json)")
    if report.n < 1 or not report.pairs:
        raise ReportError("el reporte no tiene muestras")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            document = {"metrics": report.summary(), "pairs": [[a, b] for a, b in report.pairs]}
            path.write_text(json.dumps(document, indent=2), encoding="utf-8")
        else:
            with path.open("w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["true", "predicted"])
                for a, b in report.pairs:
                    writer.writerow([_num(a), _num(b)])
                for key, value in report.summary().items():
                    text = str(value) if isinstance(value, int) else _num(value)
                    handle.write(f"{SUMMARY_PREFIX}{key},{text}\n")
    except OSError as exc:
        raise ReportError(f"no se pudo escribir {path}: {exc.strerror or exc}") from None
    return path


def read_report(path: Union[str, Path]) -> MetricsReport:
    """
    Lee un reporte escrito por emit_report (formato según la extensión).

    Raises:
        ReportError: Archivo ausente o mal formado.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"no se pudo leer {path}: {exc.strerror or exc}") from None
    try:
        if path.suffix.lower() == ".json":
            document = json.loads(text)
            metrics = document["metrics"]
            pairs = [(float(a), float(b)) for a, b in document["pairs"]]
        else:
            lines = text.splitlines()
            if not lines or lines[0] != "true,predicted":
                raise ReportError(f"{path}: falta el encabezado 'true,predicted'")
            pairs, metrics = [], {}
            for line in lines[1:]:
                if line.startswith(SUMMARY_PREFIX):
                    key, value = line[len(SUMMARY_PREFIX) :].split(",", 1)
                    metrics[key] = value
                elif line:
                    a, b = line.split(",")
                    pairs.append((float(a), float(b)))
        return MetricsReport(
            rmse=float(metrics["rmse"]),
            mae=float(metrics["mae"]),
            r2=metrics["r2"] if metrics["r2"] is None else _opt(str(metrics["r2"])),
            score=float(metrics["score"]),
            n=int(metrics["n"]),
            pairs=pairs,
            skipped=int(metrics.get("skipped", 0)),
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ReportError(f"{path}: reporte mal formado ({exc})") from None


def write_training_log(log: Sequence[TrainingLogRecord], path: Union[str, Path]) -> Path:
    """
    Escribe el registro de entrenamiento como CSV (iteration,train_loss,val_loss,seconds).

    seconds es tiempo de pared; con la misma semilla solo las columnas de
    LOSS_COLUMNS coinciden entre corridas.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(LOG_COLUMNS)
            for row in log:
                writer.writerow([row["iteration"], _num(row["train_loss"]), _num(row["val_loss"]), _num(row["seconds"])])
    except OSError as exc:
        raise ReportError(f"no se pudo escribir {path}: {exc.strerror or exc}") from None
    return path


def read_training_log(path: Union[str, Path]) -> List[TrainingLogRecord]:
    """Lee un registro escrito por write_training_log (seconds queda en 0 si falta la columna)."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as handle:
            rows = list(csv.DictReader(handle))
    except OSError as exc:
        raise ReportError(f"no se pudo leer {path}: {exc.strerror or exc}") from None
    return [
        TrainingLogRecord(
            iteration=int(r["iteration"]),
            train_loss=_opt(r["train_loss"]),
            val_loss=_opt(r["val_loss"]),
            seconds=_opt(r.get("seconds") or "") or 0.0,
        )
        for r in rows
    ]
