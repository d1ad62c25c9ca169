"""
Conjunto de datos procesado y su caché en disco.

Un caché es un directorio con:
    windows.csv    una fila por ventana (split, unidad, ciclo, t, RUL, x{paso}_{columna}...)
    manifest.json  forma de las ventanas, estadísticas de normalización, semilla y escalas
"""
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.data.records import SampleWindow
from src.errors import DataFormatError

MANIFEST_VERSION = 1
"""Versión del formato del manifiesto"""

WINDOW_META_COLUMNS = ["unit", "cycle", "run_time", "rul"]
"""Columnas que preceden a los valores aplanados de cada ventana"""

_VALUE_COLUMN = re.compile(r"^x(\d+)_(\d+)$")

UnitWindows = Dict[int, List[SampleWindow]]


@dataclass
class ProcessedDataset:
    """
    Ventanas listas para entrenar y evaluar.

    Attributes:
        profile: Perfil de tareas ("cmapss" = una tarea por unidad, "synthetic" = segmentos).
        source: Ventanas de las unidades de entrenamiento (meta-tareas de origen).
        target: Ventanas de las unidades de prueba/objetivo. Una lista vacía marca
                una unidad omitida por ser más corta que la ventana.
        window_length, n_features: Forma (w, f) de cada ventana.
        time_scale: Divisor del ciclo para obtener t.
        label_scale: Divisor de las etiquetas RUL dentro de las redes.
        seed: Semilla con la que se generó.
        feature_names: Nombre de cada columna de características.
        normalization: Estadísticas de normalización (serializables a JSON).
    """

    profile: str
    source: UnitWindows
    target: UnitWindows
    window_length: int
    n_features: int
    time_scale: float
    label_scale: float
    seed: int
    feature_names: List[str] = field(default_factory=list)
    normalization: Dict[str, Any] = field(default_factory=dict)

    @property
    def skipped_targets(self) -> List[int]:
        return [unit for unit, windows in self.target.items() if not windows]

    def source_labels(self) -> np.ndarray:
        return np.array([w.rul_label for windows in self.source.values() for w in windows])

    def manifest(self) -> Dict[str, Any]:
        return {
            "version": MANIFEST_VERSION,
            "profile": self.profile,
            "window_length": self.window_length,
            "n_features": self.n_features,
            "time_scale": self.time_scale,
            "label_scale": self.label_scale,
            "seed": self.seed,
            "feature_names": self.feature_names,
            "source_units": sorted(self.source),
            "target_units": sorted(self.target),
            "normalization": self.normalization,
        }


# =========================================================================
# Ventanas en CSV
# =========================================================================

def _windows_frame(windows: Sequence[SampleWindow]) -> pd.DataFrame:
    if not windows:
        return pd.DataFrame(columns=WINDOW_META_COLUMNS)
    w, f = windows[0].features.shape
    values = np.stack([win.features.reshape(-1) for win in windows])
    frame = pd.DataFrame(values, columns=[f"x{t}_{j}" for t in range(w) for j in range(f)])
    frame.insert(0, "rul", [win.rul_label for win in windows])
    frame.insert(0, "run_time", [win.run_time for win in windows])
    frame.insert(0, "cycle", [win.cycle for win in windows])
    frame.insert(0, "unit", [win.unit_id for win in windows])
    return frame


def _window_shape(columns: Sequence[str], path: Path) -> Tuple[List[str], int, int]:
    value_cols = [c for c in columns if c not in WINDOW_META_COLUMNS and c != "split"]
    parsed = [_VALUE_COLUMN.match(c) for c in value_cols]
    if not value_cols or not all(parsed):
        raise DataFormatError("columnas de ventana inválidas (se esperan x{paso}_{columna})", str(path))
    w = max(int(m.group(1)) for m in parsed) + 1
    f = max(int(m.group(2)) for m in parsed) + 1
    if w * f != len(value_cols):
        raise DataFormatError(f"{len(value_cols)} columnas de valores no forman una ventana {w}×{f}", str(path))
    return value_cols, w, f


def _frame_windows(frame: pd.DataFrame, value_cols: List[str], w: int, f: int) -> List[SampleWindow]:
    values = frame[value_cols].to_numpy(dtype=np.float64)
    return [
        SampleWindow(
            features=values[i].reshape(w, f),
            run_time=float(frame["run_time"].iloc[i]),
            rul_label=float(frame["rul"].iloc[i]),
            unit_id=int(frame["unit"].iloc[i]),
            cycle=int(frame["cycle"].iloc[i]),
        )
        for i in range(len(frame))
    ]


def write_windows_csv(windows: Sequence[SampleWindow], path: Union[str, Path]) -> Path:
    """Escribe ventanas en CSV (valores aplanados por fila, 17 cifras significativas)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _windows_frame(windows).to_csv(path, index=False, float_format="%.17g")
    return path


def read_windows_csv(path: Union[str, Path]) -> List[SampleWindow]:
    """
    Lee un CSV de ventanas (ej: el archivo de soporte de `adapt`).

    La forma (w, f) se deduce de los nombres de columna.

    Raises:
        DataFormatError: Archivo ausente, columnas faltantes o forma inconsistente.
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError("archivo no encontrado", str(path))
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in WINDOW_META_COLUMNS if c not in frame.columns]
    if missing:
        raise DataFormatError(f"columnas faltantes: {', '.join(missing)}", str(path))
    value_cols, w, f = _window_shape(list(frame.columns), path)
    return _frame_windows(frame, value_cols, w, f)


# =========================================================================
# Caché completo
# =========================================================================

def save_dataset(dataset: ProcessedDataset, directory: Union[str, Path]) -> Path:
    """
    Guarda el conjunto procesado en `directory` (windows.csv + manifest.json).

    Returns:
        Path: El directorio del caché.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frames = []
    for split, units in (("source", dataset.source), ("target", dataset.target)):
        windows = [w for unit in sorted(units) for w in units[unit]]
        frame = _windows_frame(windows)
        frame.insert(0, "split", split)
        frames.append(frame)
    pd.concat(frames, ignore_index=True).to_csv(directory / "windows.csv", index=False, float_format="%.17g")
    (directory / "manifest.json").write_text(json.dumps(dataset.manifest(), indent=2), encoding="utf-8")
    return directory


def load_dataset_cache(directory: Union[str, Path]) -> ProcessedDataset:
    """
    Carga un caché escrito por save_dataset.

    Raises:
        DataFormatError: Manifiesto ausente o de otra versión, o ventanas con una
                         forma distinta de la declarada.
    """
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise DataFormatError("manifiesto no encontrado", str(manifest_path))
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"JSON inválido: {exc.msg}", str(manifest_path), exc.lineno) from None
    if manifest.get("version") != MANIFEST_VERSION:
        raise DataFormatError(
            f"versión de manifiesto {manifest.get('version')!r} no soportada (se espera {MANIFEST_VERSION})",
            str(manifest_path),
        )

    csv_path = directory / "windows.csv"
    if not csv_path.exists():
        raise DataFormatError("archivo no encontrado", str(csv_path))
    frame = pd.read_csv(csv_path, float_precision="round_trip")
    value_cols, w, f = _window_shape(list(frame.columns), csv_path)
    if (w, f) != (manifest["window_length"], manifest["n_features"]):
        raise DataFormatError(
            f"ventanas {w}×{f} no coinciden con el manifiesto "
            f"{manifest['window_length']}×{manifest['n_features']}",
            str(csv_path),
        )

    splits: Dict[str, UnitWindows] = {}
    for split in ("source", "target"):
        units: UnitWindows = {int(u): [] for u in manifest[f"{split}_units"]}
        for window in _frame_windows(frame[frame["split"] == split].reset_index(drop=True), value_cols, w, f):
            units.setdefault(window.unit_id, []).append(window)
        splits[split] = units

    return ProcessedDataset(
        profile=manifest["profile"],
        source=splits["source"],
        target=splits["target"],
        window_length=w,
        n_features=f,
        time_scale=float(manifest["time_scale"]),
        label_scale=float(manifest["label_scale"]),
        seed=int(manifest["seed"]),
        feature_names=list(manifest.get("feature_names", [])),
        normalization=dict(manifest.get("normalization", {})),
    )
