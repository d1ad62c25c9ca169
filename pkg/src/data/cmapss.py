"""
Lectura de los archivos C-MAPSS (train_FD00x.txt, test_FD00x.txt, RUL_FD00x.txt).

Formato: columnas separadas por espacios; 26 campos por fila:
unidad, ciclo, setting1..3, S1..S21.
"""
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd

from src.data.records import CMAPSS_SENSOR_NAMES, UnitRecord
from src.errors import DataFormatError

SETTING_COLUMNS = ["setting1", "setting2", "setting3"]
COLUMNS = ["unit", "cycle"] + SETTING_COLUMNS + CMAPSS_SENSOR_NAMES

SELECTED_SENSORS = ["S2", "S3", "S4", "S7", "S8", "S9", "S11", "S12", "S13", "S14", "S15", "S17", "S20", "S21"]
"""Los 14 sensores informativos, en el orden en que se usan como características"""


def _read_rows(path: Path, n_fields: int) -> List[List[float]]:
    if not path.exists():
        raise DataFormatError("archivo no encontrado", str(path))
    rows = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != n_fields:
                raise DataFormatError(f"se esperaban {n_fields} campos, hay {len(tokens)}", str(path), line_no)
            try:
                rows.append([float(tok) for tok in tokens])
            except ValueError:
                bad = next(tok for tok in tokens if not _is_number(tok))
                raise DataFormatError(f"valor no numérico {bad!r}", str(path), line_no) from None
    return rows


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def read_units(path: Union[str, Path]) -> List[UnitRecord]:
    """
    Lee un archivo train/test y lo agrupa por unidad (ordenadas por id).

    Raises:
        DataFormatError: Archivo ausente, fila con ≠ 26 campos, token no numérico
                         o ciclos que no avanzan de a 1 desde 1.
    """
    path = Path(path)
    frame = pd.DataFrame(_read_rows(path, len(COLUMNS)), columns=COLUMNS)
    if frame.empty:
        raise DataFormatError("archivo sin filas", str(path))
    units = []
    for unit_id, group in frame.groupby("unit", sort=True):
        cycles = group["cycle"].to_numpy()
        if not np.array_equal(cycles, np.arange(1, len(cycles) + 1)):
            raise DataFormatError(f"unidad {int(unit_id)}: los ciclos deben ser 1, 2, ..., L", str(path))
        units.append(
            UnitRecord(
                unit_id=int(unit_id),
                cycles=cycles.astype(np.int64),
                settings=group[SETTING_COLUMNS].to_numpy(dtype=np.float64),
                sensors=group[CMAPSS_SENSOR_NAMES].to_numpy(dtype=np.float64),
                sensor_names=list(CMAPSS_SENSOR_NAMES),
            )
        )
    return units


def read_rul_file(path: Union[str, Path]) -> np.ndarray:
    """Lee RUL_FD00x.txt: un entero por línea, en el orden de las unidades de prueba."""
    path = Path(path)
    values = [row[0] for row in _read_rows(path, 1)]
    return np.asarray(values, dtype=np.float64)


def load_cmapss(root: Union[str, Path], subset: str = "FD001") -> Tuple[List[UnitRecord], List[UnitRecord], np.ndarray]:
    """
    Carga un subconjunto C-MAPSS completo.

    Args:
        root: Directorio con train_FD00x.txt, test_FD00x.txt y RUL_FD00x.txt.
        subset: "FD001" .. "FD004".

    Returns:
        Tuple: (unidades de entrenamiento, unidades de prueba, RUL verdadera por unidad de prueba).

    Raises:
        DataFormatError: Archivo faltante, fila mal formada (con número de línea)
                         o cantidad de RULs distinta de la de unidades de prueba.

    Examples:
        >>> train, test, rul = load_cmapss("/datos/CMAPSS", "FD001")
        >>> len(train), len(test), len(rul)
        (100, 100, 100)
    """
    root = Path(root)
    train = read_units(root / f"train_{subset}.txt")
    test = read_units(root / f"test_{subset}.txt")
    rul = read_rul_file(root / f"RUL_{subset}.txt")
    if len(rul) != len(test):
        raise DataFormatError(
            f"{len(rul)} valores de RUL para {len(test)} unidades de prueba", str(root / f"RUL_{subset}.txt")
        )
    return train, test, rul


def select_sensors(records: List[UnitRecord], names: List[str] = SELECTED_SENSORS) -> List[UnitRecord]:
    """
    Restringe cada unidad a los sensores indicados, en ese orden.

    Examples:
        >>> [u.sensor_names for u in select_sensors(units)][0][:3]
        ['S2', 'S3', 'S4']
    """
    out = []
    for record in records:
        index = [record.sensor_names.index(name) for name in names]
        out.append(record.with_sensors(record.sensors[:, index], list(names)))
    return out
