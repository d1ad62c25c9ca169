"""
Flota sintética de degradación (sustituto de los datos de bombas) y su E/S en CSV.

Cada unidad tiene un estado latente monótono D(τ) = (τ/L)^γ, donde τ cuenta solo
los pasos de operación efectiva. Las características informativas son
a·tanh(b·D + c) con (a, b, c) comunes a la flota más una deriva propia de cada
unidad; alrededor de un cuarto de las columnas son ruido puro.

Con signal_samples la flota registra señal cruda de vibración y las columnas son
las características horarias de extract_vibration_features.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd

from src.config.run_config import SyntheticFleetSpec
from src.data.records import UnitRecord
from src.data.vibration import (
    FEATURE_NAMES,
    SEGMENTS_PER_HOUR,
    SHUTDOWN_RMS,
    extract_vibration_features,
    mask_nonoperating,
)
from src.errors import DataFormatError, PreprocessingError
from src.utils.logging_setup import get_logger
from src.utils.seeding import make_rng

logger = get_logger(__name__)

NOISE_FEATURE_SHARE = 0.25
"""Fracción de columnas que no dependen del estado latente"""

IDLE_RMS = 0.5
"""RMS de una muestra en vacío"""

STOPPED_RMS = 0.02
"""RMS de una muestra de parada (menor que SHUTDOWN_RMS)"""

FLEET_COLUMNS = ["unit", "cycle", "rul", "rms", "idle"]
"""Columnas fijas del CSV de flota; siguen f0, f1, ..."""


@dataclass
class FleetMapping:
    """
    Mapeo latente → características compartido por toda la flota.

    Attributes:
        amplitude, slope, offset: Parámetros (a, b, c) por columna.
        informative: True en las columnas que dependen de D.
    """

    amplitude: np.ndarray
    slope: np.ndarray
    offset: np.ndarray
    informative: np.ndarray


def fleet_mapping(spec: SyntheticFleetSpec, seed: int) -> FleetMapping:
    rng = make_rng(seed, "fleet-base")
    n = spec.n_features
    noise_count = int(round(NOISE_FEATURE_SHARE * n)) if n > 1 else 0
    informative = np.ones(n, dtype=bool)
    informative[rng.permutation(n)[:noise_count]] = False
    return FleetMapping(
        amplitude=rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n),
        slope=rng.uniform(1.0, 3.0, n),
        offset=rng.uniform(-1.0, 0.0, n),
        informative=informative,
    )


def _operating_states(rng: np.random.Generator, life: int, spec: SyntheticFleetSpec) -> np.ndarray:
    """0 = activo, 1 = vacío, 2 = parada; exactamente `life` pasos activos, el último activo."""
    states: List[int] = []
    active = 0
    while active < life:
        draw = rng.random()
        if active > 0 and draw < spec.shutdown_probability:
            states.append(2)
        elif active > 0 and draw < spec.shutdown_probability + spec.idle_probability:
            states.append(1)
        else:
            states.append(0)
            active += 1
    return np.asarray(states, dtype=np.int64)


def _tabular_sensors(
    rng: np.random.Generator,
    latent: np.ndarray,
    states: np.ndarray,
    spec: SyntheticFleetSpec,
    mapping: FleetMapping,
) -> np.ndarray:
    drift = spec.drift_scale
    a = mapping.amplitude * (1.0 + drift * rng.standard_normal(spec.n_features))
    b = mapping.slope * (1.0 + drift * rng.standard_normal(spec.n_features))
    c = mapping.offset + drift * rng.standard_normal(spec.n_features)

    n_steps = len(states)
    sensors = a * np.tanh(latent[:, None] * b + c)
    sensors[:, ~mapping.informative] = rng.standard_normal((n_steps, int((~mapping.informative).sum())))
    sensors = sensors + spec.noise_std * rng.standard_normal(sensors.shape)
    sensors[states == 2] = spec.noise_std * rng.standard_normal(((states == 2).sum(), spec.n_features))
    return sensors


def _vibration_sensors(
    rng: np.random.Generator,
    latent: np.ndarray,
    states: np.ndarray,
    spec: SyntheticFleetSpec,
) -> np.ndarray:
    """
    Señal cruda por paso reducida a características horarias.

    Cada paso son SEGMENTS_PER_HOUR segmentos: una componente de giro de
    amplitud fija (IDLE_RMS en vacío) más una componente de falla y ruido de
    banda ancha que crecen con D. Las paradas son solo ruido de medición.
    """
    n = int(spec.signal_samples)
    t = np.arange(n) / spec.sampling_rate
    shaft = 2.0 * np.pi * spec.sampling_rate / 16.0
    fault = 2.0 * np.pi * spec.sampling_rate / 4.0
    severity = 1.0 + spec.drift_scale * rng.standard_normal()

    segments = []
    for d, state in zip(latent, states):
        for _ in range(SEGMENTS_PER_HOUR):
            if state == 2:
                segments.append(spec.noise_std * rng.standard_normal(n))
                continue
            phase = rng.uniform(0.0, 2.0 * np.pi)
            level = IDLE_RMS if state == 1 else 1.0
            signal = level * np.sin(shaft * t + phase) + severity * d * np.sin(fault * t + phase)
            segments.append(signal + (spec.noise_std + 0.2 * d) * rng.standard_normal(n))
    return extract_vibration_features(segments, spec.sampling_rate, SEGMENTS_PER_HOUR)


def synthesize_unit(spec: SyntheticFleetSpec, seed: int, unit_id: int, mapping: FleetMapping) -> UnitRecord:
    """Genera una unidad completa (incluye vacíos y paradas según sus probabilidades)."""
    rng = make_rng(seed, "fleet", unit_id)
    life = int(rng.integers(spec.min_life, spec.max_life + 1))
    low, high = spec.exponent_range
    gamma = float(rng.uniform(low, high))
    states = _operating_states(rng, life, spec)
    n_steps = len(states)

    active_count = np.cumsum(states == 0)
    latent = (active_count / life) ** gamma

    if spec.signal_samples:
        sensors = _vibration_sensors(rng, latent, states, spec)
        names = list(FEATURE_NAMES)
    else:
        sensors = _tabular_sensors(rng, latent, states, spec, mapping)
        names = [f"f{j}" for j in range(spec.n_features)]

    rms = np.where(states == 0, 1.0 + latent, np.where(states == 1, IDLE_RMS, STOPPED_RMS))
    return UnitRecord(
        unit_id=unit_id,
        cycles=np.arange(1, n_steps + 1, dtype=np.int64),
        settings=np.zeros((n_steps, 0)),
        sensors=sensors,
        sensor_names=names,
        rul=np.arange(n_steps - 1, -1, -1, dtype=np.float64),
        rms=rms,
        idle=states == 1,
    )


def synthesize_degradation_fleet(spec: SyntheticFleetSpec, seed: int) -> List[UnitRecord]:
    """
    Genera la flota completa.

    La RUL guardada en cada unidad es la del tiempo transcurrido (como la
    registraría un equipo de campo); clean_unit la corrige a tiempo de operación
    efectiva. Sin vacíos ni paradas ambas coinciden y bajan de a 1 por paso.

    Args:
        spec: Tamaño de flota, rango de vidas, ruido, deriva y probabilidades de vacío/parada.
        seed: Semilla; cada unidad usa su propio flujo (seed, "fleet", unidad).

    Returns:
        List[UnitRecord]: Unidades 1..n_units con rul, rms e idle.

    Examples:
        >>> fleet = synthesize_degradation_fleet(SyntheticFleetSpec(n_units=3), seed=0)
        >>> [u.unit_id for u in fleet]
        [1, 2, 3]
    """
    mapping = fleet_mapping(spec, seed)
    return [synthesize_unit(spec, seed, unit_id, mapping) for unit_id in range(1, spec.n_units + 1)]


def clean_unit(record: UnitRecord, threshold: float = SHUTDOWN_RMS) -> UnitRecord:
    """
    Quita paradas y corrige la RUL por vacíos (mask_nonoperating).

    Los ciclos se renumeran 1..n sobre las muestras conservadas.

    Raises:
        PreprocessingError: Si la unidad no trae RUL.
    """
    if record.rul is None:
        raise PreprocessingError(f"unidad {record.unit_id}: falta la RUL para limpiar la serie")
    if record.rms is None:
        return record
    keep, labels = mask_nonoperating(record.rms, record.rul, record.idle, threshold)
    dropped = record.length - len(keep)
    if dropped:
        logger.info(f"[Flota] unidad {record.unit_id}: {dropped} muestra(s) de parada eliminadas")
    return UnitRecord(
        unit_id=record.unit_id,
        cycles=np.arange(1, len(keep) + 1, dtype=np.int64),
        settings=record.settings[keep],
        sensors=record.sensors[keep],
        sensor_names=list(record.sensor_names),
        rul=labels,
        rms=record.rms[keep],
        idle=None if record.idle is None else record.idle[keep],
    )


# =========================================================================
# E/S en CSV
# =========================================================================

def write_fleet_csv(units: Sequence[UnitRecord], path: Union[str, Path]) -> Path:
    """Escribe la flota en un único CSV (una fila por muestra, 17 cifras significativas)."""
    path = Path(path)
    frames = []
    for unit in units:
        frame = pd.DataFrame(unit.sensors, columns=[f"f{j}" for j in range(unit.sensors.shape[1])])
        frame.insert(0, "idle", np.zeros(unit.length, dtype=int) if unit.idle is None else unit.idle.astype(int))
        frame.insert(0, "rms", np.ones(unit.length) if unit.rms is None else unit.rms)
        frame.insert(0, "rul", np.full(unit.length, np.nan) if unit.rul is None else unit.rul)
        frame.insert(0, "cycle", unit.cycles)
        frame.insert(0, "unit", unit.unit_id)
        frames.append(frame)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format="%.17g")
    return path


def read_fleet_csv(path: Union[str, Path]) -> List[UnitRecord]:
    """
    Lee un CSV escrito por write_fleet_csv.

    Raises:
        DataFormatError: Archivo ausente o columnas faltantes.
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError("archivo no encontrado", str(path))
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in FLEET_COLUMNS if c not in frame.columns]
    feature_cols = [c for c in frame.columns if c not in FLEET_COLUMNS]
    if missing or not feature_cols:
        raise DataFormatError(f"columnas faltantes: {', '.join(missing) or 'f0..'}", str(path))
    units = []
    for unit_id, group in frame.groupby("unit", sort=True):
        units.append(
            UnitRecord(
                unit_id=int(unit_id),
                cycles=group["cycle"].to_numpy(dtype=np.int64),
                settings=np.zeros((len(group), 0)),
                sensors=group[feature_cols].to_numpy(dtype=np.float64),
                sensor_names=feature_cols,
                rul=group["rul"].to_numpy(dtype=np.float64),
                rms=group["rms"].to_numpy(dtype=np.float64),
                idle=group["idle"].to_numpy().astype(bool),
            )
        )
    return units
