"""
Pipelines completos de datos por perfil.

C-MAPSS:   cargar → 14 sensores → CS (o GS) → EWMA → ventanas w=15 → tareas por unidad
Sintético: flota (tabular o señal cruda → características de vibración)
           → limpieza de paradas/vacíos → origen/objetivo → GS (origen)
           → ranking de Pearson (origen) → ventanas w=30 → tareas por segmento
Caché:     lectura de un directorio escrito por `preprocess`
"""
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.config.run_config import RunConfig, resolve_data_root
from src.data.cache import ProcessedDataset, UnitWindows, load_dataset_cache
from src.data.cmapss import load_cmapss, select_sensors
from src.data.preprocessing import (
    apply_cs,
    ewma,
    fit_conditions,
    global_standardize,
    global_stats,
    rul_labels,
    sliding_windows,
)
from src.data.records import MetaTask, UnitRecord
from src.data.synthetic import clean_unit, synthesize_degradation_fleet
from src.data.tasks import build_meta_tasks
from src.data.vibration import rank_features_pearson
from src.errors import ConfigError, PreprocessingError
from src.utils.logging_setup import get_logger

logger = get_logger(__name__)


def _smooth(records: Sequence[UnitRecord], rho: float) -> List[UnitRecord]:
    return [r.with_sensors(ewma(r.sensors, rho)) for r in records]


def _windows_by_unit(
    records: Sequence[UnitRecord],
    final_rul: Dict[int, float],
    window: int,
    time_scale: float,
    cap: Optional[float],
) -> UnitWindows:
    out: UnitWindows = {}
    for record in records:
        rul = record.rul if record.rul is not None else rul_labels(record.length, final_rul.get(record.unit_id, 0.0))
        out[record.unit_id] = sliding_windows(record, window, rul, time_scale, cap)
    return out


def prepare_cmapss(config: RunConfig) -> ProcessedDataset:
    """
    Procesa un subconjunto C-MAPSS.

    Las etiquetas de entrenamiento son L − c; las de prueba, RUL verdadera + L − c,
    ambas con tope data.rul_cap. La escala temporal es el ciclo máximo de
    entrenamiento. CS o GS se ajustan solo con las unidades de entrenamiento.

    Returns:
        ProcessedDataset: source = unidades de entrenamiento, target = unidades de prueba.

    Raises:
        ConfigError: Sin raíz de datos.
        DataFormatError: Archivos faltantes o mal formados.
    """
    data = config.data
    train, test, true_rul = load_cmapss(resolve_data_root(config), data.subset)
    if data.max_train_units is not None:
        train = train[: data.max_train_units]
    train, test = select_sensors(train), select_sensors(test)

    if data.standardization == "condition":
        model = fit_conditions(train, data.condition_decimals, data.condition_merge_tolerance)
        train = apply_cs(model, train)
        test = apply_cs(model, test, max_distance=data.condition_max_distance)
        normalization = {
            "method": "condition",
            "centroids": model.centroids.tolist(),
            "means": model.means.tolist(),
            "stds": model.stds.tolist(),
            "checksum": model.checksum(),
        }
        logger.info(f"[CMAPSS] {data.subset}: {model.n_conditions} condición(es) de operación")
    else:
        mean, std, _ = global_stats(train)
        train, test = global_standardize(train, train), global_standardize(train, test)
        normalization = {"method": "global", "means": mean.tolist(), "stds": std.tolist()}

    train, test = _smooth(train, data.ewma_rho), _smooth(test, data.ewma_rho)
    window = data.resolved_window()
    time_scale = float(max(r.length for r in train))
    test_final = {r.unit_id: float(u) for r, u in zip(test, true_rul)}

    return ProcessedDataset(
        profile="cmapss",
        source=_windows_by_unit(train, {}, window, time_scale, data.rul_cap),
        target=_windows_by_unit(test, test_final, window, time_scale, data.rul_cap),
        window_length=window,
        n_features=len(train[0].sensor_names),
        time_scale=time_scale,
        label_scale=data.rul_cap,
        seed=config.seed,
        feature_names=list(train[0].sensor_names),
        normalization=normalization,
    )


def prepare_synthetic(config: RunConfig, units: Optional[Sequence[UnitRecord]] = None) -> ProcessedDataset:
    """
    Procesa la flota sintética (o unidades ya generadas, ej. leídas de un CSV).

    Las últimas data.target_units unidades (por id) son el dominio objetivo; el
    resto es el origen. GS y el ranking de Pearson se ajustan solo con el origen.
    Las etiquetas no llevan tope y la escala de etiquetas es la vida máxima del spec.

    Raises:
        PreprocessingError: Sin unidades de origen o menos columnas que las pedidas.
    """
    data = config.data
    fleet = list(units) if units is not None else synthesize_degradation_fleet(data.synthetic, config.seed)
    cleaned = sorted((clean_unit(u) for u in fleet), key=lambda u: u.unit_id)
    if len(cleaned) <= data.target_units:
        raise PreprocessingError(
            f"{len(cleaned)} unidades no alcanzan para reservar {data.target_units} como objetivo"
        )
    split = len(cleaned) - data.target_units
    source, target = cleaned[:split], cleaned[split:]

    mean, std, _ = global_stats(source)
    source, target = global_standardize(source, source), global_standardize(source, target)

    top_n = data.n_selected_features
    if source[0].sensors.shape[1] < top_n:
        raise PreprocessingError(f"la flota tiene {source[0].sensors.shape[1]} columnas; se piden {top_n}")
    selected = rank_features_pearson(
        np.vstack([u.sensors for u in source]), np.concatenate([u.rul for u in source]), top_n
    )
    names = [source[0].sensor_names[i] for i in selected]
    source = [u.with_sensors(u.sensors[:, selected], names) for u in source]
    target = [u.with_sensors(u.sensors[:, selected], names) for u in target]
    logger.info(f"[Sintético] columnas seleccionadas: {', '.join(names)}")

    window = data.resolved_window()
    time_scale = float(max(u.length for u in source))
    return ProcessedDataset(
        profile="synthetic",
        source=_windows_by_unit(source, {}, window, time_scale, None),
        target=_windows_by_unit(target, {}, window, time_scale, None),
        window_length=window,
        n_features=top_n,
        time_scale=time_scale,
        label_scale=float(data.synthetic.max_life),
        seed=config.seed,
        feature_names=names,
        normalization={"method": "global", "means": mean.tolist(), "stds": std.tolist(), "selected": selected.tolist()},
    )


def load_dataset(config: RunConfig) -> ProcessedDataset:
    """Devuelve el conjunto procesado que pide data.profile."""
    profile = config.data.profile
    if profile == "cmapss":
        return prepare_cmapss(config)
    if profile == "synthetic":
        return prepare_synthetic(config)
    return load_dataset_cache(config.data.cache_path)


def config_for_dataset(config: RunConfig, dataset: ProcessedDataset) -> RunConfig:
    """
    Fija la forma de entrada del HSM según las ventanas del conjunto.

    Raises:
        ConfigError: Si model.hsm ya declara una forma distinta.
    """
    hsm = config.model.hsm
    shape = (dataset.window_length, dataset.n_features)
    if hsm.time_steps is None or hsm.input_features is None:
        return config.with_input_shape(*shape)
    if (hsm.time_steps, hsm.input_features) != shape:
        raise ConfigError(
            [f"model.hsm: forma ({hsm.time_steps}, {hsm.input_features}) distinta de las ventanas {shape}"]
        )
    return config


def dataset_tasks(dataset: ProcessedDataset, config: RunConfig) -> List[MetaTask]:
    """Meta-tareas de origen del conjunto (una por unidad o por segmento según el perfil)."""
    profile = "cmapss" if dataset.profile == "cmapss" else "synthetic"
    return build_meta_tasks(
        dataset.source,
        profile,
        config.seed,
        support_fraction=config.meta.support_fraction,
        segment_length=config.data.segment_length,
    )
