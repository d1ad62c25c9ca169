"""
Corridas de extremo a extremo: meta-entrenamiento sobre la flota sintética con
adaptación few-shot por unidad, barrido de shots y último punto de C-MAPSS.

Tardan minutos en CPU; `pytest -m "not slow"` las deja fuera.
"""
import os
from pathlib import Path

import pytest

from src.config.run_config import DATA_ROOT_ENV, build_config
from src.data.pipeline import config_for_dataset, dataset_tasks, prepare_cmapss, prepare_synthetic
from src.evaluation.evaluate import (
    evaluate_cmapss_last_point,
    evaluate_few_shot,
    mean_rul_baseline,
    shot_medians,
    shot_sweep,
)
from src.graph import meta_train

SYNTHETIC_DOCUMENT = {
    "seed": 0,
    "data": {"profile": "synthetic", "target_units": 5, "synthetic": {"n_units": 20}},
    "meta": {"epochs": 50, "max_iterations": 60, "inner_batch_size": 32, "shots": 15},
}
"""Flota de 20 unidades: 15 de meta-entrenamiento, 5 objetivo"""

SHOT_SIZES = (5, 10, 15, 20)


def _cmapss_root():
    root = os.getenv(DATA_ROOT_ENV)
    if root and (Path(root) / "train_FD001.txt").exists():
        return root
    return None


@pytest.fixture(scope="module")
def synthetic_run():
    config = build_config(SYNTHETIC_DOCUMENT)
    dataset = prepare_synthetic(config)
    config = config_for_dataset(config, dataset)
    result = meta_train(dataset_tasks(dataset, config), config, label_scale=dataset.label_scale)
    return config, dataset, result


@pytest.mark.slow
def test_synthetic_few_shot_adaptation(synthetic_run):
    config, dataset, result = synthetic_run
    assert sorted(dataset.target) == [16, 17, 18, 19, 20]

    initial = result.log[0]["val_loss"]
    assert result.best_val_loss < initial

    few = evaluate_few_shot(result.params, dataset.target, config, dataset.label_scale)
    assert few.shots == 15
    assert few.pooled.r2 >= 0.9
    assert few.pooled.rmse < few.zero_shot.rmse
    assert len(few.improved_units()) >= 4


@pytest.mark.slow
def test_median_rmse_does_not_grow_with_shots(synthetic_run):
    config, dataset, result = synthetic_run
    rows = shot_sweep(result.params, dataset.target, config, dataset.label_scale, shots_list=SHOT_SIZES)
    assert len(rows) == len(SHOT_SIZES) * 5

    medians = shot_medians(rows)
    assert list(medians) == list(SHOT_SIZES)
    values = list(medians.values())
    inversions = [(before, after) for before, after in zip(values, values[1:]) if after > before]
    assert len(inversions) <= 1
    assert all(after <= 1.05 * before for before, after in inversions)


@pytest.mark.slow
@pytest.mark.skipif(_cmapss_root() is None, reason=f"{DATA_ROOT_ENV} no apunta a los archivos FD001")
def test_cmapss_last_point_beats_mean_baseline():
    config = build_config(
        {
            "seed": 0,
            "data": {"profile": "cmapss", "subset": "FD001", "data_root": _cmapss_root(), "max_train_units": 20},
            "meta": {"epochs": 10},
        }
    )
    dataset = prepare_cmapss(config)
    config = config_for_dataset(config, dataset)
    result = meta_train(dataset_tasks(dataset, config), config, label_scale=dataset.label_scale)

    report = evaluate_cmapss_last_point(result.params, dataset.target, config, dataset.label_scale)
    baseline = mean_rul_baseline(dataset.source_labels(), report.true)
    assert report.n == 100
    assert report.rmse <= 0.7 * baseline.rmse
