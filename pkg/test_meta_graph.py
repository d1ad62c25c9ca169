"""
Pruebas del grafo de meta-entrenamiento: nodos, decisión y corrida completa.
"""
import numpy as np
import pytest

from conftest import tiny_document
from src.config.run_config import build_config
from src.data.pipeline import config_for_dataset, dataset_tasks
from src.errors import TrainingError
from src.graph import create_meta_training_graph, initialize_state, meta_train
from src.nodes.decision_nodes import decision_entrenamiento
from src.nodes.meta_nodes import muestreador_tareas, validation_loss
from src.state import MetaTrainingContext


def _run_config(dataset, **meta):
    return config_for_dataset(build_config(tiny_document(meta=meta)), dataset)


def test_decision_routes_until_budget_is_spent():
    assert decision_entrenamiento({"iteration": 1, "total_iterations": 3}) == "siguiente_iteracion"
    assert decision_entrenamiento({"iteration": 3, "total_iterations": 3}) == "finalizar"


def test_graph_compiles():
    assert create_meta_training_graph() is not None


def test_sampler_covers_every_task_within_an_epoch():
    config = build_config(tiny_document(meta={"meta_batch_size": 2}))
    context = MetaTrainingContext(config=config, train_tasks=list(range(5)), val_tasks=[], objective=None)
    seen = set()
    for iteration in range(3):
        batch = muestreador_tareas({"context": context, "iteration": iteration, "iterations_per_epoch": 3})
        assert len(batch["batch_tasks"]) == 2
        seen.update(batch["batch_tasks"])
    assert seen == set(range(5))
    again = muestreador_tareas({"context": context, "iteration": 1, "iterations_per_epoch": 3})
    assert again == muestreador_tareas({"context": context, "iteration": 1, "iterations_per_epoch": 3})


def test_meta_train_log_and_best_parameters(tiny_run):
    config, dataset = tiny_run
    tasks = dataset_tasks(dataset, config)
    result = meta_train(tasks, config, label_scale=dataset.label_scale)

    assert [row["iteration"] for row in result.log] == [0, 1, 2]
    assert result.log[0]["train_loss"] is None
    assert result.log[0]["val_loss"] is not None
    assert result.log[1]["train_loss"] is not None
    assert result.log[1]["val_loss"] is None
    assert result.log[2]["val_loss"] is not None
    logged = [row["val_loss"] for row in result.log if row["val_loss"] is not None]
    assert result.best_val_loss == min(logged)
    assert result.best_iteration in (0, 2)
    assert result.final_params.is_finite()
    assert not result.final_params.equals(initialize_state(tasks, config)["phi"])


def test_meta_training_lowers_validation_loss(tiny_dataset):
    config = _run_config(
        tiny_dataset,
        inner_steps=4,
        inner_lr=0.01,
        outer_rate=0.5,
        epochs=10,
        max_iterations=12,
        validation_interval=1,
    )
    result = meta_train(dataset_tasks(tiny_dataset, config), config, label_scale=tiny_dataset.label_scale)
    initial = result.log[0]["val_loss"]
    assert result.best_val_loss < initial
    assert result.best_iteration > 0
    assert len(result.log) == 13


def test_meta_train_is_deterministic_and_thread_independent(tiny_dataset):
    config = _run_config(tiny_dataset)
    tasks = dataset_tasks(tiny_dataset, config)
    first = meta_train(tasks, config, label_scale=tiny_dataset.label_scale)
    second = meta_train(tasks, config, label_scale=tiny_dataset.label_scale)
    threaded = meta_train(tasks, _run_config(tiny_dataset, workers=2), label_scale=tiny_dataset.label_scale)
    assert first.final_params.equals(second.final_params)
    assert first.final_params.equals(threaded.final_params)
    assert [r["val_loss"] for r in first.log] == [r["val_loss"] for r in threaded.log]


def test_validation_interval_validates_every_iteration(tiny_dataset):
    config = _run_config(tiny_dataset, validation_interval=1)
    result = meta_train(dataset_tasks(tiny_dataset, config), config, label_scale=tiny_dataset.label_scale)
    assert all(row["val_loss"] is not None for row in result.log)


def test_validation_loss_is_repeatable(tiny_run):
    config, dataset = tiny_run
    state = initialize_state(dataset_tasks(dataset, config), config, label_scale=dataset.label_scale)
    a = validation_loss(state["context"], state["phi"])
    b = validation_loss(state["context"], state["phi"])
    assert a == b
    assert np.isfinite(a)


def test_too_few_tasks_for_meta_batch(tiny_dataset):
    config = _run_config(tiny_dataset, meta_batch_size=500)
    with pytest.raises(TrainingError):
        meta_train(dataset_tasks(tiny_dataset, config), config)


def test_verbose_run_prints_banner(tiny_run, capsys):
    config, dataset = tiny_run
    meta_train(dataset_tasks(dataset, config), config, label_scale=dataset.label_scale, verbose=True)
    out = capsys.readouterr().out
    assert "META-ENTRENAMIENTO" in out
    assert "COMPLETADO" in out
