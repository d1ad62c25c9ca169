"""
Pruebas de métricas, reportes, checkpoints, protocolos de evaluación y ablación.
"""
import csv
import json
import math
import struct

import numpy as np
import pytest

from src.errors import CheckpointError, MetricError, ReportError
from src.evaluation.ablation import ABLATION_COLUMNS, VARIANTS, run_ablation, write_ablation_csv
from src.evaluation.evaluate import (
    evaluate_cmapss_last_point,
    evaluate_few_shot,
    mean_rul_baseline,
    predict_trajectory,
    shot_medians,
    shot_sweep,
)
from src.evaluation.metrics import MetricsReport, mae, nasa_score, r2, rmse
from src.evaluation.report import emit_report, read_report, read_training_log, write_training_log
from src.models.networks import init_parameters
from src.models.parameters import ParameterSet
from src.utils.checkpoint import load_checkpoint, read_header, save_checkpoint
from src.utils.seeding import make_rng


def _phi(config):
    return init_parameters(config.model, make_rng(config.seed, "init"))


def _rewrite_header(path, edit):
    blob = path.read_bytes()
    (length,) = struct.unpack_from("<Q", blob)
    header = json.loads(blob[8 : 8 + length].decode("utf-8"))
    edit(header)
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    path.write_bytes(struct.pack("<Q", len(encoded)) + encoded + blob[8 + length :])


# =========================================================================
# Métricas
# =========================================================================

def _brute_force(u, p):
    n = len(u)
    sse = sum((a - b) ** 2 for a, b in zip(u, p))
    mean = sum(u) / n
    sst = sum((a - mean) ** 2 for a in u)
    score = 0.0
    for a, b in zip(u, p):
        d = b - a
        score += math.exp(-d / 13.0) - 1.0 if d < 0 else math.exp(d / 10.0) - 1.0
    return math.sqrt(sse / n), sum(abs(a - b) for a, b in zip(u, p)) / n, 1.0 - sse / sst, score


def test_metrics_match_direct_formulas():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 20))
        u = rng.uniform(0.0, 125.0, n)
        p = u + rng.normal(0.0, 15.0, n)
        expected = _brute_force(list(u), list(p))
        assert rmse(u, p) == pytest.approx(expected[0], rel=1e-12)
        assert mae(u, p) == pytest.approx(expected[1], rel=1e-12)
        assert r2(u, p) == pytest.approx(expected[2], rel=1e-12, abs=1e-12)
        assert nasa_score(u, p) == pytest.approx(expected[3], rel=1e-12)


def test_score_is_asymmetric():
    assert nasa_score([0.0], [10.0]) == pytest.approx(math.e - 1.0, abs=1e-12)
    assert nasa_score([13.0], [0.0]) == pytest.approx(math.e - 1.0, abs=1e-12)
    assert nasa_score([50.0], [60.0]) > nasa_score([60.0], [50.0])
    assert nasa_score([5.0], [5.0]) == 0.0


def test_metric_errors():
    with pytest.raises(MetricError):
        rmse([1.0, 2.0], [1.0])
    with pytest.raises(MetricError):
        mae([], [])
    with pytest.raises(MetricError):
        r2([3.0, 3.0], [1.0, 2.0])


def test_report_with_constant_truth_has_no_r2():
    report = MetricsReport.from_predictions([7.0, 7.0], [6.0, 8.0], skipped=1)
    assert report.r2 is None
    assert report.rmse == 1.0
    assert report.summary() == {"rmse": 1.0, "mae": 1.0, "r2": None, "score": report.score, "n": 2, "skipped": 1}


# =========================================================================
# Reportes y registro
# =========================================================================

@pytest.mark.parametrize("suffix", ["csv", "json"])
def test_report_round_trip(tmp_path, suffix):
    rng = np.random.default_rng(1)
    u = rng.uniform(0.0, 100.0, 12)
    report = MetricsReport.from_predictions(u, u + rng.normal(0.0, 3.0, 12), skipped=2)
    back = read_report(emit_report(report, tmp_path / f"report.{suffix}"))
    assert back.pairs == report.pairs
    assert back.summary() == report.summary()


def test_report_round_trip_without_r2(tmp_path):
    report = MetricsReport.from_predictions([4.0, 4.0, 4.0], [3.0, 4.5, 5.0])
    for name in ("r.csv", "r.json"):
        assert read_report(emit_report(report, tmp_path / name)).r2 is None


def test_report_errors(tmp_path):
    report = MetricsReport.from_predictions([1.0, 2.0], [1.0, 2.5])
    with pytest.raises(ReportError):
        emit_report(report, tmp_path / "r.txt")
    with pytest.raises(ReportError):
        emit_report(MetricsReport(rmse=0.0, mae=0.0, r2=None, score=0.0, n=0), tmp_path / "r.csv")
    with pytest.raises(ReportError):
        read_report(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ReportError):
        read_report(bad)


def test_csv_report_layout(tmp_path):
    report = MetricsReport.from_predictions([1.0, 3.0], [2.0, 3.0])
    lines = emit_report(report, tmp_path / "r.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "true,predicted"
    assert lines[1] == "1,2"
    assert "# n,2" in lines
    assert any(line.startswith("# rmse,") for line in lines)


def test_training_log_round_trip(tmp_path):
    log = [
        {"iteration": 0, "train_loss": None, "val_loss": 0.5, "seconds": 0.0},
        {"iteration": 1, "train_loss": 0.123456789012345678, "val_loss": None, "seconds": 1.5},
    ]
    path = write_training_log(log, tmp_path / "training_log.csv")
    assert path.read_text(encoding="utf-8").splitlines()[0] == "iteration,train_loss,val_loss,seconds"
    back = read_training_log(path)
    assert [r["iteration"] for r in back] == [0, 1]
    assert back[0]["train_loss"] is None and back[0]["val_loss"] == 0.5
    assert back[1]["train_loss"] == log[1]["train_loss"]
    assert back[1]["val_loss"] is None
    assert [r["seconds"] for r in back] == [0.0, 1.5]


def test_training_log_without_seconds_column(tmp_path):
    path = tmp_path / "old_log.csv"
    path.write_text("iteration,train_loss,val_loss\n0,,0.25\n", encoding="utf-8")
    assert read_training_log(path) == [{"iteration": 0, "train_loss": None, "val_loss": 0.25, "seconds": 0.0}]


# =========================================================================
# Checkpoints
# =========================================================================

def test_checkpoint_round_trip(tiny_run, tmp_path):
    config, _ = tiny_run
    phi = _phi(config)
    path = save_checkpoint(phi, config, tmp_path / "model.ckpt", metadata={"label_scale": 50.0})
    loaded = load_checkpoint(path)
    assert loaded.params.equals(phi)
    assert loaded.params.names() == phi.names()
    assert loaded.config == config
    assert loaded.provenance == {"seed": config.seed}
    assert loaded.metadata == {"label_scale": 50.0}
    header = read_header(path)
    assert header["version"] == 1
    assert header["payload_bytes"] == phi.size * 8
    assert [t["name"] for t in header["tensors"]] == phi.names()


def test_checkpoint_rejects_tampering(tiny_run, tmp_path):
    config, _ = tiny_run
    path = save_checkpoint(_phi(config), config, tmp_path / "model.ckpt")
    original = path.read_bytes()

    path.write_bytes(original[:-8])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)

    path.write_bytes(original[:4])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)

    path.write_bytes(original)
    _rewrite_header(path, lambda h: h.update(version=2))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)

    path.write_bytes(original)

    def swap_shape(header):
        entry = next(t for t in header["tensors"] if t["name"] == "rul.layer0.W")
        entry["shape"] = list(reversed(entry["shape"]))

    _rewrite_header(path, swap_shape)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_rejects_params_of_another_model(tiny_run, tmp_path):
    config, _ = tiny_run
    with pytest.raises(CheckpointError):
        save_checkpoint(ParameterSet({"w": [1.0]}), config, tmp_path / "model.ckpt")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.ckpt")


# =========================================================================
# Protocolos de evaluación
# =========================================================================

def test_zero_shots_pool_equals_zero_shot(tiny_run):
    config, dataset = tiny_run
    result = evaluate_few_shot(_phi(config), dataset.target, config, dataset.label_scale, shots=0)
    assert result.shots == 0
    assert result.pooled.pairs == result.zero_shot.pairs
    assert sorted(result.per_unit) == [5, 6]
    assert result.improved_units() == []
    assert result.pooled.n == sum(len(w) for w in dataset.target.values())


def test_few_shot_adapts_per_unit(tiny_run):
    config, dataset = tiny_run
    phi = _phi(config)
    a = evaluate_few_shot(phi, dataset.target, config, dataset.label_scale, shots=3)
    b = evaluate_few_shot(phi, dataset.target, config, dataset.label_scale, shots=3)
    assert a.pooled.pairs == b.pooled.pairs
    assert a.pooled.n == sum(len(w) - 3 for w in dataset.target.values())
    assert a.pooled.pairs != a.zero_shot.pairs
    assert sorted(a.per_unit) == sorted(a.zero_shot_per_unit) == [5, 6]
    expected = [u for u in (5, 6) if a.per_unit[u].rmse < a.zero_shot_per_unit[u].rmse]
    assert a.improved_units() == expected
    assert b.improved_units() == expected


def test_shot_sweep_and_medians(tiny_run):
    config, dataset = tiny_run
    rows = shot_sweep(_phi(config), dataset.target, config, dataset.label_scale, shots_list=(0, 2), seeds=(0, 1))
    assert [(r.shots, r.seed) for r in rows] == [(0, 0), (0, 1), (2, 0), (2, 1)]
    assert rows[0].rmse == rows[1].rmse
    medians = shot_medians(rows)
    assert list(medians) == [0, 2]
    assert medians[0] == rows[0].rmse


def test_last_point_protocol_skips_short_units(tiny_run):
    config, dataset = tiny_run
    target = {5: dataset.target[5], 6: [], 7: dataset.target[6]}
    report = evaluate_cmapss_last_point(_phi(config), target, config, dataset.label_scale)
    assert report.n == 2
    assert report.skipped == 1
    assert list(report.true) == [dataset.target[5][-1].rul_label, dataset.target[6][-1].rul_label]


def test_trajectory_is_ordered_by_cycle(tiny_run):
    config, dataset = tiny_run
    windows = list(reversed(dataset.target[5]))
    trajectory = predict_trajectory(_phi(config), windows, config, dataset.label_scale)
    cycles = [c for c, _, _ in trajectory]
    assert cycles == sorted(cycles)
    assert len(trajectory) == len(windows)


def test_mean_rul_baseline():
    report = mean_rul_baseline([10.0, 20.0, 30.0], [5.0, 25.0])
    assert report.predicted.tolist() == [20.0, 20.0]
    assert report.rmse == pytest.approx(math.sqrt(125.0))


# =========================================================================
# Ablación
# =========================================================================

def test_ablation_runs_four_variants(tiny_run, tmp_path):
    config, dataset = tiny_run
    rows = run_ablation(dataset, config, seeds=[3])
    assert [(r.variant, r.physics, r.meta) for r in rows] == VARIANTS
    assert all(r.seed == 3 for r in rows)
    assert all(np.isfinite(r.report.rmse) for r in rows)
    path = write_ablation_csv(rows, tmp_path / "ablation.csv")
    with path.open(encoding="utf-8", newline="") as handle:
        table = list(csv.reader(handle))
    assert table[0] == ABLATION_COLUMNS
    assert [row[0] for row in table[1:]] == [name for name, _, _ in VARIANTS]
