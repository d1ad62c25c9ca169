"""
Pruebas de la configuración: valores por defecto, validación estricta,
combinación de documentos y resolución de dimensiones por perfil.
"""
import pytest

from src.config.run_config import (
    DATA_ROOT_ENV,
    build_config,
    default_document,
    load_config,
    merge_config,
    resolve_data_root,
    validate_config,
)
from src.errors import ConfigError


def test_defaults_follow_reference_protocol():
    config = load_config(None)
    meta = config.meta
    assert (meta.inner_lr, meta.inner_steps, meta.inner_batch_size) == (0.001, 8, 64)
    assert (meta.meta_batch_size, meta.outer_rate, meta.epochs) == (5, 0.1, 50)
    assert meta.validation_fraction == 0.1
    assert meta.shots == 15
    assert config.data.rul_cap == 125.0
    assert config.model.hsm.dropout_rate == 0.1
    assert config.loss.w_d == config.loss.w_p == 1.0


def test_cmapss_profile_resolves_input_shape():
    hsm = build_config({}).model.hsm
    assert (hsm.time_steps, hsm.input_features) == (15, 14)


def test_synthetic_profile_resolves_input_shape():
    config = build_config({"data": {"profile": "synthetic", "n_selected_features": 7}})
    assert (config.model.hsm.time_steps, config.model.hsm.input_features) == (30, 7)
    windowed = build_config({"data": {"profile": "synthetic", "window_length": 12}})
    assert windowed.model.hsm.time_steps == 12


def test_explicit_shape_must_match_profile():
    with pytest.raises(ConfigError):
        build_config({"model": {"hsm": {"time_steps": 20}}})
    assert build_config({"model": {"hsm": {"time_steps": 15, "input_features": 14}}}).model.hsm.time_steps == 15


def test_cache_profile_needs_path_and_keeps_shape_open():
    with pytest.raises(ConfigError):
        build_config({"data": {"profile": "cache"}})
    config = build_config({"data": {"profile": "cache", "cache_path": "runs/dataset"}})
    assert config.model.hsm.input_features is None
    fixed = config.with_input_shape(9, 3)
    assert (fixed.model.hsm.time_steps, fixed.model.hsm.input_features) == (9, 3)


def test_unknown_keys_and_bad_values_are_reported_together():
    with pytest.raises(ConfigError) as info:
        build_config({"meta": {"outer_rate": 0.0, "mystery": 1}, "seed": -1})
    joined = "; ".join(info.value.errors)
    assert len(info.value.errors) == 3
    assert "meta.outer_rate" in joined
    assert "meta.mystery" in joined
    assert "seed" in joined


def test_validate_config_returns_messages():
    assert validate_config({}) == []
    assert validate_config(build_config({})) == []
    errors = validate_config({"model": {"rul": {"hidden_widths": [4, 4]}}})
    assert len(errors) == 1
    assert errors[0].startswith("model.rul.hidden_widths")


def test_merge_config_is_recursive_and_pure():
    base = {"meta": {"epochs": 50, "shots": 15}, "seed": 1}
    overrides = {"meta": {"epochs": 2}, "seed": 4}
    merged = merge_config(base, overrides)
    assert merged == {"meta": {"epochs": 2, "shots": 15}, "seed": 4}
    assert base == {"meta": {"epochs": 50, "shots": 15}, "seed": 1}
    assert merge_config(merged, overrides) == merged


def test_default_document_round_trips():
    assert build_config(default_document()) == build_config({})


def test_load_config_from_file_with_overrides(config_file):
    path = config_file({"meta": {"epochs": 3}})
    config = load_config(path, overrides={"seed": 9, "meta": {"shots": 4}})
    assert (config.meta.epochs, config.meta.shots, config.seed) == (3, 4, 9)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json", encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_config(bad)
    assert "JSON" in str(info.value)
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(listing)


def test_data_root_from_config_or_environment(monkeypatch, tmp_path):
    monkeypatch.delenv(DATA_ROOT_ENV, raising=False)
    with pytest.raises(ConfigError):
        resolve_data_root(build_config({}))
    monkeypatch.setenv(DATA_ROOT_ENV, str(tmp_path))
    assert resolve_data_root(build_config({})) == tmp_path
    assert resolve_data_root(build_config({"data": {"data_root": "elsewhere"}})).name == "elsewhere"
