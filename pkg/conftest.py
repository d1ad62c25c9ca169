"""
Fixtures compartidas por las suites de pruebas.

La configuración "mínima" usa la flota sintética y redes diminutas para que un
meta-entrenamiento completo tarde pocos segundos.
"""
import copy
import json

import numpy as np
import pytest

from src.config.run_config import (
    HsmConfig,
    ModelConfig,
    PgrConfig,
    RulPredictorConfig,
    build_config,
)
from src.data.pipeline import config_for_dataset, prepare_synthetic
from src.data.records import SampleBatch


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: corridas de extremo a extremo de varios minutos")


TINY_DOCUMENT = {
    "seed": 3,
    "data": {
        "profile": "synthetic",
        "window_length": 5,
        "n_selected_features": 4,
        "segment_length": 10,
        "target_units": 2,
        "synthetic": {"n_units": 6, "min_life": 40, "max_life": 50, "n_features": 6},
    },
    "model": {
        "hsm": {"embed_dim": 4, "key_dim": 2, "num_blocks": 1, "hidden_dim": 2, "ffn_dim": 4},
        "rul": {"hidden_widths": [4, 4, 4], "output_width": 2},
        "pgr": {"hidden_widths": [4]},
    },
    "meta": {
        "inner_steps": 1,
        "inner_batch_size": 4,
        "meta_batch_size": 2,
        "epochs": 1,
        "max_iterations": 2,
        "adapt_steps": 1,
        "shots": 3,
    },
}
"""Documento de configuración de las corridas de prueba"""


def tiny_document(**overrides) -> dict:
    """Copia de TINY_DOCUMENT con bloques de primer nivel reemplazados."""
    doc = copy.deepcopy(TINY_DOCUMENT)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(doc.get(key), dict):
            doc[key].update(value)
        else:
            doc[key] = value
    return doc


def tiny_model_config(k_pde: int = 1, time_steps: int = 3, input_features: int = 2) -> ModelConfig:
    return ModelConfig(
        hsm=HsmConfig(
            time_steps=time_steps,
            input_features=input_features,
            embed_dim=4,
            key_dim=2,
            num_blocks=1,
            hidden_dim=2,
            ffn_dim=4,
            dropout_rate=0.0,
        ),
        rul=RulPredictorConfig(hidden_widths=[4, 4, 3], output_width=2),
        pgr=PgrConfig(k_pde=k_pde, hidden_widths=[4]),
    )


def random_batch(rng: np.random.Generator, n: int, time_steps: int = 3, input_features: int = 2) -> SampleBatch:
    return SampleBatch(
        features=rng.normal(size=(n, time_steps, input_features)),
        run_times=rng.uniform(0.1, 1.0, size=n),
        labels=rng.uniform(0.0, 1.0, size=n),
    )


@pytest.fixture
def tiny_config():
    return build_config(tiny_document())


@pytest.fixture(scope="session")
def tiny_dataset():
    """Flota sintética procesada (origen: unidades 1-4, objetivo: 5-6)."""
    return prepare_synthetic(build_config(tiny_document()))


@pytest.fixture
def tiny_run(tiny_dataset):
    config = config_for_dataset(build_config(tiny_document()), tiny_dataset)
    return config, tiny_dataset


@pytest.fixture
def config_file(tmp_path):
    """Escribe un documento de configuración y devuelve su ruta."""

    def write(document=None, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document if document is not None else tiny_document()), encoding="utf-8")
        return path

    return write
