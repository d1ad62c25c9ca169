"""
Pruebas de las redes (HSM, predictor de RUL, PGR), del residuo de la EDP y del
gradiente de la pérdida total, incluido el término físico.
"""
import numpy as np
import pytest

from conftest import random_batch, tiny_model_config
from src.autodiff import Tensor
from src.autodiff.gradcheck import FD_STEP, central_difference, relative_error
from src.config.run_config import LossWeights
from src.errors import ShapeError
from src.models.networks import (
    assemble_pgr_features,
    hsm_forward,
    init_parameters,
    parameter_shapes,
    pde_residual,
    pgr_forward,
    physics_terms,
    rul_forward,
)
from src.models.parameters import ParameterSet
from src.training.losses import data_loss, loss_and_gradients, physics_loss, total_loss

PHYSICS_TOLERANCE = 1e-4


def _random_params(config, seed):
    """Parámetros con todos los valores aleatorios (sesgos y escalas incluidos)."""
    rng = np.random.default_rng(seed)
    return ParameterSet((name, 0.5 * rng.normal(size=shape)) for name, shape in parameter_shapes(config))


def _unflatten(template: ParameterSet, flat: np.ndarray) -> ParameterSet:
    arrays, offset = [], 0
    for name, array in template.items():
        arrays.append((name, flat[offset : offset + array.size].reshape(array.shape)))
        offset += array.size
    return ParameterSet(arrays)


def _hidden(rng, n, d_h=2):
    return Tensor(rng.normal(size=(n, d_h)), requires_grad=True)


# =========================================================================
# Formas e inicialización
# =========================================================================

def test_parameter_directory_is_canonical():
    config = tiny_model_config()
    names = [name for name, _ in parameter_shapes(config)]
    assert names[:2] == ["hsm.embed.W", "hsm.embed.b"]
    assert "hsm.block0.Wq" in names and "hsm.block1.Wq" not in names
    assert names[-2:] == ["pgr.layer1.W", "pgr.layer1.b"]
    shapes = dict(parameter_shapes(config))
    assert shapes["hsm.block0.Wq"] == (3, 2)
    assert shapes["hsm.block0.Wv"] == (3, 3)
    assert shapes["rul.layer0.W"] == (3, 4)
    assert shapes["rul.layer3.W"] == (3, 2)
    assert shapes["pgr.layer0.W"] == (3, 4)


def test_second_order_regulator_takes_hessian_diagonal():
    shapes = dict(parameter_shapes(tiny_model_config(k_pde=2)))
    assert shapes["pgr.layer0.W"] == (1 + 2 * 2, 4)


def test_init_is_deterministic_and_structured():
    config = tiny_model_config()
    a = init_parameters(config, np.random.default_rng(0))
    b = init_parameters(config, np.random.default_rng(0))
    assert a.equals(b)
    assert np.array_equal(a["rul.rho"], np.ones(2))
    assert np.array_equal(a["hsm.block0.ln1.gamma"], np.ones(4))
    assert np.array_equal(a["hsm.embed.b"], np.zeros(4))
    bound = 1.0 / np.sqrt(2)
    assert np.all(np.abs(a["hsm.embed.W"]) <= bound)


def test_parameters_are_read_only():
    params = init_parameters(tiny_model_config(), np.random.default_rng(0))
    with pytest.raises(ValueError):
        params["rul.rho"][0] = 5.0


# =========================================================================
# Forward de las redes
# =========================================================================

def test_hsm_shapes_and_attention():
    config = tiny_model_config()
    params = _random_params(config, 0)
    X = np.random.default_rng(1).normal(size=(5, 3, 2))
    h, attention = hsm_forward(params, X, config.hsm, return_attention=True)
    assert h.shape == (5, 2)
    assert len(attention) == 1
    assert attention[0].shape == (5, 4, 4)
    assert np.allclose(attention[0].data.sum(axis=-1), 1.0)
    single = hsm_forward(params, X[2], config.hsm)
    assert single.shape == (2,)
    assert np.allclose(single.data, h.data[2], atol=1e-12)


def test_hsm_rejects_wrong_window():
    config = tiny_model_config()
    params = _random_params(config, 0)
    with pytest.raises(ShapeError):
        hsm_forward(params, np.zeros((5, 4, 2)), config.hsm)


def test_hsm_dropout_needs_generator_and_is_seeded():
    config = tiny_model_config()
    hsm = config.hsm.model_copy(update={"dropout_rate": 0.5})
    params = _random_params(config, 0)
    X = np.random.default_rng(1).normal(size=(4, 3, 2))
    with pytest.raises(ValueError):
        hsm_forward(params, X, hsm, training=True)
    a = hsm_forward(params, X, hsm, training=True, rng=np.random.default_rng(7)).data
    b = hsm_forward(params, X, hsm, training=True, rng=np.random.default_rng(7)).data
    assert np.array_equal(a, b)
    evaluation = hsm_forward(params, X, hsm, training=False).data
    assert np.array_equal(evaluation, hsm_forward(params, X, hsm).data)


def test_rul_and_pgr_shapes():
    config = tiny_model_config()
    params = _random_params(config, 0)
    rng = np.random.default_rng(2)
    h = Tensor(rng.normal(size=(6, 2)))
    assert rul_forward(params, h, Tensor(rng.uniform(size=(6, 1)))).shape == (6,)
    assert rul_forward(params, Tensor(rng.normal(size=2)), 0.4).shape == ()
    with pytest.raises(ShapeError):
        rul_forward(params, h, Tensor(np.ones((5, 1))))
    assert pgr_forward(params, Tensor(rng.normal(size=(6, 3)))).shape == (6,)
    assert pgr_forward(params, Tensor(rng.normal(size=3))).shape == ()
    with pytest.raises(ShapeError):
        pgr_forward(params, Tensor(rng.normal(size=(6, 5))))


def test_pgr_feature_order_and_arity():
    features = assemble_pgr_features(Tensor(0.5), Tensor([0.1, -0.2]))
    assert np.array_equal(features.data, [0.5, 0.1, -0.2])
    batch = assemble_pgr_features(Tensor([1.0, 2.0]), Tensor(np.ones((2, 2))), Tensor(np.zeros((2, 2))), k_pde=2)
    assert batch.shape == (2, 5)
    assert np.array_equal(batch.data[:, 0], [1.0, 2.0])
    with pytest.raises(ShapeError):
        assemble_pgr_features(Tensor(0.5), Tensor([0.1, -0.2]), k_pde=2)
    with pytest.raises(ShapeError):
        assemble_pgr_features(Tensor(0.5), Tensor([0.1, -0.2]), Tensor([0.0, 0.0]), k_pde=1)
    with pytest.raises(ShapeError):
        assemble_pgr_features(Tensor(0.5), Tensor([0.1, -0.2]), expected_dim=5)


# =========================================================================
# Residuo de la EDP
# =========================================================================

def test_echo_regulator_gives_exact_zero_residual():
    config = tiny_model_config()
    params = _random_params(config, 0)
    rng = np.random.default_rng(3)
    residual = pde_residual(
        params,
        _hidden(rng, 5),
        Tensor(rng.uniform(size=(5, 1))),
        config,
        regulator=lambda params, terms: terms.u_t,
    )
    assert residual.shape == (5,)
    assert np.array_equal(residual.data, np.zeros(5))


def test_echo_regulator_gives_zero_physics_loss():
    config = tiny_model_config()
    params = _random_params(config, 0)
    batch = random_batch(np.random.default_rng(4), 6)
    loss = physics_loss(params, batch, config, regulator=lambda params, terms: terms.u_t)
    assert loss.item() == 0.0


def test_prediction_equal_to_time_has_unit_time_derivative():
    config = tiny_model_config()
    rng = np.random.default_rng(5)
    terms = physics_terms(
        _random_params(config, 0),
        _hidden(rng, 4),
        Tensor(rng.uniform(size=(4, 1))),
        config,
        predictor=lambda params, h, t: t.reshape(t.shape[0]),
    )
    assert np.allclose(terms.u_t.data, 1.0, atol=1e-12, rtol=0.0)
    assert np.allclose(terms.grad_h.data, 0.0, atol=1e-12, rtol=0.0)


def test_constant_prediction_has_zero_time_derivative():
    config = tiny_model_config()
    rng = np.random.default_rng(6)
    terms = physics_terms(
        _random_params(config, 0),
        _hidden(rng, 4),
        Tensor(rng.uniform(size=(4, 1))),
        config,
        predictor=lambda params, h, t: Tensor(np.full(h.shape[0], 3.0)),
    )
    assert np.allclose(terms.u_t.data, 0.0, atol=1e-12, rtol=0.0)
    assert np.array_equal(terms.u.data, np.full(4, 3.0))


def test_second_order_terms_for_cubic_predictor():
    config = tiny_model_config(k_pde=2)
    rng = np.random.default_rng(7)
    h_data = rng.normal(size=(3, 2))
    terms = physics_terms(
        _random_params(config, 0),
        Tensor(h_data, requires_grad=True),
        Tensor(rng.uniform(size=(3, 1))),
        config,
        predictor=lambda params, h, t: (h * h * h).sum(axis=-1) + t.reshape(t.shape[0]),
    )
    assert np.allclose(terms.u_t.data, 1.0, atol=1e-12)
    assert np.allclose(terms.grad_h.data, 3.0 * h_data**2, atol=1e-12)
    assert np.allclose(terms.second_h.data, 6.0 * h_data, atol=1e-12)
    assert terms.features.shape == (3, 5)
    assert np.allclose(terms.features.data[:, 3:], 6.0 * h_data, atol=1e-12)


# =========================================================================
# Pérdidas
# =========================================================================

def test_loss_terms_compose():
    config = tiny_model_config()
    params = _random_params(config, 1)
    batch = random_batch(np.random.default_rng(8), 5)
    no_physics = total_loss(params, batch, config, LossWeights(w_d=1.0, w_p=0.0)).item()
    assert no_physics == data_loss(params, batch, config).item()
    only_physics = total_loss(params, batch, config, LossWeights(w_d=0.0, w_p=1.0)).item()
    assert only_physics == pytest.approx(physics_loss(params, batch, config).item(), rel=1e-12)
    both = total_loss(params, batch, config, LossWeights(w_d=2.0, w_p=0.5)).item()
    assert both == pytest.approx(2.0 * no_physics + 0.5 * only_physics, rel=1e-12)


@pytest.mark.parametrize("k_pde", [1, 2])
@pytest.mark.parametrize("seed", [0, 1])
def test_total_loss_gradient_matches_finite_differences(k_pde, seed):
    config = tiny_model_config(k_pde=k_pde)
    params = _random_params(config, seed)
    batch = random_batch(np.random.default_rng(100 + seed), 3)
    weights = LossWeights(w_d=1.0, w_p=1.0)

    _, grads = loss_and_gradients(params, batch, config, weights, training=False)

    def value(flat):
        return total_loss(_unflatten(params, flat), batch, config, weights).item()

    numeric = central_difference(value, params.flatten())
    assert relative_error(grads.flatten(), numeric) < PHYSICS_TOLERANCE


@pytest.mark.parametrize("k_pde", [1, 2])
@pytest.mark.parametrize("seed", range(100))
def test_physics_gradient_matches_directional_differences(k_pde, seed):
    # la dirección no toca hsm.*: el FFN usa relu
    config = tiny_model_config(k_pde=k_pde)
    params = _random_params(config, seed)
    rng = np.random.default_rng(1000 + seed)
    batch = random_batch(rng, 3)
    weights = LossWeights(w_d=0.0, w_p=1.0)

    _, grads = loss_and_gradients(params, batch, config, weights, training=False)

    smooth = np.concatenate([np.full(a.size, not name.startswith("hsm.")) for name, a in params.items()])
    direction = rng.normal(size=smooth.size) * smooth
    direction /= np.linalg.norm(direction)
    base = params.flatten()

    def value(step):
        return total_loss(_unflatten(params, base + step * direction), batch, config, weights).item()

    numeric = (value(FD_STEP) - value(-FD_STEP)) / (2.0 * FD_STEP)
    analytic = float(grads.flatten() @ direction)
    scale = max(float(np.linalg.norm(grads.flatten() * smooth)), 1e-8)
    assert abs(analytic - numeric) < PHYSICS_TOLERANCE * scale
