"""
Pruebas del motor de diferenciación automática: gradientes contra diferencias
finitas centrales, derivadas anidadas y errores del grafo.
"""
import numpy as np
import pytest

from src.autodiff import (
    Tensor,
    forward_op,
    grad,
    input_gradient,
    layer_norm,
    no_grad,
    second_input_derivative,
    softmax,
)
from src.autodiff.gradcheck import central_difference, relative_error
from src.autodiff.ops import OPS, dropout, linear, mse
from src.errors import (
    CapabilityError,
    GraphConsumedError,
    NonFiniteError,
    NotScalarError,
    OpArgumentError,
    RulMetaPinnError,
    ShapeError,
    UnknownOpError,
)

OP_TOLERANCE = 1e-5


def _check_gradients(fn, *arrays, tol=OP_TOLERANCE):
    """Compara grad() con diferencias centrales para cada argumento de fn."""
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    analytic = grad(fn(*leaves), leaves)
    for i, array in enumerate(arrays):

        def scalar(x, i=i):
            args = [Tensor(a) for a in arrays]
            args[i] = Tensor(x)
            return fn(*args).item()

        numeric = central_difference(scalar, array)
        assert analytic[i].shape == np.shape(array)
        assert relative_error(analytic[i].data, numeric) < tol


def _weighted(op_kind, weights, **kwargs):
    """Reduce la salida de una operación a un escalar con pesos fijos."""
    return lambda *xs: (forward_op(op_kind, *xs, **kwargs) * Tensor(weights)).sum()


# =========================================================================
# Gradientes de cada operación
# =========================================================================

@pytest.mark.parametrize("seed", range(100))
def test_elementwise_ops_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4,))
    w = rng.normal(size=(3, 4))
    _check_gradients(_weighted("add", w), a, b)
    _check_gradients(_weighted("sub", w), a, b)
    _check_gradients(_weighted("mul", w), a, b)
    _check_gradients(_weighted("div", w), a, 1.5 + rng.uniform(size=(4,)))
    _check_gradients(_weighted("tanh", w), a)
    _check_gradients(_weighted("exp", w), a)


@pytest.mark.parametrize("seed", range(100))
def test_relu_away_from_kink(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.1, 1.0, size=(3, 4)) * rng.choice([-1.0, 1.0], size=(3, 4))
    _check_gradients(_weighted("relu", rng.normal(size=(3, 4))), a)


@pytest.mark.parametrize("seed", range(100))
def test_matrix_ops_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    x, W, b = rng.normal(size=(5, 3)), rng.normal(size=(3, 2)), rng.normal(size=(2,))
    _check_gradients(_weighted("matmul", rng.normal(size=(5, 2))), x, W)
    _check_gradients(_weighted("linear", rng.normal(size=(5, 2))), x, W, b)
    batched = rng.normal(size=(2, 4, 3))
    _check_gradients(_weighted("matmul", rng.normal(size=(2, 4, 2))), batched, W)


@pytest.mark.parametrize("seed", range(100))
def test_normalizing_ops_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(4, 5))
    gamma, beta = rng.normal(size=(5,)), rng.normal(size=(5,))
    _check_gradients(_weighted("softmax", rng.normal(size=(4, 5))), x)
    _check_gradients(_weighted("softmax", rng.normal(size=(4, 5)), axis=0), x)
    _check_gradients(_weighted("layer_norm", rng.normal(size=(4, 5))), x, gamma, beta)


@pytest.mark.parametrize("seed", range(100))
def test_reductions_and_concat_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(3, 2)), rng.normal(size=(3, 4))
    _check_gradients(_weighted("concat", rng.normal(size=(3, 6)), axis=-1), a, b)
    _check_gradients(_weighted("sum", rng.normal(size=(4,)), axis=0), b)
    _check_gradients(_weighted("mean", rng.normal(size=(3,)), axis=1), b)
    _check_gradients(lambda p, q: forward_op("mse", p, q), b, rng.normal(size=(3, 4)))


def test_parameter_used_twice_accumulates_both_paths():
    w = Tensor(3.0, requires_grad=True)
    x = Tensor(2.0, requires_grad=True)
    gw, gx = grad(w * x + w * x, [w, x])
    assert gw.item() == 4.0
    assert gx.item() == 6.0


@pytest.mark.parametrize("seed", range(20))
def test_softmax_rows_are_distributions(seed):
    rng = np.random.default_rng(seed)
    scores = Tensor(rng.normal(scale=10.0, size=(6, 7)))
    rows = softmax(scores).data
    assert np.all(rows >= 0.0)
    assert np.max(np.abs(rows.sum(axis=-1) - 1.0)) < 1e-12
    columns = softmax(scores, axis=0).data
    assert np.max(np.abs(columns.sum(axis=0) - 1.0)) < 1e-12


def test_layer_norm_of_constant_vector_is_zero():
    out = layer_norm(Tensor(np.full((2, 5), 3.7))).data
    assert np.allclose(out, 0.0, atol=1e-9)
    assert np.all(np.abs(out.mean(axis=-1)) < 1e-9)
    rng = np.random.default_rng(0)
    spread = layer_norm(Tensor(rng.normal(scale=4.0, size=(8, 6)))).data
    assert np.all(np.abs(spread.mean(axis=-1)) < 1e-9)


def test_input_gradient_of_square_of_first_coordinate():
    h = Tensor([[3.0, 5.0, -1.0]], requires_grad=True)
    u = (h * h * Tensor([[1.0, 0.0, 0.0]])).sum()
    g = input_gradient(u, h)
    assert np.array_equal(g.data, [[6.0, 0.0, 0.0]])
    t = Tensor([[0.4]], requires_grad=True)
    assert input_gradient((t * 1.0).sum(), t).data[0, 0] == 1.0


def test_every_dispatch_key_is_registered():
    expected = {
        "add", "sub", "mul", "div", "matmul", "linear", "tanh", "relu", "exp",
        "softmax", "layer_norm", "concat", "sum", "mean", "mse", "dropout",
    }
    assert expected <= set(OPS)


# =========================================================================
# Derivadas anidadas
# =========================================================================

def test_gradient_of_gradient_is_exact_for_cubic():
    x = Tensor(1.5, requires_grad=True)
    y = x**3
    (g1,) = grad(y, [x], create_graph=True)
    (g2,) = grad(g1, [x], create_graph=True)
    (g3,) = grad(g2, [x])
    assert g1.item() == pytest.approx(3 * 1.5**2, abs=1e-12)
    assert g2.item() == pytest.approx(6 * 1.5, abs=1e-12)
    assert g3.item() == pytest.approx(6.0, abs=1e-12)


def test_third_nested_graph_raises_capability_error():
    x = Tensor(0.5, requires_grad=True)
    y = x.tanh() * x
    (g1,) = grad(y, [x], create_graph=True)
    (g2,) = grad(g1, [x], create_graph=True)
    assert g2.depth == 2
    with pytest.raises(CapabilityError):
        grad(g2, [x], create_graph=True)


def test_second_input_derivative_matches_closed_form():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(3, 2))
    weights = np.array([[1.0, -2.0]])
    x = Tensor(data, requires_grad=True)
    y = (x.tanh() * Tensor(weights)).sum()
    second = second_input_derivative(y, x)
    t = np.tanh(data)
    assert np.allclose(second.data, weights * (-2.0 * t * (1.0 - t * t)), atol=1e-12)


def test_first_derivative_stays_differentiable_for_parameters():
    rng = np.random.default_rng(1)
    w0 = rng.normal(size=(2,))
    x0 = rng.normal(size=(4, 2))

    def penalty(w_value):
        w = Tensor(w_value, requires_grad=True)
        x = Tensor(x0, requires_grad=True)
        u = (x * w).tanh().sum()
        (dx,) = grad(u, [x], create_graph=True)
        return (dx * dx).mean(), w

    loss, w = penalty(w0)
    (analytic,) = grad(loss, [w])
    numeric = central_difference(lambda v: penalty(v)[0].item(), w0)
    assert relative_error(analytic.data, numeric) < 1e-4


# =========================================================================
# Reglas del grafo
# =========================================================================

def test_unreachable_input_gets_zero_gradient():
    x = Tensor([1.0, 2.0], requires_grad=True)
    z = Tensor([[3.0]], requires_grad=True)
    gx, gz = grad((x * x).sum(), [x, z])
    assert np.array_equal(gx.data, [2.0, 4.0])
    assert gz.shape == (1, 1)
    assert np.array_equal(gz.data, [[0.0]])


def test_non_scalar_output_requires_seed():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(NotScalarError):
        grad(x * 2.0, [x])
    (g,) = grad(x * 2.0, [x], grad_output=np.array([1.0, 0.5]))
    assert np.array_equal(g.data, [2.0, 1.0])


def test_consumed_graph_cannot_be_reused():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = (x * x).sum()
    grad(y, [x])
    with pytest.raises(GraphConsumedError):
        grad(y, [x])


def test_retained_graph_can_be_reused():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = (x * x).sum()
    first = grad(y, [x], retain_graph=True)[0].data
    second = grad(y, [x])[0].data
    assert np.array_equal(first, second)


def test_backward_accumulates_into_leaves():
    x = Tensor([1.0, 2.0], requires_grad=True)
    (x * x).sum().backward()
    (x * 3.0).sum().backward()
    assert np.array_equal(x.grad.data, [5.0, 7.0])


def test_no_grad_records_nothing():
    x = Tensor([1.0], requires_grad=True)
    with no_grad():
        y = x * 2.0
    assert not y.requires_grad
    assert y.is_leaf


def test_unknown_op_is_rejected():
    with pytest.raises(UnknownOpError):
        forward_op("conv2d", Tensor([1.0]))


def test_non_finite_values_are_rejected():
    with pytest.raises(NonFiniteError):
        Tensor([np.nan, 1.0])
    with pytest.raises(NonFiniteError):
        forward_op("exp", Tensor(1000.0))
    with pytest.raises(NonFiniteError):
        Tensor(1.0) / 0.0


def test_shape_rules():
    with pytest.raises(ShapeError):
        mse(Tensor([1.0, 2.0]), Tensor([1.0]))
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))
    with pytest.raises(ShapeError):
        linear(Tensor(np.ones((4, 3))), Tensor(np.ones((2, 5))))
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) + Tensor(np.ones((4,)))


def test_dropout_modes():
    x = Tensor(np.ones((50, 4)))
    assert dropout(x, 0.5, training=False) is x
    with pytest.raises(OpArgumentError):
        dropout(x, 0.5, training=True)
    out = dropout(x, 0.5, training=True, rng=np.random.default_rng(0)).data
    assert set(np.unique(out)) <= {0.0, 2.0}
    again = dropout(x, 0.5, training=True, rng=np.random.default_rng(0)).data
    assert np.array_equal(out, again)


@pytest.mark.parametrize("rate", [-0.1, 1.0, 1.5])
def test_dropout_rejects_rates_outside_unit_interval(rate):
    x = Tensor(np.ones((2, 2)))
    with pytest.raises(OpArgumentError) as info:
        dropout(x, rate, training=True, rng=np.random.default_rng(0))
    assert isinstance(info.value, RulMetaPinnError)
    with pytest.raises(OpArgumentError):
        dropout(x, rate, training=False)
