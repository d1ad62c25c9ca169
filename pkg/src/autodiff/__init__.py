"""
Motor de diferenciación automática en modo reverso.
"""
from src.autodiff.tensor import Tensor, grad, no_grad, concat, is_grad_enabled
from src.autodiff.ops import forward_op, linear, softmax, layer_norm, dropout, mse
from src.autodiff.derivatives import input_gradient, input_gradients, second_input_derivative

__all__ = [
    "Tensor",
    "grad",
    "no_grad",
    "concat",
    "is_grad_enabled",
    "forward_op",
    "linear",
    "softmax",
    "layer_norm",
    "dropout",
    "mse",
    "input_gradient",
    "input_gradients",
    "second_input_derivative",
]
