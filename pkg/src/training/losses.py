"""
Pérdidas de datos, física y total, y el objetivo que optimiza el bucle interno.

Los puntos de colocación del residuo físico son los propios (h, t) del lote.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from src.autodiff.ops import mse
from src.autodiff.tensor import Tensor, grad, no_grad
from src.config.run_config import LossWeights, ModelConfig
from src.data.records import SampleBatch
from src.errors import EmptyTaskError
from src.models.networks import (
    Params,
    Predictor,
    Regulator,
    default_regulator,
    hsm_forward,
    physics_terms,
    rul_forward,
)
from src.models.parameters import ParameterSet


def _encode(
    params: Params,
    batch: SampleBatch,
    config: ModelConfig,
    training: bool,
    rng: Optional[np.random.Generator],
) -> Tuple[Tensor, Tensor]:
    if len(batch) == 0:
        raise EmptyTaskError("lote vacío")
    h = hsm_forward(params, batch.features, config.hsm, training=training, rng=rng)
    t = Tensor(batch.run_times.reshape(-1, 1), requires_grad=True)
    return h, t


def data_loss(
    params: Params,
    batch: SampleBatch,
    config: ModelConfig,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    predictor: Predictor = rul_forward,
) -> Tensor:
    """
    L_data = media de (u_i − û_i)² sobre el lote, con û = rul(hsm(X), t).

    Raises:
        EmptyTaskError: Si el lote no tiene muestras.
    """
    h, t = _encode(params, batch, config, training, rng)
    u_hat = predictor(params, h, t)
    return mse(u_hat, Tensor(batch.labels))


def physics_loss(
    params: Params,
    batch: SampleBatch,
    config: ModelConfig,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    predictor: Predictor = rul_forward,
    regulator: Regulator = default_regulator,
) -> Tensor:
    """
    L_phy = media de r_i² con r = ∂û/∂t − 𝒫(û, ∇_h û, ...) en los puntos del lote.

    Raises:
        EmptyTaskError: Si el lote no tiene muestras.
    """
    h, t = _encode(params, batch, config, training, rng)
    terms = physics_terms(params, h, t, config, predictor)
    residual = terms.u_t - regulator(params, terms).reshape(terms.u_t.shape)
    return (residual * residual).mean()


def total_loss(
    params: Params,
    batch: SampleBatch,
    config: ModelConfig,
    weights: LossWeights,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    predictor: Predictor = rul_forward,
    regulator: Regulator = default_regulator,
) -> Tensor:
    """
    L = w_d · L_data + w_p · L_phy.

    El HSM se evalúa una sola vez y sus estados ocultos se comparten entre
    ambos términos. Con w_p = 0 el término físico no se calcula.

    Args:
        params: Mapa de Tensors (hojas diferenciables para entrenar) o ParameterSet.
        batch: Lote de ventanas.
        config: Configuración del modelo.
        weights: Pesos (w_d, w_p).
        training: Activa el dropout del HSM.
        rng: Generador para el dropout.
        predictor, regulator: Sustituibles en pruebas.

    Returns:
        Tensor: Pérdida escalar.
    """
    h, t = _encode(params, batch, config, training, rng)
    labels = Tensor(batch.labels)
    if weights.w_p == 0.0:
        return mse(predictor(params, h, t), labels) * weights.w_d
    terms = physics_terms(params, h, t, config, predictor)
    residual = terms.u_t - regulator(params, terms).reshape(terms.u_t.shape)
    return mse(terms.u, labels) * weights.w_d + (residual * residual).mean() * weights.w_p


def loss_and_gradients(
    params: ParameterSet,
    batch: SampleBatch,
    config: ModelConfig,
    weights: LossWeights,
    training: bool = True,
    rng: Optional[np.random.Generator] = None,
    predictor: Predictor = rul_forward,
    regulator: Regulator = default_regulator,
) -> Tuple[float, ParameterSet]:
    """Valor de la pérdida total y su gradiente respecto de cada parámetro."""
    tensors = params.as_tensors(requires_grad=True)
    loss = total_loss(tensors, batch, config, weights, training, rng, predictor, regulator)
    grads = grad(loss, list(tensors.values()))
    return loss.item(), ParameterSet(zip(tensors.keys(), grads))


@dataclass
class PinnObjective:
    """
    Objetivo del bucle interno: pérdida total del modelo sobre un lote.

    Se invoca como objective(params, batch, rng) -> (pérdida, gradientes), que es
    la interfaz que espera inner_adapt; loss() evalúa sin gradientes ni dropout.
    """

    config: ModelConfig
    weights: LossWeights = field(default_factory=LossWeights)
    training: bool = True
    predictor: Predictor = rul_forward
    regulator: Regulator = default_regulator

    def __call__(
        self, params: ParameterSet, batch: SampleBatch, rng: Optional[np.random.Generator] = None
    ) -> Tuple[float, ParameterSet]:
        return loss_and_gradients(
            params, batch, self.config, self.weights, self.training, rng, self.predictor, self.regulator
        )

    def loss(self, params: ParameterSet, batch: SampleBatch) -> float:
        value = total_loss(
            params, batch, self.config, self.weights, False, None, self.predictor, self.regulator
        )
        return value.item()

    def predict(self, params: ParameterSet, batch: SampleBatch) -> np.ndarray:
        """û en unidades de RUL (reescalada por label_scale)."""
        with no_grad():
            h = hsm_forward(params, batch.features, self.config.hsm, training=False)
            u_hat = self.predictor(params, h, Tensor(batch.run_times.reshape(-1, 1)))
        return u_hat.data * batch.label_scale
