"""
Pérdidas, optimizador y bucles de entrenamiento.
"""
from src.training.losses import data_loss, physics_loss, total_loss, loss_and_gradients, PinnObjective
from src.training.optimizer import AdamState, adam_step
from src.training.meta import inner_adapt, meta_update, few_shot_adapt
from src.training.joint import joint_train

__all__ = [
    "data_loss",
    "physics_loss",
    "total_loss",
    "loss_and_gradients",
    "PinnObjective",
    "AdamState",
    "adam_step",
    "inner_adapt",
    "meta_update",
    "few_shot_adapt",
    "joint_train",
]
