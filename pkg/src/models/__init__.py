"""
Parámetros y redes del modelo (HSM, predictor de RUL, PGR).
"""
from src.models.parameters import ParameterSet
from src.models.networks import (
    init_parameters,
    parameter_shapes,
    hsm_forward,
    rul_forward,
    pgr_forward,
    assemble_pgr_features,
    pde_residual,
    physics_terms,
    PhysicsTerms,
)

__all__ = [
    "ParameterSet",
    "init_parameters",
    "parameter_shapes",
    "hsm_forward",
    "rul_forward",
    "pgr_forward",
    "assemble_pgr_features",
    "pde_residual",
    "physics_terms",
    "PhysicsTerms",
]
