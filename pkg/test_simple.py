"""
Verificación rápida de que el paquete y la CLI se importan.
"""


def test_imports():
    from main import cli_dispatch  # noqa: F401
    from src.autodiff import Tensor, grad  # noqa: F401
    from src.graph import create_meta_training_graph, meta_train  # noqa: F401
    from src.state import MetaTrainingState  # noqa: F401
