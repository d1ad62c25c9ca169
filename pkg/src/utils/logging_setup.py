"""
Configuración del logging del paquete.
"""
import logging
import sys

ROOT_LOGGER = "rul_metapinn"


def get_logger(module_name: str) -> logging.Logger:
    """
    Devuelve el logger del módulo dentro de la jerarquía "rul_metapinn".

    Args:
        module_name: Normalmente __name__ del módulo que llama (ej: "src.data.cmapss").

    Returns:
        logging.Logger: Logger hijo, ej. "rul_metapinn.data.cmapss".
    """
    short = module_name[4:] if module_name.startswith("src.") else module_name
    return logging.getLogger(f"{ROOT_LOGGER}.{short}")


def configure_logging(verbose: bool = True) -> None:
    """
    Instala un único handler en stderr para el logger raíz del paquete.

    Llamarla varias veces no duplica handlers.

    Args:
        verbose: Si es True el nivel es INFO; si es False solo WARNING y superiores.
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(logging.INFO if verbose else logging.WARNING)
    installed = [h for h in logger.handlers if getattr(h, "_rul_metapinn", False)]
    if installed:
        # sin flush: el stream anterior puede estar cerrado
        installed[0].stream = sys.stderr
    else:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s [%(name)s] %(message)s"))
        handler._rul_metapinn = True
        logger.addHandler(handler)
    logger.propagate = False
