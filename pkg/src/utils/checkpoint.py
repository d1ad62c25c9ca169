"""
Checkpoints de parámetros.

Formato del archivo:
    [8 bytes]  longitud N del encabezado (entero sin signo, little-endian)
    [N bytes]  encabezado JSON (UTF-8): versión, configuración, directorio de
               tensores (nombre, forma, desplazamiento y cantidad de valores),
               SHA-256 del bloque de datos, procedencia y metadatos
    [resto]    valores float64 little-endian de todos los tensores, en orden

La escritura es atómica: se escribe un temporal en el mismo directorio y se
reemplaza el destino con os.replace.
"""
import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from src.config.run_config import RunConfig, build_config
from src.errors import CheckpointError, ConfigError
from src.models.networks import parameter_shapes
from src.models.parameters import ParameterSet

CHECKPOINT_VERSION = 1
"""Versión del formato; load_checkpoint rechaza cualquier otra"""

CHECKPOINT_FORMAT = "rul-metapinn-checkpoint"
"""Identificador del formato dentro del encabezado"""

_LENGTH = struct.Struct("<Q")
_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    """
    Contenido de un checkpoint.

    Attributes:
        params: Parámetros (bit a bit idénticos a los guardados).
        config: Configuración de la corrida que los produjo.
        provenance: Semilla e iteración de origen.
        metadata: Datos extra (ej: label_scale, time_scale, forma de las ventanas).
    """

    params: ParameterSet
    config: RunConfig
    provenance: Dict[str, Any] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)


def save_checkpoint(
    params: ParameterSet,
    config: RunConfig,
    path: Union[str, Path],
    provenance: Optional[Dict[str, Any]] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Guarda params y config en `path`.

    Args:
        params: Parámetros a guardar.
        config: Configuración (se guarda completa en el encabezado).
        path: Archivo destino.
        provenance: Procedencia; por defecto {"seed": config.seed}.
        metadata: Datos extra serializables a JSON.

    Returns:
        Path: El archivo escrito.

    Raises:
        CheckpointError: Si los parámetros no coinciden con la configuración o no
                         se puede escribir.

    Examples:
        >>> save_checkpoint(phi, config, "runs/model.ckpt")
        PosixPath('runs/model.ckpt')
    """
    path = Path(path)
    _check_shapes(params, config)
    directory, chunks, offset = [], [], 0
    for name in params:
        values = np.ascontiguousarray(params[name], dtype=_DTYPE).reshape(-1)
        directory.append({"name": name, "shape": list(params[name].shape), "offset": offset, "count": int(values.size)})
        chunks.append(values.tobytes())
        offset += values.size * _DTYPE.itemsize
    payload = b"".join(chunks)
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": config.model_dump(mode="json"),
        "tensors": directory,
        "payload_bytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
        "provenance": provenance if provenance is not None else {"seed": config.seed},
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(_LENGTH.pack(len(header_bytes)))
                handle.write(header_bytes)
                handle.write(payload)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as exc:
        raise CheckpointError(f"no se pudo escribir {path}: {exc.strerror or exc}") from None
    return path


def _check_shapes(params: ParameterSet, config: RunConfig) -> None:
    expected = dict(parameter_shapes(config.model))
    actual = params.shapes()
    if set(expected) != set(actual):
        missing = sorted(set(expected) - set(actual))
        extra = sorted(set(actual) - set(expected))
        raise CheckpointError(f"parámetros incompatibles con la configuración (faltan {missing}, sobran {extra})")
    for name, shape in expected.items():
        if tuple(actual[name]) != tuple(shape):
            raise CheckpointError(f"{name}: forma {tuple(actual[name])}, la configuración pide {tuple(shape)}")


def read_header(path: Union[str, Path]) -> Dict[str, Any]:
    """Encabezado JSON de un checkpoint (sin leer los datos)."""
    header, _ = _read(Path(path))
    return header


def _read(path: Path):
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"no se pudo leer {path}: {exc.strerror or exc}") from None
    if len(blob) < _LENGTH.size:
        raise CheckpointError(f"{path}: archivo truncado (sin encabezado)")
    (length,) = _LENGTH.unpack_from(blob)
    if _LENGTH.size + length > len(blob):
        raise CheckpointError(f"{path}: archivo truncado (encabezado incompleto)")
    try:
        header = json.loads(blob[_LENGTH.size : _LENGTH.size + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: encabezado ilegible ({exc})") from None
    return header, blob[_LENGTH.size + length :]


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Carga un checkpoint y reconstruye parámetros bit a bit idénticos.

    Raises:
        CheckpointError: Versión distinta, checksum incorrecto (archivo truncado o
                         corrupto), formas del encabezado distintas de las de la
                         configuración o configuración inválida.
    """
    path = Path(path)
    header, payload = _read(path)
    if header.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: no es un checkpoint de este paquete")
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: versión {header.get('version')!r} no soportada (se espera {CHECKPOINT_VERSION})"
        )
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise CheckpointError(f"{path}: el checksum no coincide (archivo truncado o corrupto)")
    try:
        config = build_config(header["config"])
    except (ConfigError, KeyError) as exc:
        raise CheckpointError(f"{path}: configuración inválida en el encabezado ({exc})") from None

    arrays = []
    for entry in header.get("tensors", []):
        shape = tuple(entry["shape"])
        count = int(entry["count"])
        if int(np.prod(shape, dtype=np.int64)) != count:
            raise CheckpointError(f"{path}: {entry['name']}: forma {shape} no corresponde a {count} valores")
        start = int(entry["offset"])
        end = start + count * _DTYPE.itemsize
        if end > len(payload):
            raise CheckpointError(f"{path}: {entry['name']}: datos fuera del archivo")
        values = np.frombuffer(payload, dtype=_DTYPE, count=count, offset=start)
        arrays.append((entry["name"], values.astype(np.float64).reshape(shape)))
    params = ParameterSet(arrays)
    try:
        _check_shapes(params, config)
    except CheckpointError as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    return Checkpoint(params, config, dict(header.get("provenance", {})), dict(header.get("metadata", {})))
