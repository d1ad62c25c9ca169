"""
Configuración de las corridas (preprocesar / meta-entrenar / adaptar / evaluar).

Cada bloque es un modelo pydantic en modo estricto (claves desconocidas se
rechazan). Los valores por defecto reproducen el protocolo de referencia:
α interno 0.001, k = 8 pasos, lotes de 64 muestras, 5 tareas por meta-lote,
η = 0.1, 50 épocas, 10% de tareas de validación, dropout 0.1, 15 shots,
tope de RUL 125 y ventanas de 15 ciclos para C-MAPSS.

La raíz de datos por defecto se lee de la variable de entorno RUL_DATA_ROOT
(se admite un archivo .env).
"""
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.errors import ConfigError

# Cargar variables de entorno
load_dotenv()

DATA_ROOT_ENV = "RUL_DATA_ROOT"
"""Variable de entorno con el directorio de los archivos C-MAPSS"""

CMAPSS_FEATURES = 14
"""Sensores que conserva select_sensors"""

PROFILE_WINDOW = {"cmapss": 15, "synthetic": 30}
"""Longitud de ventana por defecto según el perfil de datos"""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class HsmConfig(_Strict):
    """Dimensiones del Hidden State Mapper (HSM)."""

    time_steps: Optional[int] = Field(default=None, ge=1)
    input_features: Optional[int] = Field(default=None, ge=1)
    embed_dim: int = Field(default=32, ge=1)
    key_dim: int = Field(default=16, ge=1)
    num_blocks: int = Field(default=2, ge=1)
    hidden_dim: int = Field(default=4, ge=1)
    ffn_dim: int = Field(default=64, ge=1)
    dropout_rate: float = Field(default=0.1, ge=0.0, lt=1.0)


class RulPredictorConfig(_Strict):
    """Anchos del predictor de RUL: tres capas ocultas tanh más la capa de salida o ∈ R^n."""

    hidden_widths: List[int] = Field(default_factory=lambda: [64, 64, 32])
    output_width: int = Field(default=16, ge=1)

    @field_validator("hidden_widths")
    @classmethod
    def _three_hidden_layers(cls, widths: List[int]) -> List[int]:
        if len(widths) != 3:
            raise ValueError("el predictor tiene exactamente cuatro capas afines (tres anchos ocultos)")
        if any(w < 1 for w in widths):
            raise ValueError("los anchos deben ser >= 1")
        return widths


class PgrConfig(_Strict):
    """Physics-Guided Regulator: orden de derivadas y capas ocultas."""

    k_pde: Literal[1, 2] = 1
    hidden_widths: List[int] = Field(default_factory=lambda: [64, 64])

    @field_validator("hidden_widths")
    @classmethod
    def _positive(cls, widths: List[int]) -> List[int]:
        if not widths or any(w < 1 for w in widths):
            raise ValueError("se requiere al menos una capa oculta de ancho >= 1")
        return widths

    def input_dim(self, hidden_dim: int) -> int:
        """d = 1 + d_h · k_pde."""
        return 1 + hidden_dim * self.k_pde


class ModelConfig(_Strict):
    hsm: HsmConfig = Field(default_factory=HsmConfig)
    rul: RulPredictorConfig = Field(default_factory=RulPredictorConfig)
    pgr: PgrConfig = Field(default_factory=PgrConfig)


class LossWeights(_Strict):
    """Pesos w_d (datos) y w_p (física) de la pérdida total."""

    w_d: float = Field(default=1.0, ge=0.0, allow_inf_nan=False)
    w_p: float = Field(default=1.0, ge=0.0, allow_inf_nan=False)


class MetaConfig(_Strict):
    """Bucle interno (Adam), bucle externo (promedio de desplazamientos) y adaptación."""

    inner_lr: float = Field(default=0.001, gt=0.0)
    inner_steps: int = Field(default=8, ge=0)
    inner_batch_size: int = Field(default=64, ge=1)
    meta_batch_size: int = Field(default=5, ge=1)
    outer_rate: float = Field(default=0.1, gt=0.0)
    epochs: int = Field(default=50, ge=1)
    max_iterations: Optional[int] = Field(default=None, ge=1)
    validation_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    validation_interval: int = Field(default=0, ge=0)
    shots: int = Field(default=15, ge=1)
    adapt_steps: int = Field(default=8, ge=0)
    support_fraction: float = Field(default=0.5, gt=0.0, lt=1.0)
    workers: int = Field(default=1, ge=1)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)


class SyntheticFleetSpec(_Strict):
    """
    Flota sintética de degradación (sustituto de los datos de bombas).

    Con signal_samples cada paso es una hora de señal cruda (segmentos de
    signal_samples muestras) y las columnas son las características de vibración.
    """

    n_units: int = Field(default=20, ge=1)
    min_life: int = Field(default=120, ge=2)
    max_life: int = Field(default=200, ge=2)
    n_features: int = Field(default=20, ge=1)
    noise_std: float = Field(default=0.02, ge=0.0)
    drift_scale: float = Field(default=0.3, ge=0.0)
    exponent_range: Tuple[float, float] = (1.2, 2.5)
    idle_probability: float = Field(default=0.0, ge=0.0, lt=1.0)
    shutdown_probability: float = Field(default=0.0, ge=0.0, lt=1.0)
    signal_samples: Optional[int] = Field(default=None, ge=8)
    sampling_rate: float = Field(default=256.0, gt=0.0)

    @model_validator(mode="after")
    def _ranges(self) -> "SyntheticFleetSpec":
        if self.max_life < self.min_life:
            raise ValueError("max_life debe ser >= min_life")
        low, high = self.exponent_range
        if not 0.0 < low <= high:
            raise ValueError("exponent_range debe cumplir 0 < bajo <= alto")
        return self


class DataConfig(_Strict):
    """Perfil de datos y parámetros del preprocesamiento."""

    profile: Literal["cmapss", "synthetic", "cache"] = "cmapss"
    subset: Literal["FD001", "FD002", "FD003", "FD004"] = "FD001"
    data_root: Optional[str] = None
    cache_path: Optional[str] = None
    window_length: Optional[int] = Field(default=None, ge=1)
    rul_cap: float = Field(default=125.0, gt=0.0)
    ewma_rho: float = Field(default=0.1, gt=0.0, le=1.0)
    standardization: Literal["condition", "global"] = "condition"
    condition_decimals: int = Field(default=2, ge=0)
    condition_merge_tolerance: float = Field(default=1.0, ge=0.0)
    condition_max_distance: float = Field(default=5.0, gt=0.0)
    max_train_units: Optional[int] = Field(default=None, ge=1)
    n_selected_features: int = Field(default=15, ge=1)
    segment_length: int = Field(default=40, ge=2)
    target_units: int = Field(default=5, ge=0)
    support_stage_fraction: float = Field(default=1.0, gt=0.0, le=1.0)
    synthetic: SyntheticFleetSpec = Field(default_factory=SyntheticFleetSpec)

    @model_validator(mode="after")
    def _cache_needs_path(self) -> "DataConfig":
        if self.profile == "cache" and not self.cache_path:
            raise ValueError("cache_path es obligatorio con profile='cache'")
        return self

    def resolved_window(self) -> Optional[int]:
        return self.window_length or PROFILE_WINDOW.get(self.profile)


class RunConfig(_Strict):
    """
    Configuración completa de una corrida.

    Las dimensiones de entrada del HSM (time_steps, input_features) pueden
    quedar en null: se completan a partir del perfil de datos (C-MAPSS: (15, 14);
    sintético: (30, n_selected_features)). Si se dan explícitamente deben coincidir.
    """

    data: DataConfig = Field(default_factory=DataConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    meta: MetaConfig = Field(default_factory=MetaConfig)
    loss: LossWeights = Field(default_factory=LossWeights)
    seed: int = Field(default=0, ge=0)
    output_dir: str = "runs"

    @model_validator(mode="after")
    def _resolve_input_shape(self) -> "RunConfig":
        hsm = self.model.hsm
        window = self.data.resolved_window()
        if self.data.profile == "cmapss":
            features = CMAPSS_FEATURES
        elif self.data.profile == "synthetic":
            features = self.data.n_selected_features
        else:
            features = None
        for name, expected in (("time_steps", window), ("input_features", features)):
            current = getattr(hsm, name)
            if expected is None:
                continue
            if current is None:
                object.__setattr__(hsm, name, expected)
            elif current != expected:
                raise ValueError(
                    f"model.hsm.{name}={current} no coincide con el perfil "
                    f"'{self.data.profile}' (se esperaba {expected})"
                )
        return self

    def with_input_shape(self, time_steps: int, input_features: int) -> "RunConfig":
        """Copia con las dimensiones de entrada fijadas (perfil 'cache')."""
        doc = self.model_dump(mode="json")
        doc["model"]["hsm"]["time_steps"] = int(time_steps)
        doc["model"]["hsm"]["input_features"] = int(input_features)
        return RunConfig.model_validate(doc)


# =========================================================================
# Carga, validación y combinación
# =========================================================================

def _format_errors(exc: ValidationError) -> List[str]:
    messages = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err.get("loc", ()))
        msg = err.get("msg", "valor inválido")
        messages.append(f"{path}: {msg}" if path else msg)
    return messages


def merge_config(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """
    Combina recursivamente dos documentos de configuración.

    Los diccionarios anidados se combinan clave a clave; cualquier otro valor de
    `overrides` reemplaza al de `base`. Ninguno de los dos se modifica.

    Examples:
        >>> merge_config({"meta": {"epochs": 50, "shots": 15}}, {"meta": {"epochs": 2}})
        {'meta': {'epochs': 2, 'shots': 15}}
    """
    merged: Dict[str, Any] = {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in base.items()}
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged


def default_document() -> Dict[str, Any]:
    """Documento JSON con todos los valores por defecto."""
    return RunConfig().model_dump(mode="json")


def validate_config(config: Union[RunConfig, Mapping[str, Any]]) -> List[str]:
    """
    Valida una configuración y devuelve la lista de errores (vacía si es válida).

    Args:
        config: RunConfig ya construido o documento (dict) a validar.

    Returns:
        List[str]: Mensajes "ruta.al.campo: motivo", ej. "meta.outer_rate: Input should be greater than 0".
    """
    document = config.model_dump(mode="json") if isinstance(config, RunConfig) else config
    try:
        RunConfig.model_validate(document)
    except ValidationError as exc:
        return _format_errors(exc)
    return []


def build_config(document: Mapping[str, Any]) -> RunConfig:
    """
    Construye un RunConfig desde un documento, combinándolo con los valores por defecto.

    Raises:
        ConfigError: Con la lista completa de campos inválidos.
    """
    if not isinstance(document, Mapping):
        raise ConfigError(["config: el documento debe ser un objeto JSON"])
    try:
        return RunConfig.model_validate(dict(document))
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Lee un documento JSON de configuración y lo valida en modo estricto.

    Args:
        path: Archivo JSON; None equivale a "{}" (todos los valores por defecto).
        overrides: Valores que pisan al documento (ej: los flags --seed/--subset de la CLI).

    Returns:
        RunConfig: Configuración validada.

    Raises:
        ConfigError: Archivo ilegible, JSON inválido, clave desconocida,
                     tipo incorrecto o valor fuera de rango.

    Examples:
        >>> cfg = load_config(None)
        >>> cfg.meta.inner_lr, cfg.meta.inner_steps, cfg.meta.outer_rate
        (0.001, 8, 0.1)
    """
    document: Any = {}
    if path is not None:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError([f"config: no se pudo leer {path}: {exc.strerror or exc}"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: JSON inválido en {path} (línea {exc.lineno}): {exc.msg}"]) from None
        if not isinstance(document, dict):
            raise ConfigError(["config: el documento debe ser un objeto JSON"])
    if overrides:
        document = merge_config(document, overrides)
    return build_config(document)


def resolve_data_root(config: RunConfig) -> Path:
    """
    Directorio de los archivos C-MAPSS: data.data_root o, si falta, RUL_DATA_ROOT.

    Raises:
        ConfigError: Si ninguno de los dos está definido.
    """
    root = config.data.data_root or os.getenv(DATA_ROOT_ENV)
    if not root:
        raise ConfigError([f"data.data_root: no definido (configure el campo o la variable {DATA_ROOT_ENV})"])
    return Path(root)
