"""
Las tres redes del modelo y el residuo de la EDP que las une.

    X (T×d_x) --HSM--> h (d_h) --+
                                 +--> predictor RUL --> û
    t (tiempo de operación) -----+
                                 ∂û/∂t, ∇_h û, diag ∇²_h û --PGR--> 𝒫(û, ∇_h û, ...)

    residuo r = ∂û/∂t − 𝒫(...)

Los pesos se guardan con forma (entrada, salida) y las capas calculan x @ W + b.
Todas las funciones aceptan lotes: X (B, T, d_x), h (B, d_h), t (B, 1).
"""
from dataclasses import dataclass
from typing import Callable, List, Mapping, Optional, Tuple, Union

import numpy as np

from src.autodiff.derivatives import input_gradients, second_input_derivative
from src.autodiff.ops import dropout, layer_norm, linear, softmax
from src.autodiff.tensor import Tensor, as_tensor, concat
from src.config.run_config import HsmConfig, ModelConfig, PgrConfig, RulPredictorConfig
from src.errors import ShapeError
from src.models.parameters import ParameterSet

TensorMap = Mapping[str, Tensor]
Params = Union[ParameterSet, TensorMap]


# =========================================================================
# Inicialización
# =========================================================================

def _uniform(rng: np.random.Generator, fan_in: int, shape: Tuple[int, ...]) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def hsm_shapes(cfg: HsmConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Nombres y formas de los parámetros del HSM, en orden canónico."""
    if cfg.time_steps is None or cfg.input_features is None:
        raise ShapeError("HsmConfig sin time_steps/input_features resueltos")
    T, dx, de, dk = cfg.time_steps, cfg.input_features, cfg.embed_dim, cfg.key_dim
    shapes = [("hsm.embed.W", (dx, de)), ("hsm.embed.b", (de,))]
    for i in range(cfg.num_blocks):
        p = f"hsm.block{i}"
        shapes += [
            (f"{p}.Wq", (T, dk)),
            (f"{p}.Wk", (T, dk)),
            (f"{p}.Wv", (T, T)),
            (f"{p}.ln1.gamma", (de,)),
            (f"{p}.ln1.beta", (de,)),
            (f"{p}.ffn.W1", (de, cfg.ffn_dim)),
            (f"{p}.ffn.b1", (cfg.ffn_dim,)),
            (f"{p}.ffn.W2", (cfg.ffn_dim, de)),
            (f"{p}.ffn.b2", (de,)),
            (f"{p}.ln2.gamma", (de,)),
            (f"{p}.ln2.beta", (de,)),
        ]
    shapes += [("hsm.proj.W", (de, cfg.hidden_dim)), ("hsm.proj.b", (cfg.hidden_dim,))]
    return shapes


def rul_shapes(cfg: RulPredictorConfig, hidden_dim: int) -> List[Tuple[str, Tuple[int, ...]]]:
    widths = [hidden_dim + 1] + list(cfg.hidden_widths) + [cfg.output_width]
    shapes = []
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        shapes += [(f"rul.layer{i}.W", (fan_in, fan_out)), (f"rul.layer{i}.b", (fan_out,))]
    shapes.append(("rul.rho", (cfg.output_width,)))
    return shapes


def pgr_shapes(cfg: PgrConfig, hidden_dim: int) -> List[Tuple[str, Tuple[int, ...]]]:
    widths = [cfg.input_dim(hidden_dim)] + list(cfg.hidden_widths) + [1]
    shapes = []
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        shapes += [(f"pgr.layer{i}.W", (fan_in, fan_out)), (f"pgr.layer{i}.b", (fan_out,))]
    return shapes


def parameter_shapes(config: ModelConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Directorio completo (nombre, forma) que fija la configuración del modelo."""
    d_h = config.hsm.hidden_dim
    return hsm_shapes(config.hsm) + rul_shapes(config.rul, d_h) + pgr_shapes(config.pgr, d_h)


def init_parameters(config: ModelConfig, rng: np.random.Generator) -> ParameterSet:
    """
    Inicializa Φ: pesos U(±1/√fan_in), sesgos en cero, ρ en unos y gamma de
    layer norm en unos.

    Args:
        config: Configuración de las tres redes (dimensiones de entrada resueltas).
        rng: Generador determinista.

    Returns:
        ParameterSet: Parámetros en orden canónico.
    """
    arrays = {}
    for name, shape in parameter_shapes(config):
        leaf = name.rsplit(".", 1)[-1]
        if leaf in ("rho", "gamma"):
            arrays[name] = np.ones(shape)
        elif leaf.startswith("b") or leaf == "beta":
            arrays[name] = np.zeros(shape)
        else:
            arrays[name] = _uniform(rng, shape[0], shape)
    return ParameterSet(arrays)


def as_tensor_map(params: Params) -> TensorMap:
    """Acepta un ParameterSet (se envuelve sin gradiente) o un mapa de Tensors."""
    if isinstance(params, ParameterSet):
        return params.as_tensors(requires_grad=False)
    return params


# =========================================================================
# Hidden State Mapper
# =========================================================================

def hsm_forward(
    params: Params,
    X: Union[Tensor, np.ndarray],
    config: HsmConfig,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    return_attention: bool = False,
):
    """
    Codifica una ventana de sensores en el estado oculto h.

    Por bloque: embedding por paso de tiempo, atención sobre las columnas de
    características (cada columna z_j ∈ R^T da q_j, k_j ∈ R^{d_k} y v_j ∈ R^T),
    escala 1/√d_k, suma ponderada de valores, FFN por paso de tiempo y
    conexión residual + layer norm alrededor de la atención y de la FFN por
    separado. Al final, promedio sobre el tiempo y proyección lineal d_e -> d_h.

    Args:
        params: Parámetros (al menos los "hsm.*").
        X: Ventana (T, d_x) o lote (B, T, d_x).
        config: Dimensiones del HSM.
        training: Activa el dropout (requiere rng).
        rng: Generador para las máscaras de dropout.
        return_attention: Si es True devuelve también la lista de matrices de atención.

    Returns:
        Tensor: h de forma (d_h,) o (B, d_h); con return_attention, (h, [A_bloque...]).

    Raises:
        ShapeError: Si X no tiene forma (T, d_x) / (B, T, d_x).
    """
    p = as_tensor_map(params)
    X = as_tensor(X)
    single = X.ndim == 2
    if single:
        X = X.reshape(1, *X.shape)
    if X.ndim != 3 or X.shape[1:] != (config.time_steps, config.input_features):
        raise ShapeError(
            f"HSM espera ventanas ({config.time_steps}, {config.input_features}), recibido {X.shape}"
        )
    scale = 1.0 / np.sqrt(config.key_dim)
    rate = config.dropout_rate

    E = linear(X, p["hsm.embed.W"], p["hsm.embed.b"])  # (B, T, d_e)
    attention = []
    for i in range(config.num_blocks):
        b = f"hsm.block{i}"
        Z = E.swap_last()  # (B, d_e, T): una fila por característica
        Q = Z @ p[f"{b}.Wq"]
        K = Z @ p[f"{b}.Wk"]
        V = Z @ p[f"{b}.Wv"]
        A = softmax((Q @ K.swap_last()) * scale, axis=-1)  # (B, d_e, d_e)
        attention.append(A)
        O = (A @ V).swap_last()  # (B, T, d_e)
        E = layer_norm(E + dropout(O, rate, training, rng), p[f"{b}.ln1.gamma"], p[f"{b}.ln1.beta"])
        F = linear(linear(E, p[f"{b}.ffn.W1"], p[f"{b}.ffn.b1"]).relu(), p[f"{b}.ffn.W2"], p[f"{b}.ffn.b2"])
        E = layer_norm(E + dropout(F, rate, training, rng), p[f"{b}.ln2.gamma"], p[f"{b}.ln2.beta"])

    h = linear(E.mean(axis=1), p["hsm.proj.W"], p["hsm.proj.b"])  # (B, d_h)
    if not h.requires_grad:
        h = Tensor(h.data, requires_grad=True)
    if single:
        h = h.reshape(config.hidden_dim)
    if return_attention:
        return h, attention
    return h


# =========================================================================
# Predictor de RUL y PGR
# =========================================================================

def rul_forward(params: Params, h: Tensor, t: Union[Tensor, float, np.ndarray]) -> Tensor:
    """
    û = Σ_i ρ_i · o_i con o = capa4(tanh(capa3(tanh(capa2(tanh(capa1([h, t])))))).

    Args:
        params: Parámetros (al menos los "rul.*").
        h: Estado oculto (d_h,) o lote (B, d_h).
        t: Tiempo de operación normalizado: escalar o (B, 1).

    Returns:
        Tensor: û escalar ([]) para una muestra o (B,) para un lote.
    """
    p = as_tensor_map(params)
    h, t = as_tensor(h), as_tensor(t)
    single = h.ndim == 1
    if single:
        h = h.reshape(1, h.shape[0])
        t = t.reshape(1, 1)
    elif t.ndim == 1:
        t = t.reshape(t.shape[0], 1)
    if t.shape != (h.shape[0], 1):
        raise ShapeError(f"rul_forward: t con forma {t.shape} para h {h.shape}")
    a = concat([h, t], axis=-1)
    for i in range(3):
        a = linear(a, p[f"rul.layer{i}.W"], p[f"rul.layer{i}.b"]).tanh()
    o = linear(a, p["rul.layer3.W"], p["rul.layer3.b"])
    u = (o * p["rul.rho"]).sum(axis=-1)
    return u.reshape(()) if single else u


def _pgr_depth(p: TensorMap) -> int:
    depth = 0
    while f"pgr.layer{depth}.W" in p:
        depth += 1
    return depth


def pgr_forward(params: Params, features: Tensor) -> Tensor:
    """
    MLP tanh del Physics-Guided Regulator; salida lineal escalar (∂û/∂t predicha).

    Args:
        params: Parámetros (al menos los "pgr.*").
        features: Vector (d,) o lote (B, d) armado por assemble_pgr_features.

    Returns:
        Tensor: Escalar o (B,).
    """
    p = as_tensor_map(params)
    features = as_tensor(features)
    single = features.ndim == 1
    if single:
        features = features.reshape(1, features.shape[0])
    depth = _pgr_depth(p)
    expected = p["pgr.layer0.W"].shape[0]
    if features.shape[-1] != expected:
        raise ShapeError(f"PGR espera {expected} entradas, recibido {features.shape[-1]}")
    a = features
    for i in range(depth - 1):
        a = linear(a, p[f"pgr.layer{i}.W"], p[f"pgr.layer{i}.b"]).tanh()
    out = linear(a, p[f"pgr.layer{depth - 1}.W"], p[f"pgr.layer{depth - 1}.b"])
    out = out.reshape(out.shape[0])
    return out.reshape(()) if single else out


def assemble_pgr_features(
    u: Tensor,
    grad_h: Tensor,
    second_h: Optional[Tensor] = None,
    k_pde: int = 1,
    expected_dim: Optional[int] = None,
) -> Tensor:
    """
    Arma la entrada del PGR: [û, ∇_h û (, diag ∇²_h û)] en ese orden.

    ∂û/∂t no forma parte de la entrada: es el objetivo que el PGR debe explicar.

    Args:
        u: û escalar o (B,).
        grad_h: ∇_h û, (d_h,) o (B, d_h).
        second_h: Diagonal de la Hessiana; obligatoria si y solo si k_pde = 2.
        k_pde: Orden de derivadas (1 o 2).
        expected_dim: Si se da, la longitud resultante debe coincidir.

    Returns:
        Tensor: (d,) o (B, d) con d = 1 + d_h · k_pde.

    Raises:
        ShapeError: Aridad incompatible con k_pde o longitud distinta de expected_dim.

    Examples:
        >>> assemble_pgr_features(Tensor(0.5), Tensor([0.1, -0.2])).data
        array([ 0.5,  0.1, -0.2])
    """
    if (second_h is not None) != (k_pde == 2):
        raise ShapeError(f"k_pde={k_pde} requiere {'la' if k_pde == 2 else 'ninguna'} derivada segunda")
    u, grad_h = as_tensor(u), as_tensor(grad_h)
    parts = [u.reshape(*u.shape, 1), grad_h]
    if second_h is not None:
        parts.append(as_tensor(second_h))
    features = concat(parts, axis=-1)
    if expected_dim is not None and features.shape[-1] != expected_dim:
        raise ShapeError(f"el vector de entrada del PGR mide {features.shape[-1]}, se esperaba {expected_dim}")
    return features


# =========================================================================
# Residuo de la EDP
# =========================================================================

@dataclass
class PhysicsTerms:
    """Derivadas de û en los puntos de colocación de un lote."""

    u: Tensor
    u_t: Tensor
    grad_h: Tensor
    second_h: Optional[Tensor]
    features: Tensor


Predictor = Callable[[Params, Tensor, Tensor], Tensor]
Regulator = Callable[[Params, PhysicsTerms], Tensor]


def default_regulator(params: Params, terms: PhysicsTerms) -> Tensor:
    return pgr_forward(params, terms.features)


def physics_terms(
    params: Params,
    h: Tensor,
    t: Tensor,
    config: ModelConfig,
    predictor: Predictor = rul_forward,
) -> PhysicsTerms:
    """
    Evalúa û y sus derivadas respecto de t y de h (diferenciables).

    Args:
        params: Parámetros (mapa de Tensors para entrenar).
        h: (B, d_h), salida de hsm_forward con su grafo.
        t: (B, 1) tiempos; si no es diferenciable se convierte en hoja diferenciable.
        config: Configuración del modelo (k_pde).
        predictor: Función (params, h, t) -> û (B,).

    Returns:
        PhysicsTerms
    """
    if not t.requires_grad:
        t = Tensor(t.data, requires_grad=True)
    if not h.requires_grad:
        h = Tensor(h.data, requires_grad=True)
    u = predictor(params, h, t)
    total = u.sum()
    u_t, grad_h = input_gradients(total, [t, h])
    second = second_input_derivative(total, h, first=grad_h) if config.pgr.k_pde == 2 else None
    features = assemble_pgr_features(
        u, grad_h, second, config.pgr.k_pde, expected_dim=config.pgr.input_dim(config.hsm.hidden_dim)
    )
    return PhysicsTerms(u=u, u_t=u_t.reshape(u.shape), grad_h=grad_h, second_h=second, features=features)


def pde_residual(
    params: Params,
    h: Tensor,
    t: Tensor,
    config: ModelConfig,
    predictor: Predictor = rul_forward,
    regulator: Regulator = default_regulator,
) -> Tensor:
    """
    r = ∂û/∂t − 𝒫_θ(û, ∇_h û (, diag ∇²_h û)) en cada punto (h, t) del lote.

    El resultado sigue siendo diferenciable respecto de los parámetros de las
    tres redes, de modo que la pérdida física entrena HSM, predictor y PGR.

    Args:
        params: Parámetros.
        h: Estados ocultos (B, d_h).
        t: Tiempos (B, 1).
        config: Configuración del modelo.
        predictor: Sustituible en pruebas (ej: û(h, t) = t).
        regulator: Sustituible en pruebas (ej: eco de ∂û/∂t, que anula el residuo).

    Returns:
        Tensor: Residuos (B,).

    Examples:
        >>> echo = lambda params, terms: terms.u_t
        >>> r = pde_residual(params, h, t, cfg, regulator=echo)   # r == 0 exacto
    """
    terms = physics_terms(params, h, t, config, predictor)
    regulated = as_tensor(regulator(params, terms))
    return terms.u_t - regulated.reshape(terms.u_t.shape)
