"""
Módulo de familias paramétricas del catálogo.

Cada familia construye un :class:`CoupledSystem` cuyas envolventes son
propiedades analíticas de las funciones usadas (``|tanh| ≤ 1`` y constante de
Lipschitz 1, normas euclídeas), junto con el núcleo de Green sugerido.
"""
import math
from typing import Callable, Dict

import numpy as np

from app.models.envelope_model import EnvelopeKind, ScalarEnvelope, constant
from app.models.kernel_model import (
    DecayEnvelope,
    DecayKind,
    DichotomyData,
    GrowthConstants,
    KernelSpec,
    TrichotomyData,
)
from app.models.system_model import CatalogEntry, CoupledSystem, ParameterSpec

M2_FLOOR = 1e-9
"""Valor de ``M2`` para derivas nulas (límite ``M2 → 0``)."""


def _constant_matrix(mat: np.ndarray) -> Callable:
    mat = np.asarray(mat, dtype=float)
    return lambda t: np.broadcast_to(mat, np.shape(t) + mat.shape)


def _linear_drift(rate: float) -> Callable:
    return lambda t, y: -rate * np.asarray(y, dtype=float)


def _identity_dichotomy(rate: float = 1.0) -> DichotomyData:
    return DichotomyData(D1=1.0, D2=1.0, lambda1=rate, lambda2=1.0, K1=1.0, K2=1.0, a1=1.0, a2=max(rate, 1.0))


def build_scalar_tanh(p: Dict[str, float]) -> CoupledSystem:
    eps, a, drift, coupling = p["eps"], p["a"], p["drift"], p["coupling"]
    eps_env = eps * max(1.0, coupling)
    return CoupledSystem(
        name="scalar_tanh",
        dim_x=1,
        dim_y=1,
        linear_part=_constant_matrix([[-a]]),
        nonlinearity=lambda t, x, y: eps * np.tanh(x + coupling * y[..., :1]),
        drift=_linear_drift(drift),
        mu_envelope=constant(eps),
        gamma_envelope=constant(eps),
        eps_envelope=constant(eps_env),
        M_bound=max(1.0, eps),
        N_eps_bound=max(1.0, eps_env),
        M2_bound=drift if drift > 0 else M2_FLOOR,
        autonomous=True,
        params=p,
        default_kernel=KernelSpec(
            dichotomy=DichotomyData(D1=1.0, D2=1.0, lambda1=a, lambda2=1.0, K1=1.0, K2=1.0, a1=1.0, a2=a)
        ),
    )


def build_zero_f(p: Dict[str, float]) -> CoupledSystem:
    dim = int(p["dim"])
    return CoupledSystem(
        name="zero_f",
        dim_x=dim,
        dim_y=1,
        linear_part=_constant_matrix(-np.eye(dim)),
        nonlinearity=lambda t, x, y: np.zeros(np.broadcast_shapes(x.shape, y.shape[:-1] + (dim,))),
        drift=_linear_drift(0.0),
        mu_envelope=constant(0.0),
        gamma_envelope=constant(0.0),
        eps_envelope=constant(0.0),
        M2_bound=M2_FLOOR,
        autonomous=True,
        params=p,
        default_kernel=KernelSpec(dichotomy=_identity_dichotomy()),
    )


def build_saddle_tanh(p: Dict[str, float]) -> CoupledSystem:
    eps, coupling, drift = p["eps"], p["coupling"], p["drift"]
    eps_env = eps * max(1.0, math.sqrt(2.0) * coupling)
    return CoupledSystem(
        name="saddle_tanh",
        dim_x=2,
        dim_y=1,
        linear_part=_constant_matrix(np.diag([-1.0, 1.0])),
        nonlinearity=lambda t, x, y: eps * np.tanh(x + coupling * y[..., :1]),
        drift=_linear_drift(drift),
        mu_envelope=constant(eps * math.sqrt(2.0)),
        gamma_envelope=constant(eps),
        eps_envelope=constant(eps_env),
        M_bound=max(1.0, eps * math.sqrt(2.0)),
        N_eps_bound=max(1.0, eps_env),
        M2_bound=drift if drift > 0 else M2_FLOOR,
        autonomous=True,
        params=p,
        default_kernel=KernelSpec(
            projection=[1.0, 0.0],
            dichotomy=DichotomyData(D1=1.0, D2=1.0, lambda1=1.0, lambda2=1.0, K1=1.0, K2=1.0, a1=1.0, a2=1.0),
        ),
    )


def _rotation_decay_matrix(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (3, 3))
    out[..., 0, 1] = -1.0
    out[..., 1, 0] = 1.0
    out[..., 2, 2] = -2.0 * t / (1.0 + t ** 2)
    return out


def build_rotation_decay_3d(p: Dict[str, float]) -> CoupledSystem:
    c = p["c"]
    profile = ScalarEnvelope(kind=EnvelopeKind.RATIONAL_DECAY, value=c)

    def f(t, x, y):
        t = np.asarray(t, dtype=float)
        return (c / (1.0 + t ** 2) ** 2)[..., None] * np.tanh(x)

    return CoupledSystem(
        name="rotation_decay_3d",
        dim_x=3,
        dim_y=1,
        linear_part=_rotation_decay_matrix,
        nonlinearity=f,
        drift=_linear_drift(0.0),
        mu_envelope=profile.scaled(math.sqrt(3.0)),
        gamma_envelope=profile,
        eps_envelope=profile,
        M_bound=max(1.0, math.sqrt(3.0) * c),
        M2_bound=M2_FLOOR,
        params=p,
        default_kernel=KernelSpec(
            projection=[0.0, 0.0, 1.0],
            envelope=DecayEnvelope(kind=DecayKind.POLYNOMIAL, scale=1.0),
            growth=GrowthConstants(K1=2.0, K2=2.0, a1=1.0, a2=1.0),
        ),
    )


def build_periodic_tanh(p: Dict[str, float]) -> CoupledSystem:
    eps, omega = p["eps"], p["omega"]
    profile = ScalarEnvelope(kind=EnvelopeKind.SINUSOIDAL, value=eps, omega=omega)

    def f(t, x, y):
        return profile(t)[..., None] * np.tanh(x)

    return CoupledSystem(
        name="periodic_tanh",
        dim_x=1,
        dim_y=1,
        linear_part=_constant_matrix([[-1.0]]),
        nonlinearity=f,
        drift=_linear_drift(0.0),
        mu_envelope=profile,
        gamma_envelope=profile,
        eps_envelope=profile,
        M_bound=max(1.0, eps),
        N_eps_bound=max(1.0, eps),
        M2_bound=M2_FLOOR,
        period=2.0 * math.pi / omega,
        params=p,
        default_kernel=KernelSpec(dichotomy=_identity_dichotomy()),
    )


def coppel_phi(t, c: float) -> np.ndarray:
    """``φ(t) = 1`` para ``t ≤ 0`` y ``1 / (1 + c t² e^{-t})`` para ``t > 0``."""
    t = np.asarray(t, dtype=float)
    tp = np.maximum(t, 0.0)
    return 1.0 / (1.0 + c * tp ** 2 * np.exp(-tp))


def build_coppel_scalar(p: Dict[str, float]) -> CoupledSystem:
    eps, c = p["eps"], p["c"]

    def a_of_t(t):
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 0.0)
        log_derivative = -c * (2.0 * tp - tp ** 2) * np.exp(-tp) / (1.0 + c * tp ** 2 * np.exp(-tp))
        return (log_derivative - 1.0)[..., None, None]

    k = 1.0 + 4.0 * c * math.exp(-2.0)
    return CoupledSystem(
        name="coppel_scalar",
        dim_x=1,
        dim_y=1,
        linear_part=a_of_t,
        nonlinearity=lambda t, x, y: eps * np.tanh(x),
        drift=_linear_drift(0.0),
        mu_envelope=constant(eps),
        gamma_envelope=constant(eps),
        eps_envelope=constant(eps),
        M_bound=max(1.0, eps),
        N_eps_bound=max(1.0, eps),
        M2_bound=M2_FLOOR,
        params=p,
        default_kernel=KernelSpec(
            dichotomy=DichotomyData(D1=k, D2=1.0, lambda1=1.0, lambda2=1.0, K1=k, K2=k, a1=1.0, a2=1.0)
        ),
    )


def build_trichotomy_block(p: Dict[str, float]) -> CoupledSystem:
    eps = p["eps"]

    def a_of_t(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (2, 2))
        out[..., 0, 0] = -np.tanh(t)
        out[..., 1, 1] = -1.0
        return out

    return CoupledSystem(
        name="trichotomy_block",
        dim_x=2,
        dim_y=1,
        linear_part=a_of_t,
        nonlinearity=lambda t, x, y: eps * np.tanh(x),
        drift=_linear_drift(0.0),
        mu_envelope=constant(eps * math.sqrt(2.0)),
        gamma_envelope=constant(eps),
        eps_envelope=constant(eps),
        M_bound=max(1.0, eps * math.sqrt(2.0)),
        N_eps_bound=max(1.0, eps),
        M2_bound=M2_FLOOR,
        params=p,
        default_kernel=KernelSpec(
            trichotomy=TrichotomyData(plus=[1.0, 1.0], minus=[0.0, 1.0], D=(2.0, 1.0, 1.0, 2.0), rates=(1.0, 1.0, 1.0, 1.0)),
            growth=GrowthConstants(K1=1.0, K2=1.0, a1=1.0, a2=1.0),
        ),
    )


def build_discrete_scalar_tanh(p: Dict[str, float]) -> CoupledSystem:
    eps, a, drift = p["eps"], p["a"], p["drift"]
    rate = -math.log(a)
    return CoupledSystem(
        name="discrete_scalar_tanh",
        dim_x=1,
        dim_y=1,
        discrete=True,
        linear_part=_constant_matrix([[a]]),
        nonlinearity=lambda n, x, y: eps * np.tanh(x),
        drift=lambda n, y: drift * np.asarray(y, dtype=float),
        drift_inverse=lambda n, y: np.asarray(y, dtype=float) / drift,
        mu_envelope=constant(eps),
        gamma_envelope=constant(eps),
        eps_envelope=constant(eps),
        M_bound=max(1.0, eps),
        N_eps_bound=max(1.0, eps),
        M2_bound=drift,
        autonomous=True,
        params=p,
        default_kernel=KernelSpec(
            dichotomy=DichotomyData(D1=1.0, D2=1.0, lambda1=rate, lambda2=1.0, K1=1.0, K2=1.0, a1=1.0, a2=rate)
        ),
    )


def discrete_rotation_matrix(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    out = np.zeros(n.shape + (3, 3))
    out[..., 0, 0] = math.cos(1.0)
    out[..., 0, 1] = -math.sin(1.0)
    out[..., 1, 0] = math.sin(1.0)
    out[..., 1, 1] = math.cos(1.0)
    out[..., 2, 2] = (1.0 + n ** 2) / (1.0 + (n + 1.0) ** 2)
    return out


def build_discrete_rotation_decay_3d(p: Dict[str, float]) -> CoupledSystem:
    c = p["c"]
    profile = ScalarEnvelope(kind=EnvelopeKind.RATIONAL_DECAY, value=c)

    def f(n, x, y):
        return profile(n)[..., None] * np.tanh(x)

    return CoupledSystem(
        name="discrete_rotation_decay_3d",
        dim_x=3,
        dim_y=1,
        discrete=True,
        linear_part=discrete_rotation_matrix,
        nonlinearity=f,
        drift=lambda n, y: np.asarray(y, dtype=float),
        drift_inverse=lambda n, y: np.asarray(y, dtype=float),
        mu_envelope=profile.scaled(math.sqrt(3.0)),
        gamma_envelope=profile,
        eps_envelope=profile,
        M_bound=max(1.0, math.sqrt(3.0) * c),
        M2_bound=1.0,
        params=p,
        default_kernel=KernelSpec(
            projection=[0.0, 0.0, 1.0],
            envelope=DecayEnvelope(kind=DecayKind.POLYNOMIAL, scale=1.0),
            growth=GrowthConstants(K1=2.0, K2=2.0, a1=1.0, a2=1.0),
        ),
    )


def build_discrete_zero_f(p: Dict[str, float]) -> CoupledSystem:
    dim = int(p["dim"])
    rate = math.log(2.0)
    return CoupledSystem(
        name="discrete_zero_f",
        dim_x=dim,
        dim_y=1,
        discrete=True,
        linear_part=_constant_matrix(0.5 * np.eye(dim)),
        nonlinearity=lambda n, x, y: np.zeros(np.broadcast_shapes(x.shape, y.shape[:-1] + (dim,))),
        drift=lambda n, y: np.asarray(y, dtype=float),
        drift_inverse=lambda n, y: np.asarray(y, dtype=float),
        mu_envelope=constant(0.0),
        gamma_envelope=constant(0.0),
        eps_envelope=constant(0.0),
        M2_bound=1.0,
        autonomous=True,
        params=p,
        default_kernel=KernelSpec(
            dichotomy=DichotomyData(D1=1.0, D2=1.0, lambda1=rate, lambda2=1.0, K1=1.0, K2=1.0, a1=1.0, a2=rate)
        ),
    )


CATALOG_ENTRIES = [
    CatalogEntry(
        name="scalar_tanh",
        description="A = -a, f = eps·tanh(x + coupling·y), g = -drift·y",
        parameters=[
            ParameterSpec(name="eps", low=0.0, high=5.0, default=0.1),
            ParameterSpec(name="a", low=0.05, high=10.0, default=1.0),
            ParameterSpec(name="drift", low=0.0, high=5.0, default=0.0),
            ParameterSpec(name="coupling", low=0.0, high=5.0, default=0.0),
        ],
        builder=build_scalar_tanh,
    ),
    CatalogEntry(
        name="zero_f",
        description="A = -I, f ≡ 0, g ≡ 0",
        parameters=[ParameterSpec(name="dim", low=1, high=4, default=1, integer=True)],
        builder=build_zero_f,
    ),
    CatalogEntry(
        name="saddle_tanh",
        description="A = diag(-1, 1), f = eps·tanh(x + coupling·y), g = -drift·y",
        parameters=[
            ParameterSpec(name="eps", low=0.0, high=5.0, default=0.1),
            ParameterSpec(name="coupling", low=0.0, high=5.0, default=0.0),
            ParameterSpec(name="drift", low=0.0, high=5.0, default=0.0),
        ],
        builder=build_saddle_tanh,
    ),
    CatalogEntry(
        name="rotation_decay_3d",
        description="Rotación más diagonal -2t/(1+t²), f = c/(1+t²)²·tanh(x)",
        parameters=[ParameterSpec(name="c", low=0.0, high=1.0, default=0.2 / math.pi)],
        builder=build_rotation_decay_3d,
    ),
    CatalogEntry(
        name="periodic_tanh",
        description="A = -1, f = eps·(2 + sin ωt)/3·tanh(x), período 2π/ω",
        parameters=[
            ParameterSpec(name="eps", low=0.0, high=5.0, default=0.1),
            ParameterSpec(name="omega", low=0.1, high=10.0, default=1.0),
        ],
        builder=build_periodic_tanh,
    ),
    CatalogEntry(
        name="coppel_scalar",
        description="A = φ'/φ - 1 con φ = 1/(1 + c t² e^{-t}) en t > 0, f = eps·tanh(x)",
        parameters=[
            ParameterSpec(name="eps", low=0.0, high=1.0, default=0.001),
            ParameterSpec(name="c", low=0.0, high=10.0, default=1.0),
        ],
        builder=build_coppel_scalar,
    ),
    CatalogEntry(
        name="trichotomy_block",
        description="A = diag(-tanh t, -1), f = eps·tanh(x)",
        parameters=[ParameterSpec(name="eps", low=0.0, high=1.0, default=0.1)],
        builder=build_trichotomy_block,
    ),
    CatalogEntry(
        name="discrete_scalar_tanh",
        description="A_n = a, f_n = eps·tanh(x), g_n(y) = drift·y",
        parameters=[
            ParameterSpec(name="eps", low=0.0, high=0.4, default=0.1),
            ParameterSpec(name="a", low=0.45, high=0.95, default=0.5),
            ParameterSpec(name="drift", low=0.1, high=10.0, default=1.0),
        ],
        builder=build_discrete_scalar_tanh,
    ),
    CatalogEntry(
        name="discrete_rotation_decay_3d",
        description="Rotación discreta más diagonal (1+n²)/(1+(n+1)²), f_n = c/(1+n²)²·tanh(x)",
        parameters=[ParameterSpec(name="c", low=0.0, high=0.3, default=0.2 / math.pi)],
        builder=build_discrete_rotation_decay_3d,
    ),
    CatalogEntry(
        name="discrete_zero_f",
        description="A_n = I/2, f_n ≡ 0, g_n = identidad",
        parameters=[ParameterSpec(name="dim", low=1, high=4, default=1, integer=True)],
        builder=build_discrete_zero_f,
    ),
]
