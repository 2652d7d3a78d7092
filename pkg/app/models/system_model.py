"""
Módulo de modelos de sistemas acoplados.

Un :class:`CoupledSystem` reúne la parte lineal ``A``, la no linealidad ``f``,
la deriva ``g`` y las envolventes declaradas. Las funciones trabajan por
lotes: ``linear_part(t)`` devuelve ``(..., dx, dx)``, ``nonlinearity(t, x, y)``
devuelve ``(..., dx)`` y ``drift(t, y)`` devuelve ``(..., dy)``. En tiempo
discreto ``t`` es un índice entero.
"""
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.envelope_model import ScalarEnvelope
from app.models.kernel_model import KernelSpec


class CoupledSystem(BaseModel):
    """
    Datos del par de sistemas (lineal desacoplado y no lineal acoplado).

    :ivar name: Nombre de la familia de catálogo que lo construyó.
    :ivar dim_x: Dimensión de X.
    :ivar dim_y: Dimensión de Y.
    :ivar discrete: ``True`` para sistemas en tiempo discreto.
    :ivar linear_part: ``t ↦ A(t)`` o ``n ↦ A_n``.
    :ivar nonlinearity: ``(t, x, y) ↦ f(t, x, y)``.
    :ivar drift: ``(t, y) ↦ g(t, y)``; en tiempo discreto, el mapa ``g_n``.
    :ivar drift_inverse: Inversa de ``g_n`` para órbitas hacia atrás (solo discreto).
    :ivar mu_envelope: Cota de ``|f|``.
    :ivar gamma_envelope: Constante de Lipschitz de ``f`` en ``x``.
    :ivar eps_envelope: Constante de Lipschitz conjunta usada en las condiciones de Hölder.
    :ivar M_bound: Cota uniforme de ``|f|``.
    :ivar N_eps_bound: Cota uniforme de ``ε(t)``.
    :ivar M2_bound: Constante de Lipschitz de ``g`` en ``y``.
    :ivar period: Período común de ``A``, ``f`` y ``g``.
    :ivar autonomous: ``True`` si los datos no dependen del tiempo.
    :ivar params: Parámetros resueltos de la familia.
    :ivar default_kernel: Núcleo de Green sugerido por la familia.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    dim_x: int = Field(..., ge=1)
    dim_y: int = Field(..., ge=0)
    discrete: bool = False
    linear_part: Callable
    nonlinearity: Callable
    drift: Callable
    drift_inverse: Optional[Callable] = None
    mu_envelope: ScalarEnvelope
    gamma_envelope: ScalarEnvelope
    eps_envelope: ScalarEnvelope
    M_bound: float = Field(1.0, ge=1.0)
    N_eps_bound: float = Field(1.0, ge=1.0)
    M2_bound: Optional[float] = Field(None, gt=0.0)
    period: Optional[float] = Field(None, gt=0.0)
    autonomous: bool = False
    params: Dict[str, float] = Field(default_factory=dict)
    default_kernel: Optional[KernelSpec] = None

    @model_validator(mode="after")
    def check_bounds(self) -> "CoupledSystem":
        if self.eps_envelope.sup() > self.N_eps_bound:
            raise ValueError(
                f"La envolvente ε (sup {self.eps_envelope.sup()}) supera N_eps_bound={self.N_eps_bound}"
            )
        if self.mu_envelope.sup() > self.M_bound:
            raise ValueError(f"La envolvente μ (sup {self.mu_envelope.sup()}) supera M_bound={self.M_bound}")
        return self

    def vector_field(self, coupled: bool) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        """
        Campo vectorial conjunto sobre el estado ``(x, y)`` concatenado.

        :param coupled: Incluye ``f`` cuando es ``True``.
        :type coupled: bool
        :rtype: Callable
        """
        dx = self.dim_x

        def field(t, state):
            x, y = state[..., :dx], state[..., dx:]
            tb = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
            xdot = np.einsum("...ij,...j->...i", self.linear_part(tb), x)
            if coupled:
                xdot = xdot + self.nonlinearity(tb, x, y)
            return np.concatenate([xdot, self.drift(tb, y)], axis=-1)

        return field

    def drift_field(self) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        return lambda t, y: self.drift(np.broadcast_to(np.asarray(t, dtype=float), y.shape[:-1]), y)


class ParameterSpec(BaseModel):
    """Rango cerrado y valor por defecto de un parámetro de catálogo."""
    name: str
    low: float
    high: float
    default: float
    integer: bool = False

    model_config = {
        "json_schema_extra": {"examples": [{"name": "eps", "low": 0.0, "high": 5.0, "default": 0.1}]}
    }


class CatalogEntry(BaseModel):
    """
    Familia paramétrica de sistemas.

    :ivar name: Identificador de la familia.
    :ivar parameters: Esquema de parámetros.
    :ivar builder: Función ``params -> CoupledSystem``.
    :ivar description: Descripción breve.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    parameters: List[ParameterSpec]
    builder: Callable[[Dict[str, float]], CoupledSystem]
    description: str = ""

    def schema_ranges(self) -> Dict[str, Tuple[float, float]]:
        return {p.name: (p.low, p.high) for p in self.parameters}
