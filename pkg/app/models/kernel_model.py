"""
Módulo de modelos del núcleo de Green.

Contiene las constantes de dicotomía y tricotomía, las envolventes de
decaimiento certificadas de ``|𝒢(t,s)|`` y la especificación serializable de
un núcleo (proyección diagonal más constantes).
"""
import math
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.core.exceptions import DivergenceError
from app.models.envelope_model import ScalarEnvelope


class GrowthConstants(BaseModel):
    """
    Constantes de crecimiento: ``|T(t,s)| ≤ K1 e^{a1(t-s)}`` y ``|T(s,t)| ≤ K2 e^{a2(t-s)}`` para ``t ≥ s``.
    """
    K1: float = Field(..., gt=0.0)
    K2: float = Field(..., gt=0.0)
    a1: float = Field(..., gt=0.0)
    a2: float = Field(..., gt=0.0)


class DichotomyData(GrowthConstants):
    """
    Constantes de una dicotomía exponencial.

    :ivar D1: Constante de la rama estable.
    :ivar D2: Constante de la rama inestable.
    :ivar lambda1: Tasa de la rama estable.
    :ivar lambda2: Tasa de la rama inestable.
    """
    D1: float = Field(..., gt=0.0)
    D2: float = Field(..., gt=0.0)
    lambda1: float = Field(..., gt=0.0)
    lambda2: float = Field(..., gt=0.0)

    model_config = {
        "json_schema_extra": {
            "example": {"D1": 1, "D2": 1, "lambda1": 1, "lambda2": 1, "K1": 1, "K2": 1, "a1": 1, "a2": 1}
        }
    }

    @model_validator(mode="after")
    def check_rates(self) -> "DichotomyData":
        if self.a2 < self.lambda1 or self.a1 < self.lambda2:
            raise ValueError("Se requiere a2 ≥ λ1 y a1 ≥ λ2")
        return self


class TrichotomyData(BaseModel):
    """
    Constantes de una tricotomía exponencial con proyecciones diagonales.

    :ivar plus: Diagonal de ``P⁺`` (válida para ``t ≥ 0``).
    :ivar minus: Diagonal de ``P⁻`` (válida para ``t ≤ 0``).
    :ivar D: ``(D1, D2, D3, D4)``.
    :ivar rates: ``(λ1, λ2, λ3, λ4)``.
    """
    plus: List[float]
    minus: List[float]
    D: Tuple[float, float, float, float]
    rates: Tuple[float, float, float, float]

    @model_validator(mode="after")
    def check_projections(self) -> "TrichotomyData":
        if len(self.plus) != len(self.minus):
            raise ValueError("P⁺ y P⁻ deben tener la misma dimensión")
        for diag in (self.plus, self.minus):
            if any(v not in (0.0, 1.0) for v in diag):
                raise ValueError("Las proyecciones diagonales solo admiten 0 y 1")
        if min(self.D) <= 0 or min(self.rates) <= 0:
            raise ValueError("Las constantes de tricotomía deben ser positivas")
        return self


class DecayKind(str, Enum):
    EXPONENTIAL = "exponential"
    POLYNOMIAL = "polynomial"
    TRICHOTOMY = "trichotomy"


class DecayEnvelope(BaseModel):
    """
    Cota certificada de ``|𝒢(t,s)|``.

    - ``exponential``: ``d_forward e^{-rate_forward (t-s)}`` si ``t ≥ s`` y
      ``d_backward e^{-rate_backward (s-t)}`` si ``t < s``; una constante nula
      indica una rama idénticamente cero.
    - ``polynomial``: ``scale · (1 + s²)``.
    - ``trichotomy``: ensamblada por tramos a partir de :class:`TrichotomyData`.
    """
    kind: DecayKind = DecayKind.EXPONENTIAL
    d_forward: float = Field(0.0, ge=0.0)
    rate_forward: float = Field(1.0, gt=0.0)
    d_backward: float = Field(0.0, ge=0.0)
    rate_backward: float = Field(1.0, gt=0.0)
    scale: float = Field(1.0, gt=0.0)
    trichotomy: Optional[TrichotomyData] = None

    def sides(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        """Constantes ``((D, λ) adelante, (D, λ) atrás)`` de una cota exponencial equivalente."""
        if self.kind == DecayKind.TRICHOTOMY:
            d1, d2, d3, d4 = self.trichotomy.D
            l1, l2, l3, l4 = self.trichotomy.rates
            return (max(d1, d3, d1 * d3), min(l1, l3)), (max(d2, d4, d2 * d4), min(l2, l4))
        return (self.d_forward, self.rate_forward), (self.d_backward, self.rate_backward)

    def bound(self, t: Union[float, np.ndarray], s: Union[float, np.ndarray]) -> np.ndarray:
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        if self.kind == DecayKind.POLYNOMIAL:
            return self.scale * (1.0 + s ** 2)
        if self.kind == DecayKind.TRICHOTOMY:
            d1, d2, d3, d4 = self.trichotomy.D
            l1, l2, l3, l4 = self.trichotomy.rates
            gap = np.abs(t - s)
            forward = np.where(s >= 0, d1 * np.exp(-l1 * gap),
                               np.where(t < 0, d3 * np.exp(-l3 * gap), d1 * d3 * np.exp(-min(l1, l3) * gap)))
            backward = np.where(t >= 0, d2 * np.exp(-l2 * gap),
                                np.where(s < 0, d4 * np.exp(-l4 * gap), d2 * d4 * np.exp(-min(l2, l4) * gap)))
            return np.where(t >= s, forward, backward)
        return np.where(t >= s,
                        self.d_forward * np.exp(-self.rate_forward * (t - s)),
                        self.d_backward * np.exp(-self.rate_backward * (s - t)))

    def tail(self, weight: Union[ScalarEnvelope, float], radius: float, t: float = 0.0,
             discrete: bool = False, growth: Tuple[float, float] = (0.0, 0.0),
             growth_scale: float = 1.0) -> float:
        """
        Cota de ``∫_{|s-t|>radius} envolvente · peso ds`` (o la suma discreta correspondiente).

        El factor opcional ``growth_scale · e^{g |t-s|}`` modela potencias de las
        envolventes Δ dentro de las condiciones de Hölder; ``growth`` da ``g``
        para ``s < t`` y ``s > t``.

        :raises DivergenceError: Si la combinación no es integrable.
        """
        if isinstance(weight, ScalarEnvelope):
            w_sup = weight.sup()
        else:
            w_sup = float(weight)
        if w_sup == 0.0:
            return 0.0
        if self.kind == DecayKind.POLYNOMIAL:
            if any(g > 0 for g in growth):
                raise DivergenceError("Crecimiento exponencial contra una envolvente polinomial")
            if not isinstance(weight, ScalarEnvelope):
                raise DivergenceError("Peso constante no integrable contra (1+s²)")
            try:
                if discrete:
                    return growth_scale * self.scale * _discrete_polynomial_tail(weight, t, radius)
                return growth_scale * self.scale * weight.polynomial_tail(t, radius)
            except ArithmeticError as e:
                raise DivergenceError(str(e))
        total = 0.0
        for (d, rate), g in zip(self.sides(), growth):
            if d == 0.0:
                continue
            net = rate - g
            if net <= 0:
                raise DivergenceError(f"Tasa neta de decaimiento no positiva ({net})")
            if discrete:
                r = math.exp(-net)
                total += d * growth_scale * w_sup * r ** radius / (1.0 - r)
            else:
                total += d * growth_scale * w_sup * math.exp(-net * radius) / net
        return total


def _discrete_polynomial_tail(weight: ScalarEnvelope, m: float, radius: float) -> float:
    """
    Cota de ``Σ_{|k-m|≥radius} (1+k²) w(k-1)`` para el perfil racional.

    Usa ``1 + k² ≤ 3 (1 + (k-1)²)`` y ``Σ_{j≥J} 1/(1+j²) ≤ 1/(1+J²) + π/2 - arctan J``.
    """
    if weight.kind.value != "rational_decay":
        raise ArithmeticError("El peso no es sumable contra (1+n²)")

    def half(j0: float) -> float:
        if j0 < 0:
            return 1.0 + math.pi
        return 1.0 / (1.0 + j0 ** 2) + math.pi / 2 - math.atan(j0)

    return 3.0 * weight.value * (half(m + radius - 1.0) + half(radius + 1.0 - m))


class KernelSpec(BaseModel):
    """
    Especificación serializable de un núcleo de Green.

    :ivar projection: Diagonal de ``P``; ``None`` significa la identidad.
    :ivar dichotomy: Constantes de dicotomía, si se conocen.
    :ivar trichotomy: Constantes de tricotomía; su proyección empalmada reemplaza ``projection``.
    :ivar growth: Constantes de crecimiento cuando no hay dicotomía.
    :ivar envelope: Envolvente explícita; si falta se deriva de las constantes.
    """
    projection: Optional[List[float]] = None
    dichotomy: Optional[DichotomyData] = None
    trichotomy: Optional[TrichotomyData] = None
    growth: Optional[GrowthConstants] = None
    envelope: Optional[DecayEnvelope] = None

    model_config = {
        "json_schema_extra": {
            "example": {
                "projection": [1.0, 0.0],
                "dichotomy": {"D1": 1, "D2": 1, "lambda1": 1, "lambda2": 1, "K1": 1, "K2": 1, "a1": 1, "a2": 1},
            }
        }
    }

    def growth_constants(self) -> Optional[GrowthConstants]:
        if self.growth is not None:
            return self.growth
        if self.dichotomy is not None:
            d = self.dichotomy
            return GrowthConstants(K1=d.K1, K2=d.K2, a1=d.a1, a2=d.a2)
        return None
