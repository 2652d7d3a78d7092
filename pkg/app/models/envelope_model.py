"""
Módulo de envolventes escalares.

Las envolventes μ, γ y ε de un sistema son perfiles analíticos cerrados, de
forma que los cálculos de hipótesis puedan usar sus supremos e integrales
ponderadas exactas.
"""
import math
from enum import Enum
from typing import Union

import numpy as np
from pydantic import BaseModel, Field


class EnvelopeKind(str, Enum):
    CONSTANT = "constant"
    RATIONAL_DECAY = "rational_decay"
    SINUSOIDAL = "sinusoidal"


class ScalarEnvelope(BaseModel):
    """
    Perfil escalar no negativo ``t ↦ w(t)``.

    - ``constant``: ``value``.
    - ``rational_decay``: ``value / (1 + t²)²``.
    - ``sinusoidal``: ``value · (2 + sin(ω t)) / 3``, entre ``value/3`` y ``value``.

    :ivar kind: Tipo de perfil.
    :vartype kind: EnvelopeKind
    :ivar value: Amplitud (supremo del perfil).
    :vartype value: float
    :ivar omega: Frecuencia angular del perfil sinusoidal.
    :vartype omega: float
    """
    kind: EnvelopeKind = EnvelopeKind.CONSTANT
    value: float = Field(0.0, ge=0.0, description="Supremo del perfil.")
    omega: float = Field(1.0, gt=0.0, description="Frecuencia del perfil sinusoidal.")

    model_config = {
        "frozen": True,
        "json_schema_extra": {"examples": [{"kind": "constant", "value": 0.1, "omega": 1.0}]},
    }

    def __call__(self, t: Union[float, np.ndarray]) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == EnvelopeKind.RATIONAL_DECAY:
            return self.value / (1.0 + t ** 2) ** 2
        if self.kind == EnvelopeKind.SINUSOIDAL:
            return self.value * (2.0 + np.sin(self.omega * t)) / 3.0
        return np.full(t.shape, self.value)

    def sup(self) -> float:
        return self.value

    def is_zero(self) -> bool:
        return self.value == 0.0

    def polynomial_moment(self) -> float:
        """
        Integral ``∫ (1 + s²) w(s) ds`` sobre toda la recta.

        :return: ``value·π`` para el perfil racional, ``0`` para el perfil nulo
                 y ``inf`` en otro caso.
        :rtype: float
        """
        if self.is_zero():
            return 0.0
        if self.kind == EnvelopeKind.RATIONAL_DECAY:
            return self.value * math.pi
        return math.inf

    def polynomial_tail(self, t: float, radius: float) -> float:
        """
        Cota de ``∫_{|s-t|>radius} (1 + s²) w(s) ds`` para el perfil racional.

        :raises ArithmeticError: Si el perfil no es integrable contra ``1 + s²``.
        """
        if self.is_zero():
            return 0.0
        if self.kind != EnvelopeKind.RATIONAL_DECAY:
            raise ArithmeticError("El peso no es integrable contra la envolvente polinomial (1+s²)")
        return self.value * (math.pi - math.atan(t + radius) + math.atan(t - radius))

    def scaled(self, factor: float) -> "ScalarEnvelope":
        return self.model_copy(update={"value": self.value * factor})


def constant(value: float) -> ScalarEnvelope:
    return ScalarEnvelope(kind=EnvelopeKind.CONSTANT, value=value)
