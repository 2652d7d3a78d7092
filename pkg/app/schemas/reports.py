from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class EnvelopeRatio(BaseModel):
    envelope: str = Field(..., description="Envolvente contrastada (mu, gamma, eps_x, eps_xy, M, N_eps).")
    max_ratio: float = Field(..., description="Máximo cociente observado/declarado.")
    violations: int = Field(..., description="Muestras con cociente mayor que 1 + tolerancia.")


class EnvelopeCheckReport(BaseModel):
    """
    Resultado del contraste empírico de las envolventes de un sistema.

    :ivar system: Nombre del sistema.
    :vartype system: str
    :ivar samples: Muestras evaluadas.
    :vartype samples: int
    :ivar ratios: Cocientes por envolvente.
    :vartype ratios: List[EnvelopeRatio]
    :ivar total_violations: Suma de violaciones.
    :vartype total_violations: int
    :ivar periodicity_gap: Máxima diferencia de ``A``, ``f`` o ``g`` entre ``t`` y ``t+T0`` si hay período.
    :vartype periodicity_gap: float
    :ivar periodicity_violations: Muestras cuya diferencia supera ``ENVELOPE_REL_TOL``.
    :vartype periodicity_violations: int
    """
    model_config = ConfigDict(ser_json_inf_nan="constants")

    system: str
    samples: int
    ratios: List[EnvelopeRatio]
    total_violations: int
    periodicity_gap: float = 0.0
    periodicity_violations: int = 0

    def ratio(self, envelope: str) -> EnvelopeRatio:
        return next(r for r in self.ratios if r.envelope == envelope)


class ConditionMargin(BaseModel):
    """
    Margen de una condición de hipótesis.

    :ivar tag: Etiqueta de la condición (``bound``, ``c1``, ``epcon``...).
    :ivar lhs: Lado izquierdo evaluado (incluye la cola certificada cuando aplica).
    :ivar rhs: Lado derecho.
    :ivar margin: ``rhs - lhs``.
    :ivar passed: ``True`` si el margen es no negativo (estricto cuando la condición lo pide).
    :ivar admissible: ``False`` si α está fuera del intervalo admisible.
    :ivar divergent: ``True`` si la integral diverge.
    :ivar certified: ``False`` si no hubo cola certificada.
    :ivar method: ``closed_form``, ``quadrature`` o ``summation``.
    """
    model_config = ConfigDict(ser_json_inf_nan="constants")

    tag: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    admissible: bool = True
    divergent: bool = False
    certified: bool = True
    method: str = "closed_form"
    note: str = ""


class HypothesisReport(BaseModel):
    """
    Cantidades de hipótesis y márgenes por condición.

    :ivar N_value: ``sup_t ∫ |𝒢(t,s)| μ(s) ds`` calculado (máximo sobre la malla).
    :ivar q_value: ``sup_t ∫ |𝒢(t,s)| γ(s) ds`` calculado.
    :ivar N_certified: ``N_value`` más la cola certificada.
    :ivar q_certified: ``q_value`` más la cola certificada.
    :ivar truncation: Radio de truncamiento ``L``.
    :ivar tail_bound: Cola certificada máxima usada.
    :ivar sup_is_grid_max: El supremo es un máximo sobre la malla temporal.
    :ivar certified: Existe envolvente para certificar las colas.
    """
    model_config = ConfigDict(ser_json_inf_nan="constants")

    N_value: Optional[float] = None
    q_value: Optional[float] = None
    N_certified: Optional[float] = None
    q_certified: Optional[float] = None
    r_value: Optional[float] = None
    q_eps_value: Optional[float] = None
    truncation: Optional[float] = None
    tail_bound: Optional[float] = None
    quadrature_error: Optional[float] = None
    sup_is_grid_max: bool = True
    sup_grid_points: int = 0
    certified: bool = True
    warnings: List[str] = Field(default_factory=list)
    margins: Dict[str, ConditionMargin] = Field(default_factory=dict)
    alpha_bounds: Dict[str, float] = Field(default_factory=dict)

    def passed(self, tag: str) -> bool:
        return self.margins[tag].passed


class DefectReport(BaseModel):
    """
    Defecto máximo de una identidad verificada por muestreo.

    :ivar check: ``inverse`` o ``mapping``.
    :ivar max_defect: Máximo defecto certificado (sin muestras recortadas).
    :ivar budget: Presupuesto de error compuesto registrado.
    :ivar samples: Muestras evaluadas.
    :ivar clamped: Muestras excluidas por recorte de caja.
    :ivar directions: Máximo por dirección.
    """
    model_config = ConfigDict(ser_json_inf_nan="constants")

    check: str
    max_defect: float
    budget: float
    samples: int
    clamped: int = 0
    directions: Dict[str, float] = Field(default_factory=dict)

    @property
    def within_budget(self) -> bool:
        return self.max_defect <= self.budget


class EnvelopeEmpiricalReport(BaseModel):
    kind: str
    pairs: int
    horizon: float
    max_ratio: float
    slack: float


class HolderReport(BaseModel):
    """
    Verificación empírica de Hölder de una tabla.

    :ivar axis: ``x``, ``y`` o ``xy``.
    :ivar table_kind: ``h`` o ``hbar``.
    :ivar C: Constante del teorema.
    :ivar alpha: Exponente del teorema.
    :ivar samples: Pares evaluados.
    :ivar violations: Pares con cociente por encima de ``C + C·slack``.
    :ivar max_ratio: Máximo de ``|Δh| / |Δarg|^α``.
    :ivar fitted_exponent: Pendiente del ajuste log-log (``None`` si es degenerado).
    :ivar fitted_constant: Constante del ajuste log-log.
    :ivar fit_degenerate: Todas las diferencias son nulas.
    :ivar clamp_excluded: Pares descartados por recorte.
    :ivar slack: Holgura relativa derivada del presupuesto de la tabla.
    :ivar c_prime: Constante de Hölder de ``H`` en la caja.
    """
    model_config = ConfigDict(ser_json_inf_nan="constants")

    axis: str
    table_kind: str
    C: float
    alpha: float
    samples: int
    violations: int
    max_ratio: float
    fitted_exponent: Optional[float] = None
    fitted_constant: Optional[float] = None
    fit_degenerate: bool = False
    clamp_excluded: int = 0
    slack: float = 0.0
    c_prime: float = 0.0


class ExpectedCheckResult(BaseModel):
    tag: str
    overrides: Dict[str, float] = Field(default_factory=dict)
    expected: bool
    observed: bool

    @property
    def matched(self) -> bool:
        return self.expected == self.observed


class ExampleReport(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    name: str
    notes: str
    checks: List[ExpectedCheckResult]
    recorded: Dict[str, float] = Field(default_factory=dict)

    @property
    def all_matched(self) -> bool:
        return all(c.matched for c in self.checks)
