"""
Módulo de esquemas de configuración de ejecución.

Un :class:`RunConfig` es el documento JSON que recibe la línea de comandos.
Todos los valores numéricos por defecto provienen de :data:`app.config.settings`.
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from app.config import settings
from app.models.kernel_model import KernelSpec
from app.models.table_model import GridSpec


class NumericsConfig(BaseModel):
    """
    Bloque numérico único.

    :ivar h_ode: Paso de RK4.
    :ivar t_max: Semiancho de la ventana temporal.
    :ivar tol: Tolerancia del punto fijo; el truncamiento de los solvers deja la cola ≤ tol/3.
    :ivar check_tol: Tolerancia de las integrales de hipótesis.
    :ivar quad_stride: Separación de la cuadratura en múltiplos de ``h_ode``.
    :ivar truncation: Radio ``L`` fijo; ``None`` lo resuelve automáticamente.
    :ivar max_sweeps: Máximo de barridos de Picard.
    :ivar sup_grid_points: Puntos de la malla donde se aproxima el supremo en ``t``.
    """
    h_ode: float = Field(default_factory=lambda: settings.H_ODE, gt=0.0)
    t_max: float = Field(default_factory=lambda: settings.T_MAX, gt=0.0)
    tol: float = Field(default_factory=lambda: settings.TOL, gt=0.0)
    check_tol: float = Field(default_factory=lambda: settings.CHECK_TOL, gt=0.0)
    quad_stride: int = Field(default_factory=lambda: settings.QUAD_STRIDE, ge=1)
    truncation: Optional[float] = Field(None, gt=0.0)
    max_sweeps: int = Field(default_factory=lambda: settings.MAX_SWEEPS, ge=1)
    sup_grid_points: int = Field(default_factory=lambda: settings.SUP_GRID_POINTS, ge=1)
    picard_tol: float = Field(default_factory=lambda: settings.PICARD_TOL, gt=0.0)
    picard_max_iter: int = Field(default_factory=lambda: settings.PICARD_MAX_ITER, ge=1)
    picard_damping: float = Field(default_factory=lambda: settings.PICARD_DAMPING, gt=0.0, le=1.0)

    model_config = {
        "json_schema_extra": {
            "example": {"h_ode": 1e-3, "t_max": 40, "tol": 1e-5, "quad_stride": 50, "truncation": None}
        }
    }

    @property
    def quad_spacing(self) -> float:
        return self.h_ode * self.quad_stride


class SystemRef(BaseModel):
    """Referencia a un sistema: familia de catálogo con parámetros, o ejemplo empaquetado."""
    catalog: Optional[str] = None
    params: Dict[str, float] = Field(default_factory=dict)
    example: Optional[str] = None

    @model_validator(mode="after")
    def check_one(self) -> "SystemRef":
        if (self.catalog is None) == (self.example is None):
            raise ValueError("Indique exactamente uno de 'catalog' o 'example'")
        return self


class HolderBlock(BaseModel):
    C: List[float] = Field(default_factory=lambda: [1.0])
    alpha: List[float] = Field(default_factory=lambda: [0.5])
    samples: int = Field(1000, ge=1)
    pairs: int = Field(200, ge=1)
    horizon: float = Field(3.0, gt=0.0)
    required: List[str] = Field(default_factory=list, description="Condiciones cuyo fallo produce código 2.")


class VerifyBlock(BaseModel):
    samples: int = Field(500, ge=1)
    horizon: float = Field(2.0, gt=0.0)


class OracleBlock(BaseModel):
    probes: int = Field(50, ge=1)
    depth: int = Field(40, ge=1)


class RunConfig(BaseModel):
    """
    Configuración completa de una ejecución.

    :ivar system: Sistema a usar.
    :ivar kernel: Núcleo que reemplaza al sugerido por el sistema.
    :ivar numerics: Bloque numérico.
    :ivar grid: Malla de las tablas.
    :ivar holder: Constantes y muestras de Hölder.
    :ivar verify: Muestras y horizonte de verificación.
    :ivar oracle: Sondas y profundidad del oráculo discreto.
    :ivar seed: Semilla de todos los muestreos.
    :ivar output_dir: Directorio de salida.
    """
    system: SystemRef
    kernel: Optional[KernelSpec] = None
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    grid: GridSpec = Field(default_factory=GridSpec)
    holder: HolderBlock = Field(default_factory=HolderBlock)
    verify: VerifyBlock = Field(default_factory=VerifyBlock)
    oracle: OracleBlock = Field(default_factory=OracleBlock)
    seed: int = Field(default_factory=lambda: settings.SEED, ge=0)
    output_dir: str = "out"

    model_config = {
        "json_schema_extra": {
            "example": {
                "system": {"catalog": "scalar_tanh", "params": {"eps": 0.1}},
                "numerics": {"tol": 1e-5},
                "seed": 0,
            }
        }
    }
