"""
Módulo de tablas de funciones sobre mallas en ``(τ, x, y)``.

Las tablas guardan ``h`` o ``h̄`` en los nodos de una malla uniforme y se
evalúan por interpolación multilineal con
:class:`scipy.interpolate.RegularGridInterpolator`. Fuera de la caja se
recorta a la cara más cercana; fuera del rango temporal se recorta o se
envuelve por el período del sistema.
"""
import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator
from scipy.interpolate import RegularGridInterpolator

from app.config import settings

logger = logging.getLogger(__name__)


class GridSpec(BaseModel):
    """
    Malla uniforme de una tabla.

    :ivar tau_min: Extremo inferior del eje temporal.
    :ivar tau_max: Extremo superior del eje temporal.
    :ivar n_tau: Nodos temporales (en tiempo discreto se usan los enteros del rango).
    :ivar n_x: Nodos por dimensión de X.
    :ivar n_y: Nodos por dimensión de Y.
    :ivar box_x: Semiancho de la caja en X.
    :ivar box_y: Semiancho de la caja en Y.
    """
    tau_min: float = Field(default_factory=lambda: -settings.TAU_HALFWIDTH)
    tau_max: float = Field(default_factory=lambda: settings.TAU_HALFWIDTH)
    n_tau: int = Field(default_factory=lambda: settings.GRID_N_TAU, ge=2)
    n_x: int = Field(default_factory=lambda: settings.GRID_N_X, ge=2)
    n_y: int = Field(default_factory=lambda: settings.GRID_N_Y, ge=2)
    box_x: float = Field(default_factory=lambda: settings.BOX_X, gt=0.0)
    box_y: float = Field(default_factory=lambda: settings.BOX_Y, gt=0.0)

    model_config = {
        "json_schema_extra": {
            "example": {"tau_min": -1, "tau_max": 1, "n_tau": 3, "n_x": 161, "n_y": 5, "box_x": 5, "box_y": 5}
        }
    }

    @model_validator(mode="after")
    def check_range(self) -> "GridSpec":
        if self.tau_max <= self.tau_min:
            raise ValueError("tau_max debe ser mayor que tau_min")
        return self

    def tau_nodes(self, discrete: bool = False) -> np.ndarray:
        if discrete:
            nodes = np.arange(int(np.ceil(self.tau_min)), int(np.floor(self.tau_max)) + 1, dtype=float)
            if nodes.size < 2:
                raise ValueError("El eje discreto necesita al menos dos índices")
            return nodes
        return np.linspace(self.tau_min, self.tau_max, self.n_tau)

    def x_axis(self) -> np.ndarray:
        return np.linspace(-self.box_x, self.box_x, self.n_x)

    def y_axis(self) -> np.ndarray:
        return np.linspace(-self.box_y, self.box_y, self.n_y)

    def node_points(self, dim_x: int, dim_y: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Nodos de la malla en X y en Y, en orden ``ij``.

        :return: ``(xi, eta)`` con formas ``(n_x**dim_x, dim_x)`` y ``(n_y**dim_y, dim_y)``.
        :rtype: Tuple[numpy.ndarray, numpy.ndarray]
        """
        return _product(self.x_axis(), dim_x), _product(self.y_axis(), dim_y)


def _product(axis: np.ndarray, dim: int) -> np.ndarray:
    if dim == 0:
        return np.zeros((1, 0))
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


class SolverInfo(BaseModel):
    """Metadatos de resolución y presupuesto de error de una tabla."""
    iterations: int = 0
    residual_history: List[float] = Field(default_factory=list)
    final_delta: float = 0.0
    q_value: float = 0.0
    N_value: float = 0.0
    truncation: float = 0.0
    tail_bound: float = 0.0
    quadrature_error: float = 0.0
    interpolation_bound: float = 0.0
    error_budget: float = 0.0


class FunctionTable(BaseModel):
    """
    Tabla de una función vectorial ``(τ, x, y) ↦ X``.

    :ivar kind: ``"h"`` o ``"hbar"``.
    :ivar grid: Malla.
    :ivar dim_x: Dimensión de X.
    :ivar dim_y: Dimensión de Y.
    :ivar discrete: Eje temporal entero.
    :ivar tau_axis: Nodos temporales.
    :ivar values: Valores ``(n_tau, n_xi, n_eta, dim_x)``.
    :ivar tau_policy: ``"clamp"`` o ``"wrap"`` fuera del rango temporal.
    :ivar period: Período usado por ``"wrap"``.
    :ivar info: Metadatos del cálculo.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: str = "h"
    grid: GridSpec
    dim_x: int
    dim_y: int
    discrete: bool = False
    tau_axis: np.ndarray
    values: np.ndarray
    tau_policy: str = "clamp"
    period: Optional[float] = None
    info: SolverInfo = Field(default_factory=SolverInfo)

    _interpolator: Optional[RegularGridInterpolator] = PrivateAttr(default=None)

    def axes(self) -> List[np.ndarray]:
        return [self.tau_axis] + [self.grid.x_axis()] * self.dim_x + [self.grid.y_axis()] * self.dim_y

    def grid_values(self) -> np.ndarray:
        shape = [len(a) for a in self.axes()] + [self.dim_x]
        return self.values.reshape(shape)

    def sup_norm(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.values, axis=-1)))

    def _get_interpolator(self) -> RegularGridInterpolator:
        if self._interpolator is None:
            self._interpolator = RegularGridInterpolator(
                tuple(self.axes()), self.grid_values(), method="linear", bounds_error=False, fill_value=None
            )
        return self._interpolator

    def map_tau(self, t: np.ndarray) -> np.ndarray:
        """Lleva los tiempos al rango de la tabla según ``tau_policy``."""
        t = np.asarray(t, dtype=float)
        lo, hi = self.tau_axis[0], self.tau_axis[-1]
        if self.tau_policy == "wrap" and self.period is not None:
            outside = (t < lo) | (t > hi)
            wrapped = lo + np.mod(t - lo, self.period)
            t = np.where(outside, wrapped, t)
        return np.clip(t, lo, hi)

    def evaluate(self, t, x, y) -> Tuple[np.ndarray, np.ndarray]:
        """
        Evalúa la tabla con recorte a la caja.

        :param t: Tiempos con forma de lote ``S``.
        :param x: Puntos ``S + (dim_x,)``.
        :param y: Puntos ``S + (dim_y,)``.
        :return: ``(valores S + (dim_x,), máscara de recorte S)``.
        :rtype: Tuple[numpy.ndarray, numpy.ndarray]
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        batch = np.broadcast_shapes(x.shape[:-1], y.shape[:-1], np.shape(t))
        x = np.broadcast_to(x, batch + (self.dim_x,))
        y = np.broadcast_to(y, batch + (self.dim_y,))
        t = np.broadcast_to(self.map_tau(t), batch)
        bx, by = self.grid.box_x, self.grid.box_y
        xc = np.clip(x, -bx, bx)
        yc = np.clip(y, -by, by)
        clamped = np.any(np.abs(x) > bx, axis=-1)
        if self.dim_y:
            clamped = clamped | np.any(np.abs(y) > by, axis=-1)
        points = np.concatenate([t[..., None], xc, yc[..., : self.dim_y]], axis=-1)
        flat = points.reshape(-1, points.shape[-1])
        out = self._get_interpolator()(flat).reshape(batch + (self.dim_x,))
        return out, clamped

    def __call__(self, t, x, y) -> np.ndarray:
        return self.evaluate(t, x, y)[0]

    def node_spacing(self) -> Dict[str, float]:
        return {
            "x": float(self.grid.x_axis()[1] - self.grid.x_axis()[0]),
            "y": float(self.grid.y_axis()[1] - self.grid.y_axis()[0]),
        }

    def interpolation_bound(self) -> float:
        """
        Estimación a posteriori del error de interpolación multilineal.

        Usa ``(1/8) Σ_i max |δ_i² h|`` con segundas diferencias de los nodos a lo
        largo de cada eje, con factor de seguridad 2. En tiempo discreto el eje
        temporal se evalúa solo en enteros y no contribuye.
        """
        grid = self.grid_values()
        total = 0.0
        first_axis = 1 if self.discrete else 0
        for axis in range(first_axis, grid.ndim - 1):
            if grid.shape[axis] < 3:
                continue
            second = np.diff(grid, n=2, axis=axis)
            total += float(np.max(np.abs(second))) / 8.0
        return 2.0 * total


class ConjugacyPair(BaseModel):
    """
    Par de tablas ``h`` y ``h̄`` junto con el sistema y el núcleo que las definen.

    ``H(τ,ξ,η) = (ξ + h(τ,ξ,η), η)`` y ``H̄(τ,ξ,η) = (ξ + h̄(τ,ξ,η), η)``.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    system: Any
    kernel: Any
    h_table: FunctionTable
    hbar_table: FunctionTable

    def table(self, kind: str) -> FunctionTable:
        return self.h_table if kind == "h" else self.hbar_table
