"""
Módulo de servicio de sistemas.

Instancia sistemas del catálogo validando sus parámetros y contrasta las
envolventes declaradas con muestras aleatorias.
"""
import logging
from typing import Dict, Optional

import numpy as np

from app.config import settings
from app.core.exceptions import LinearizationError, ParameterValidationError
from app.crud.crud_catalog import catalog_crud
from app.models.system_model import CoupledSystem
from app.models.table_model import GridSpec
from app.schemas.reports import EnvelopeCheckReport, EnvelopeRatio

logger = logging.getLogger(__name__)


class SystemService:
    """Servicio para construir sistemas y verificar sus envolventes."""

    def build_system(self, catalog_name: str, params: Optional[Dict[str, float]] = None) -> CoupledSystem:
        """
        Construye un sistema a partir de una familia del catálogo.

        :param catalog_name: Nombre de la familia.
        :type catalog_name: str
        :param params: Parámetros; los ausentes toman su valor por defecto.
        :type params: Optional[Dict[str, float]]
        :return: Sistema con envolventes analíticas.
        :rtype: CoupledSystem
        :raises CatalogError: Si la familia no existe.
        :raises ParameterValidationError: Si un parámetro es desconocido o está fuera de rango.
        """
        entry = catalog_crud.get(catalog_name)
        params = dict(params or {})
        known = {p.name for p in entry.parameters}
        unknown = set(params) - known
        if unknown:
            raise ParameterValidationError(
                f"Parámetros desconocidos para '{catalog_name}': {', '.join(sorted(unknown))}"
            )
        resolved: Dict[str, float] = {}
        for spec in entry.parameters:
            value = float(params.get(spec.name, spec.default))
            if not (spec.low <= value <= spec.high) or not np.isfinite(value):
                raise ParameterValidationError(
                    f"El parámetro '{spec.name}'={value} está fuera del rango [{spec.low}, {spec.high}]"
                )
            if spec.integer:
                if value != int(value):
                    raise ParameterValidationError(f"El parámetro '{spec.name}' debe ser entero")
                value = float(int(value))
            resolved[spec.name] = value
        try:
            system = entry.builder(resolved)
        except ValueError as e:
            raise ParameterValidationError(str(e))
        except Exception as e:
            raise LinearizationError(f"Error al construir el sistema '{catalog_name}': {e}")
        logger.info(f"Sistema '{catalog_name}' construido con parámetros {resolved}")
        return system

    def envelope_check(self, sys: CoupledSystem, budget: int, rng_seed: int = 0,
                       time_halfwidth: Optional[float] = None, grid: Optional[GridSpec] = None) -> EnvelopeCheckReport:
        """
        Contrasta empíricamente μ, γ, ε, M y N con muestras de la caja de trabajo.

        Se muestrean pares ``(t, x1, y1)``, ``(t, x2, y2)``; los cocientes se
        reportan respecto de cada envolvente y se marca violación cuando superan
        ``1 + ENVELOPE_REL_TOL``.

        :param sys: Sistema a verificar.
        :type sys: CoupledSystem
        :param budget: Número de muestras.
        :type budget: int
        :param rng_seed: Semilla.
        :type rng_seed: int
        :param grid: Malla de la ejecución; su caja delimita el muestreo de ``x`` e ``y``.
        :type grid: Optional[GridSpec]
        :rtype: EnvelopeCheckReport
        """
        if budget < 1:
            raise ParameterValidationError("El presupuesto de muestras debe ser al menos 1")
        rng = np.random.default_rng(rng_seed)
        half = settings.T_MAX if time_halfwidth is None else time_halfwidth
        if sys.discrete:
            t = rng.integers(-int(half), int(half) + 1, size=budget).astype(float)
        else:
            t = rng.uniform(-half, half, size=budget)
        bx, by = (grid.box_x, grid.box_y) if grid is not None else (settings.BOX_X, settings.BOX_Y)
        x1 = rng.uniform(-bx, bx, size=(budget, sys.dim_x))
        x2 = rng.uniform(-bx, bx, size=(budget, sys.dim_x))
        y1 = rng.uniform(-by, by, size=(budget, sys.dim_y))
        y2 = rng.uniform(-by, by, size=(budget, sys.dim_y))

        f1 = sys.nonlinearity(t, x1, y1)
        f_same_y = sys.nonlinearity(t, x2, y1)
        f2 = sys.nonlinearity(t, x2, y2)
        norm_f = np.linalg.norm(f1, axis=-1)
        dx = np.linalg.norm(x1 - x2, axis=-1)
        dy = np.linalg.norm(y1 - y2, axis=-1)

        ratios = {
            "mu": _ratio(norm_f, sys.mu_envelope(t)),
            "gamma": _ratio(np.linalg.norm(f1 - f_same_y, axis=-1), sys.gamma_envelope(t) * dx),
            "eps_x": _ratio(np.linalg.norm(f1 - f_same_y, axis=-1), sys.eps_envelope(t) * dx),
            "eps_xy": _ratio(np.linalg.norm(f1 - f2, axis=-1), sys.eps_envelope(t) * (dx + dy)),
            "M": _ratio(norm_f, np.full(budget, sys.M_bound)),
            "N_eps": _ratio(sys.eps_envelope(t), np.full(budget, sys.N_eps_bound)),
        }
        threshold = 1.0 + settings.ENVELOPE_REL_TOL
        entries = []
        for name, r in ratios.items():
            violations = int(np.sum(r > threshold))
            entries.append(EnvelopeRatio(envelope=name, max_ratio=float(np.max(r)), violations=violations))
            if violations:
                logger.warning(f"Envolvente '{name}' violada en {violations} de {budget} muestras")
        periodic_gap, periodic_violations = 0.0, 0
        if sys.period is not None and not sys.discrete:
            # A, f y g deben coincidir en t y t + T0 sobre las mismas muestras.
            shifted = t + sys.period
            gaps = np.maximum.reduce([
                np.max(np.abs(sys.linear_part(shifted) - sys.linear_part(t)), axis=(-2, -1)),
                np.linalg.norm(sys.nonlinearity(shifted, x1, y1) - f1, axis=-1),
                np.linalg.norm(sys.drift(shifted, y1) - sys.drift(t, y1), axis=-1),
            ])
            periodic_gap = float(np.max(gaps))
            periodic_violations = int(np.sum(gaps > settings.ENVELOPE_REL_TOL))
            if periodic_violations:
                logger.warning(f"El período {sys.period} no se cumple en {periodic_violations} de {budget} muestras")
        return EnvelopeCheckReport(
            system=sys.name,
            samples=budget,
            ratios=entries,
            total_violations=sum(e.violations for e in entries) + periodic_violations,
            periodicity_gap=periodic_gap,
            periodicity_violations=periodic_violations,
        )


def _ratio(observed: np.ndarray, bound: np.ndarray) -> np.ndarray:
    observed = np.asarray(observed, dtype=float)
    bound = np.broadcast_to(np.asarray(bound, dtype=float), observed.shape)
    out = np.zeros_like(observed)
    positive = bound > 0
    out[positive] = observed[positive] / bound[positive]
    out[~positive & (observed > 0)] = np.inf
    return out


system_service = SystemService()
