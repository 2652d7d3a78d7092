"""
Módulo de servicio de Hölder.

Construye las envolventes ``Δ1``, ``Δ2``, ``Δ3`` y ``σ`` a partir de las
constantes de crecimiento, las contrasta con pares de trayectorias y verifica
empíricamente la continuidad de Hölder de las tablas resueltas.
"""
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from app.config import settings
from app.core.exceptions import MissingConstantsError, ParameterValidationError, WindowError
from app.models.system_model import CoupledSystem
from app.models.table_model import ConjugacyPair, FunctionTable, GridSpec
from app.schemas.reports import EnvelopeEmpiricalReport, HolderReport
from app.schemas.run_config import NumericsConfig
from app.services.flow_service import flow_service
from app.utils.rk4 import integrate
from app.utils.table_io import write_rows_csv

logger = logging.getLogger(__name__)

MIN_SEPARATION_CELLS = 10
MAX_RESAMPLE_ROUNDS = 100


class DeltaKind(str, Enum):
    DELTA1 = "delta1"
    DELTA2 = "delta2"
    DELTA3 = "delta3"
    SIGMA = "sigma"


class EnvelopeConstants(BaseModel):
    """Constantes de las que se derivan las envolventes Δ."""
    K1: float = Field(..., gt=0.0)
    K2: float = Field(..., gt=0.0)
    a1: float = Field(..., gt=0.0)
    a2: float = Field(..., gt=0.0)
    eps: float = Field(..., ge=0.0)
    M2: Optional[float] = Field(None, gt=0.0)

    @property
    def M3(self) -> float:
        if self.M2 is None:
            raise MissingConstantsError("M3 = max{M2, a1, a2} requiere M2")
        return max(self.M2, self.a1, self.a2)


class EnvelopeSpec(BaseModel):
    """
    Envolvente exponencial a dos lados ``Δ(first, second)``.

    ``k_ahead·e^{rate_ahead (first-second)}`` si ``first ≥ second`` y
    ``k_behind·e^{rate_behind (second-first)}`` en otro caso.
    """
    kind: DeltaKind
    k_ahead: float
    rate_ahead: float
    k_behind: float
    rate_behind: float

    def branch(self, first, second, ahead: bool) -> np.ndarray:
        gap = np.abs(np.asarray(first, dtype=float) - np.asarray(second, dtype=float))
        if ahead:
            return self.k_ahead * np.exp(self.rate_ahead * gap)
        return self.k_behind * np.exp(self.rate_behind * gap)

    def __call__(self, first, second) -> np.ndarray:
        first, second = np.broadcast_arrays(np.asarray(first, dtype=float), np.asarray(second, dtype=float))
        return np.where(first >= second, self.branch(first, second, True), self.branch(first, second, False))


class HolderService:
    """Servicio de envolventes Δ y de verificación empírica de Hölder."""

    def envelope_constants(self, sys: CoupledSystem, gk=None) -> EnvelopeConstants:
        """
        Reúne ``K1, K2, a1, a2`` del núcleo, ``ε = sup ε(t)`` y ``M2`` del sistema.

        :raises MissingConstantsError: Si el núcleo no declara constantes de crecimiento.
        """
        spec = gk.spec if gk is not None else sys.default_kernel
        growth = spec.growth_constants() if spec is not None else None
        if growth is None:
            raise MissingConstantsError(f"El sistema '{sys.name}' no declara constantes de crecimiento K1, K2, a1, a2")
        return EnvelopeConstants(
            K1=growth.K1, K2=growth.K2, a1=growth.a1, a2=growth.a2,
            eps=sys.eps_envelope.sup(), M2=sys.M2_bound,
        )

    def delta_bounds(self, constants: EnvelopeConstants, kind: Union[DeltaKind, str]) -> EnvelopeSpec:
        """
        Evaluador de ``Δ1``, ``Δ2``, ``Δ3`` o ``σ``.

        :raises MissingConstantsError: Si ``Δ3`` o ``σ`` no disponen de ``M2``.
        """
        kind = DeltaKind(kind)
        c = constants
        if kind == DeltaKind.DELTA1:
            return EnvelopeSpec(kind=kind, k_ahead=c.K1, rate_ahead=c.a1, k_behind=c.K2, rate_behind=c.a2)
        if kind == DeltaKind.DELTA2:
            return EnvelopeSpec(kind=kind, k_ahead=c.K1, rate_ahead=c.a1 + c.K1 * c.eps,
                                k_behind=c.K2, rate_behind=c.a2 + c.K2 * c.eps)
        if kind == DeltaKind.DELTA3:
            return EnvelopeSpec(kind=kind, k_ahead=2.0, rate_ahead=c.M3 + c.K1 * c.eps,
                                k_behind=2.0, rate_behind=c.M3 + c.K2 * c.eps)
        if c.M2 is None:
            raise MissingConstantsError("σ requiere la constante de Lipschitz M2 de la deriva")
        return EnvelopeSpec(kind=kind, k_ahead=1.0, rate_ahead=c.M2, k_behind=1.0, rate_behind=c.M2)

    def envelope_empirical_check(self, sys: CoupledSystem, kind: Union[DeltaKind, str], pairs: int,
                                 horizon: float, rng_seed: int = 0, numerics: Optional[NumericsConfig] = None,
                                 grid: Optional[GridSpec] = None) -> EnvelopeEmpiricalReport:
        """
        Máximo de ``brecha observada / predicción`` sobre pares de trayectorias.

        - ``delta1``: dos soluciones desacopladas con la misma ``y``.
        - ``delta2``: dos soluciones acopladas con la misma ``y``.
        - ``delta3``: soluciones acopladas con igual ``x`` inicial.
        - ``σ``: dos soluciones de la deriva.

        La holgura reportada es el error relativo de RK4 estimado por paso doble.
        Los estados iniciales se toman en la caja de ``grid`` (por defecto la de ``settings``).

        :raises WindowError: Si ``horizon`` no cabe en la ventana.
        """
        numerics = numerics or NumericsConfig()
        kind = DeltaKind(kind)
        if pairs < 1:
            raise ParameterValidationError("El número de pares debe ser al menos 1")
        if horizon <= 0:
            raise ParameterValidationError("El horizonte debe ser positivo")
        spec = self.delta_bounds(self.envelope_constants(sys), kind)
        rng = np.random.default_rng(rng_seed)
        window = float(int(numerics.t_max)) if sys.discrete else numerics.t_max
        if horizon > 2.0 * window:
            raise WindowError(f"El horizonte {horizon} no cabe en la ventana [-{window}, {window}]")
        if sys.discrete:
            horizon = float(int(round(horizon)))
            s = rng.integers(-int(window), int(window - horizon) + 1, size=pairs).astype(float)
        else:
            s = rng.uniform(-window, window - horizon, size=pairs)

        bx, by = (grid.box_x, grid.box_y) if grid is not None else (settings.BOX_X, settings.BOX_Y)
        xi = rng.uniform(-bx, bx, size=(pairs, sys.dim_x))
        eta = rng.uniform(-by, by, size=(pairs, sys.dim_y))
        if kind in (DeltaKind.DELTA1, DeltaKind.DELTA2):
            zeta, omega = rng.uniform(-bx, bx, size=(pairs, sys.dim_x)), eta
            initial_gap = np.linalg.norm(xi - zeta, axis=-1)
        else:
            zeta, omega = xi, rng.uniform(-by, by, size=(pairs, sys.dim_y))
            initial_gap = np.linalg.norm(eta - omega, axis=-1)

        coupled = kind != DeltaKind.DELTA1
        first, err_a = self._advance(sys, s, xi, eta, horizon, coupled, numerics)
        second, err_b = self._advance(sys, s, zeta, omega, horizon, coupled, numerics)
        part = slice(sys.dim_x, None) if kind == DeltaKind.SIGMA else slice(0, sys.dim_x)
        gap = np.linalg.norm(first[:, part] - second[:, part], axis=-1)
        predicted = spec(s + horizon, s) * initial_gap
        positive = predicted > 0
        ratio = np.where(positive, gap / np.where(positive, predicted, 1.0), np.where(gap > 0, np.inf, 0.0))
        slack = float(np.max(np.where(positive, (err_a + err_b) / np.where(positive, predicted, 1.0), 0.0),
                             initial=0.0))
        report = EnvelopeEmpiricalReport(
            kind=kind.value, pairs=pairs, horizon=horizon,
            max_ratio=float(np.max(ratio, initial=0.0)), slack=slack,
        )
        logger.info(f"Envolvente {kind.value} en '{sys.name}': cociente máximo {report.max_ratio:.6g}, "
                    f"holgura {slack:.2e}")
        return report

    def empirical_holder(self, pair: ConjugacyPair, axis: str, table_kind: str, C: float, alpha: float,
                         samples: int, rng_seed: int = 0,
                         csv_path: Optional[Union[str, Path]] = None) -> HolderReport:
        """
        Cuenta violaciones de ``|Δh| ≤ C|Δarg|^α`` en pares aleatorios de la caja.

        Los pares difieren solo en ``x``, solo en ``y`` o en ambos (``xy``) y se
        remuestrean mientras estén a menos de diez celdas. La holgura es
        ``2·presupuesto / min|Δarg|^α`` y la violación se cuenta sobre ``C·(1+holgura)``.

        :raises ParameterValidationError: Si ``α ∉ (0,1)``, ``C ≤ 0`` o el eje no aplica.
        """
        if axis not in ("x", "y", "xy"):
            raise ParameterValidationError(f"Eje desconocido: {axis}")
        if table_kind not in ("h", "hbar"):
            raise ParameterValidationError(f"Tabla desconocida: {table_kind}")
        if not 0.0 < alpha < 1.0:
            raise ParameterValidationError(f"α debe estar en (0, 1), se recibió {alpha}")
        if C <= 0:
            raise ParameterValidationError(f"C debe ser positivo, se recibió {C}")
        if samples < 1:
            raise ParameterValidationError("El número de muestras debe ser al menos 1")
        table = pair.table(table_kind)
        if axis != "x" and table.dim_y == 0:
            raise ParameterValidationError("El sistema no tiene componente y")
        rng = np.random.default_rng(rng_seed)
        t, x1, x2, y1, y2 = self._sample_pairs(table, axis, samples, rng)

        h1, c1 = table.evaluate(t, x1, y1)
        h2, c2 = table.evaluate(t, x2, y2)
        clamped = c1 | c2
        delta = np.linalg.norm(x1 - x2, axis=-1) + np.linalg.norm(y1 - y2, axis=-1)
        gap = np.linalg.norm(h1 - h2, axis=-1)
        ratio = gap / delta ** alpha
        kept = ~clamped

        slack = 2.0 * table.info.error_budget / float(np.min(delta[kept], initial=np.inf)) ** alpha \
            if np.any(kept) else 0.0
        violations = int(np.sum(ratio[kept] > C * (1.0 + slack)))
        fitted_exponent, fitted_constant, degenerate = _loglog_fit(delta[kept], gap[kept])
        report = HolderReport(
            axis=axis,
            table_kind=table_kind,
            C=C,
            alpha=alpha,
            samples=samples,
            violations=violations,
            max_ratio=float(np.max(ratio[kept], initial=0.0)),
            fitted_exponent=fitted_exponent,
            fitted_constant=fitted_constant,
            fit_degenerate=degenerate,
            clamp_excluded=int(np.sum(clamped)),
            slack=slack,
            c_prime=self._c_prime(table, axis, C, alpha),
        )
        logger.info(f"Hölder {table_kind}/{axis}: {violations} violaciones de {samples}, holgura {slack:.3e}")
        if csv_path is not None:
            rows = ((float(delta[k]), float(gap[k]), float(ratio[k]), int(clamped[k])) for k in range(samples))
            write_rows_csv(csv_path, ["delta_norm", "h_gap_norm", "ratio", "clamped_flag"], rows)
        return report

    def _c_prime(self, table: FunctionTable, axis: str, C: float, alpha: float) -> float:
        """Constante de Hölder de ``H = id + h`` sobre la caja, con los diámetros de la caja."""
        diam_x = 2.0 * table.grid.box_x * math.sqrt(table.dim_x)
        diam_y = 2.0 * table.grid.box_y * math.sqrt(max(table.dim_y, 1))
        if axis == "x":
            return C + diam_x ** (1.0 - alpha)
        if axis == "y":
            return C + diam_y ** (1.0 - alpha)
        return 2.0 * C + diam_x ** (1.0 - alpha) + diam_y ** (1.0 - alpha)

    def _sample_pairs(self, table: FunctionTable, axis: str, samples: int, rng: np.random.Generator):
        lo, hi = float(table.tau_axis[0]), float(table.tau_axis[-1])
        if table.discrete:
            t = rng.integers(int(lo), int(hi) + 1, size=samples).astype(float)
        else:
            t = rng.uniform(lo, hi, size=samples)
        spacing = table.node_spacing()
        bx, by = table.grid.box_x, table.grid.box_y
        # En mallas gruesas diez celdas pueden superar la caja; se limita al semiancho.
        min_x = min(MIN_SEPARATION_CELLS * spacing["x"], bx)
        min_y = min(MIN_SEPARATION_CELLS * spacing["y"], by)

        x1 = rng.uniform(-bx, bx, size=(samples, table.dim_x))
        y1 = rng.uniform(-by, by, size=(samples, table.dim_y))
        x2, y2 = x1.copy(), y1.copy()
        pending = np.ones(samples, dtype=bool)
        for _ in range(MAX_RESAMPLE_ROUNDS):
            count = int(np.sum(pending))
            if count == 0:
                break
            if axis in ("x", "xy"):
                x2[pending] = rng.uniform(-bx, bx, size=(count, table.dim_x))
            if axis in ("y", "xy"):
                y2[pending] = rng.uniform(-by, by, size=(count, table.dim_y))
            far_x = np.linalg.norm(x1 - x2, axis=-1) >= min_x
            far_y = np.linalg.norm(y1 - y2, axis=-1) >= min_y
            if axis == "x":
                pending = ~far_x
            elif axis == "y":
                pending = ~far_y
            else:
                pending = ~(far_x | far_y)
        if np.any(pending):
            logger.warning(f"{int(np.sum(pending))} pares quedaron por debajo de la separación mínima")
        return t, x1, x2, y1, y2

    def _advance(self, sys: CoupledSystem, s: np.ndarray, x: np.ndarray, y: np.ndarray, horizon: float,
                 coupled: bool, numerics: NumericsConfig) -> Tuple[np.ndarray, np.ndarray]:
        """Estado conjunto tras ``horizon`` y error estimado por paso doble."""
        if sys.discrete:
            out = np.concatenate([x, y], axis=-1)
            for k in range(len(s)):
                xs, ys = flow_service.orbit_path(sys, int(s[k]), x[k], y[k], int(horizon), coupled, numerics)
                out[k] = np.concatenate([xs[-1], ys[-1]])
            return out, np.zeros(len(s))
        flow_service.evolution_family(sys, numerics).check_window(np.concatenate([s, s + horizon]))
        field = sys.vector_field(coupled)
        state = np.concatenate([x, y], axis=-1)
        fine = integrate(field, s, state, horizon, numerics.h_ode)
        coarse = integrate(field, s, state, horizon, 2.0 * numerics.h_ode)
        return fine, np.linalg.norm(fine - coarse, axis=-1) / 15.0


def _loglog_fit(delta: np.ndarray, gap: np.ndarray) -> Tuple[Optional[float], Optional[float], bool]:
    """Ajuste por mínimos cuadrados de ``log|Δh|`` contra ``log|Δarg|``."""
    usable = (gap > 0) & (delta > 0)
    if np.sum(usable) < 2:
        return None, None, True
    log_delta = np.log(delta[usable])
    if np.ptp(log_delta) == 0.0:
        return None, None, True
    slope, intercept = np.polyfit(log_delta, np.log(gap[usable]), 1)
    return float(slope), float(math.exp(intercept)), False


holder_service = HolderService()
