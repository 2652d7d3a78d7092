"""
Módulo de servicio del núcleo de Green.

Construye ``𝒢(t,s)`` a partir de una familia de proyecciones diagonales,
calcula las cantidades de hipótesis ``N`` y ``q`` con truncamiento certificado
y evalúa las condiciones de Hölder y las desigualdades cerradas de los
corolarios de dicotomía.
"""
import logging
import math
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from app.core.exceptions import DivergenceError, ParameterValidationError, WindowError
from app.models.envelope_model import ScalarEnvelope
from app.models.kernel_model import DecayEnvelope, DecayKind, DichotomyData, KernelSpec, TrichotomyData
from app.models.system_model import CoupledSystem
from app.schemas.reports import ConditionMargin, HypothesisReport
from app.schemas.run_config import NumericsConfig
from app.services.flow_service import flow_service
from app.utils.quadrature import interval_count, richardson_error, simpson_weights

logger = logging.getLogger(__name__)

Weight = Union[ScalarEnvelope, float]


class GreenKernel:
    """
    Núcleo de Green de un sistema con proyecciones diagonales.

    ``𝒢(t,s) = T(t,s)P(s)`` si ``t ≥ s`` y ``-T(t,s)(I-P(s))`` si ``t < s``; en
    tiempo discreto ``𝒜(m,n)`` reemplaza a ``T``. Con tricotomía, ``P(s)`` es
    ``P⁺`` para ``s ≥ 0`` y ``P⁻`` para ``s < 0``.

    :ivar system: Sistema que define la parte lineal.
    :ivar spec: Especificación de la que se construyó.
    :ivar family: Familia de evolución o cociclo.
    :ivar envelope: Cota certificada de ``|𝒢|`` o ``None``.
    """

    def __init__(self, system: CoupledSystem, spec: KernelSpec, family, envelope: Optional[DecayEnvelope]):
        self.system = system
        self.spec = spec
        self.family = family
        self.envelope = envelope
        self.discrete = system.discrete
        self.dim = system.dim_x
        if spec.trichotomy is not None:
            self.plus = np.asarray(spec.trichotomy.plus, dtype=float)
            self.minus = np.asarray(spec.trichotomy.minus, dtype=float)
        else:
            diag = np.ones(self.dim) if spec.projection is None else np.asarray(spec.projection, dtype=float)
            self.plus = diag
            self.minus = diag

    @property
    def is_identity(self) -> bool:
        return bool(np.all(self.plus == 1.0) and np.all(self.minus == 1.0))

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.plus == 0.0) and np.all(self.minus == 0.0))

    def projection_diagonal(self, s) -> np.ndarray:
        """Diagonal de ``P(s)`` con forma ``s.shape + (d,)``."""
        s = np.asarray(s, dtype=float)
        return np.where((s >= 0)[..., None], self.plus, self.minus)

    def projection(self, s) -> np.ndarray:
        diag = self.projection_diagonal(s)
        return diag[..., None, :] * np.eye(self.dim)

    def transition(self, t, s) -> np.ndarray:
        """``T(t,s)`` (o ``𝒜(m,n)``) por lotes."""
        if not self.discrete:
            return self.family.evolve_many(t, s)
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        out = np.empty(t.shape + (self.dim, self.dim))
        for idx in np.ndindex(t.shape):
            out[idx] = self.family.evaluate(int(t[idx]), int(s[idx]))
        return out

    def branch(self, t, s, forward: bool) -> np.ndarray:
        """Evalúa una rama fija de ``𝒢`` (``forward``: la de ``t ≥ s``), incluida ``s = t``."""
        mats = self.transition(t, s)
        diag = self.projection_diagonal(np.broadcast_to(np.asarray(s, dtype=float), mats.shape[:-2]))
        if forward:
            return mats * diag[..., None, :]
        return -mats * (1.0 - diag)[..., None, :]

    def row(self, m: int, lo: int, hi: int) -> np.ndarray:
        """``𝒢(m, k)`` para ``k = lo..hi`` en tiempo discreto; devuelve ``(hi-lo+1, d, d)``."""
        rows = self.family.row(m, lo, hi)
        ks = np.arange(lo, hi + 1, dtype=float)
        diag = self.projection_diagonal(ks)
        forward = (ks <= m)[:, None, None]
        return np.where(forward, rows * diag[:, None, :], -rows * (1.0 - diag)[:, None, :])

    def __call__(self, t, s) -> np.ndarray:
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        forward = self.branch(t, s, True)
        backward = self.branch(t, s, False)
        return np.where((t >= s)[..., None, None], forward, backward)


def operator_norm(mats: np.ndarray) -> np.ndarray:
    """Norma espectral de una pila de matrices."""
    if mats.shape[-1] == 1:
        return np.abs(mats[..., 0, 0])
    return np.linalg.norm(mats, ord=2, axis=(-2, -1))


def derive_envelope(spec: KernelSpec) -> Optional[DecayEnvelope]:
    """
    Envolvente de decaimiento implícita en una especificación.

    Una rama cuya proyección la anula recibe constante ``0`` para no sumar cola.
    """
    if spec.envelope is not None:
        return spec.envelope
    if spec.trichotomy is not None:
        return DecayEnvelope(kind=DecayKind.TRICHOTOMY, trichotomy=spec.trichotomy)
    if spec.dichotomy is None:
        return None
    d = spec.dichotomy
    diag = None if spec.projection is None else np.asarray(spec.projection, dtype=float)
    has_range = diag is None or bool(np.any(diag != 0.0))
    has_kernel = diag is not None and bool(np.any(diag != 1.0))
    return DecayEnvelope(
        kind=DecayKind.EXPONENTIAL,
        d_forward=d.D1 if has_range else 0.0,
        rate_forward=d.lambda1,
        d_backward=d.D2 if has_kernel else 0.0,
        rate_backward=d.lambda2,
    )


class GreenService:
    """Servicio de núcleos de Green, cantidades de hipótesis y condiciones."""

    def build_kernel(self, sys: CoupledSystem, spec: Optional[KernelSpec] = None,
                     numerics: Optional[NumericsConfig] = None) -> GreenKernel:
        """
        Construye el núcleo de un sistema.

        :param spec: Especificación; por defecto la sugerida por el sistema o la identidad.
        :raises ParameterValidationError: Si la proyección no tiene la dimensión de X.
        """
        numerics = numerics or NumericsConfig()
        spec = spec or sys.default_kernel or KernelSpec()
        for name, diag in (("projection", spec.projection),
                           ("trichotomy", spec.trichotomy.plus if spec.trichotomy else None)):
            if diag is not None and len(diag) != sys.dim_x:
                raise ParameterValidationError(
                    f"La proyección '{name}' tiene dimensión {len(diag)} y X tiene dimensión {sys.dim_x}"
                )
            if diag is not None and any(v not in (0.0, 1.0) for v in diag):
                raise ParameterValidationError("Las proyecciones diagonales solo admiten 0 y 1")
        family = flow_service.evolution_family(sys, numerics)
        envelope = derive_envelope(spec)
        if envelope is None:
            logger.warning(f"El núcleo de '{sys.name}' no tiene envolvente de decaimiento; las colas no se certifican")
        return GreenKernel(sys, spec, family, envelope)

    def green_eval(self, gk: GreenKernel, t: float, s: float) -> np.ndarray:
        """
        Evalúa ``𝒢(t,s)``.

        :raises WindowError: Si ``t`` o ``s`` salen de la ventana.
        """
        return gk(t, s)

    def trichotomy_green(self, td: TrichotomyData, t: float, s: float, sys: CoupledSystem,
                         numerics: Optional[NumericsConfig] = None) -> np.ndarray:
        """``𝒢(t,s)`` con la proyección empalmada ``P⁺`` (``s ≥ 0``) / ``P⁻`` (``s < 0``)."""
        gk = self.build_kernel(sys, KernelSpec(trichotomy=td), numerics)
        return gk(t, s)

    def tail_bound(self, envelope: DecayEnvelope, weight: Weight, L: float, t: float = 0.0,
                   discrete: bool = False) -> float:
        """
        Cota de la cola ``|s - t| > L`` (o ``|n - m| ≥ L``) de ``∫ |𝒢| w``.

        :raises DivergenceError: Si la combinación no es integrable.
        """
        return envelope.tail(weight, L, t=t, discrete=discrete)

    def kernel_envelope_ratio(self, gk: GreenKernel, t, s) -> float:
        """Máximo de ``|𝒢(t,s)| / cota(t,s)`` sobre los pares dados."""
        if gk.envelope is None:
            return math.inf
        norms = operator_norm(gk(t, s))
        bound = gk.envelope.bound(t, s)
        ratios = np.where(bound > 0, norms / np.where(bound > 0, bound, 1.0), np.where(norms > 0, np.inf, 0.0))
        return float(np.max(ratios))

    def resolve_truncation(self, gk: GreenKernel, weights: List[Weight], target: float, ts: Iterable[float],
                           cap: float, numerics: NumericsConfig, growth: Tuple[float, float] = (0.0, 0.0),
                           growth_scale: float = 1.0) -> Tuple[float, float]:
        """
        Radio de truncamiento ``L`` y cola certificada correspondiente.

        Con ``numerics.truncation`` fijo se usa ese radio; si no, se busca el menor
        ``L ≤ cap`` cuya cola no supera ``target``.

        :return: ``(L, cola)``; la cola es ``nan`` sin envolvente.
        :raises WindowError: Si el radio fijo excede ``cap``.
        :raises DivergenceError: Si la cola no es integrable.
        """
        ts = list(ts)
        discrete = gk.discrete
        if numerics.truncation is not None:
            L = float(numerics.truncation)
            if discrete:
                L = float(math.ceil(L))
            if L > cap + 1e-12:
                raise WindowError(f"El truncamiento L={L} excede el máximo {cap} permitido por la ventana")
        else:
            L = None

        if gk.envelope is None:
            return (L if L is not None else cap), math.nan

        def tail(radius: float) -> float:
            return max(
                gk.envelope.tail(w, radius, t=t, discrete=discrete, growth=growth, growth_scale=growth_scale)
                for w in weights for t in ts
            )

        if L is not None:
            return L, tail(L)
        lo, hi = 0.0, 1.0
        while tail(hi) > target and hi < cap:
            lo, hi = hi, min(2.0 * hi, cap)
        if tail(hi) > target:
            logger.warning(f"La cola con L={hi} es {tail(hi):.3e} y supera el objetivo {target:.1e}")
            return hi, tail(hi)
        for _ in range(40):
            if hi - lo <= (1.0 if discrete else 0.5 * numerics.quad_spacing):
                break
            mid = 0.5 * (lo + hi)
            if discrete:
                mid = float(math.floor(mid))
                if mid <= lo:
                    break
            if tail(mid) > target:
                lo = mid
            else:
                hi = mid
        return hi, tail(hi)

    def truncation_cap(self, sys: CoupledSystem, numerics: NumericsConfig, extent: float = 0.0) -> float:
        """Máximo radio admisible para evaluar en ``[-extent, extent]`` sin salir de la ventana."""
        window = float(int(numerics.t_max)) if sys.discrete else numerics.t_max
        if extent > 0 or sys.autonomous:
            return window - extent
        if sys.period is not None:
            return window - sys.period
        return window / 2.0

    def sup_grid(self, sys: CoupledSystem, L: float, numerics: NumericsConfig) -> np.ndarray:
        """
        Tiempos donde se aproxima el supremo en ``t``.

        Un solo punto para sistemas autónomos, un período para los periódicos y
        ``[-(T_max-L), T_max-L]`` en otro caso.
        """
        window = float(int(numerics.t_max)) if sys.discrete else numerics.t_max
        points = numerics.sup_grid_points
        if sys.autonomous:
            return np.zeros(1)
        if sys.period is not None:
            if sys.discrete:
                return np.arange(int(round(sys.period)), dtype=float)
            return np.linspace(0.0, sys.period, points, endpoint=False)
        half = max(window - L, 0.0)
        if sys.discrete:
            return np.unique(np.round(np.linspace(-half, half, points)))
        return np.linspace(-half, half, points)

    def integrate_kernel(self, gk: GreenKernel, ts: np.ndarray, L: float, numerics: NumericsConfig,
                         weight: Callable[[np.ndarray, np.ndarray, bool], np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
        """
        ``∫_{t-L}^{t+L} |𝒢(t,s)| w(t,s) ds`` por Simpson, separado en ``s = t``.

        :param weight: ``w(t, s, forward)`` con ``forward`` indicando la rama ``s ≤ t``.
        :return: ``(integrales, error de Richardson)`` con forma ``ts.shape``.
        """
        n = interval_count(L, numerics.quad_spacing)
        spacing = L / n
        u = spacing * np.arange(n + 1)
        t_col = np.asarray(ts, dtype=float)[:, None]
        total = np.zeros(t_col.shape[0])
        error = np.zeros(t_col.shape[0])
        w = simpson_weights(n, spacing)
        for forward, s in ((True, t_col - u), (False, t_col + u)):
            if (forward and gk.is_zero) or (not forward and gk.is_identity):
                continue
            tt = np.broadcast_to(t_col, s.shape)
            integrand = operator_norm(gk.branch(tt, s, forward)) * weight(tt, s, forward)
            total += integrand @ w
            error += richardson_error(integrand, n, spacing, axis=1)
        return total, error

    def sum_kernel(self, gk: GreenKernel, ms: np.ndarray, L: float,
                   weight: Callable[[int, np.ndarray], np.ndarray]) -> np.ndarray:
        """``Σ_{|n-m|<L} |𝒢(m,n)| w(m,n)`` exacto para cada ``m``."""
        radius = int(L) - 1
        out = np.zeros(len(ms))
        for i, m in enumerate(ms):
            m = int(m)
            lo, hi = m - radius, m + radius
            ns = np.arange(lo, hi + 1, dtype=float)
            out[i] = float(np.sum(operator_norm(gk.row(m, lo, hi)) * weight(m, ns)))
        return out

    def hypothesis_N_q(self, sys: CoupledSystem, gk: GreenKernel,
                       numerics: Optional[NumericsConfig] = None) -> HypothesisReport:
        """
        Calcula ``N = sup_t ∫|𝒢|μ`` y ``q = sup_t ∫|𝒢|γ`` con sus colas certificadas.

        También registra ``sup_t ∫|𝒢|`` y ``sup_t ∫|𝒢|ε`` para la condición ``r``.
        El supremo en ``t`` es un máximo sobre la malla de :meth:`sup_grid`.

        :rtype: HypothesisReport
        """
        numerics = numerics or NumericsConfig()
        warnings: List[str] = []
        weights = {"mu": sys.mu_envelope, "gamma": sys.gamma_envelope, "one": 1.0, "eps": sys.eps_envelope}
        cap = self.truncation_cap(sys, numerics)
        target = numerics.check_tol / 3.0
        ts_probe = self.sup_grid(sys, cap, numerics)
        tails: Dict[str, float] = {}
        divergent: Dict[str, bool] = {}
        try:
            L, _ = self.resolve_truncation(gk, [sys.mu_envelope, sys.gamma_envelope], target,
                                           ts_probe, cap, numerics)
        except DivergenceError as e:
            warnings.append(f"Cola no integrable para μ o γ: {e}")
            L = float(numerics.truncation or cap)
        ts = self.sup_grid(sys, L, numerics)
        certified = gk.envelope is not None
        if not certified:
            warnings.append("Sin envolvente de decaimiento: la cola no está certificada")
        for name, w in weights.items():
            divergent[name] = False
            if not certified:
                tails[name] = 0.0
                continue
            try:
                tails[name] = max(gk.envelope.tail(w, L, t=float(t), discrete=sys.discrete) for t in ts)
            except DivergenceError:
                tails[name] = math.inf
                divergent[name] = True

        quad_error = 0.0
        values: Dict[str, float] = {}
        if sys.discrete:
            fns = {
                "mu": lambda m, n: sys.mu_envelope(n - 1.0),
                "gamma": lambda m, n: sys.gamma_envelope(n - 1.0),
                "one": lambda m, n: np.ones_like(n),
                "eps": lambda m, n: sys.eps_envelope(n - 1.0),
            }
            for name, fn in fns.items():
                values[name] = float(np.max(self.sum_kernel(gk, ts, L, fn)))
        else:
            fns = {
                "mu": lambda t, s, fw: sys.mu_envelope(s),
                "gamma": lambda t, s, fw: sys.gamma_envelope(s),
                "one": lambda t, s, fw: np.ones_like(s),
                "eps": lambda t, s, fw: sys.eps_envelope(s),
            }
            for name, fn in fns.items():
                integral, err = self.integrate_kernel(gk, ts, L, numerics, fn)
                values[name] = float(np.max(integral))
                quad_error = max(quad_error, float(np.max(err)))

        def certified_value(name: str) -> float:
            return values[name] + tails[name]

        report = HypothesisReport(
            N_value=values["mu"],
            q_value=values["gamma"],
            N_certified=certified_value("mu"),
            q_certified=certified_value("gamma"),
            r_value=certified_value("one"),
            q_eps_value=certified_value("eps"),
            truncation=L,
            tail_bound=max(tails["mu"], tails["gamma"]),
            quadrature_error=None if sys.discrete else quad_error,
            sup_is_grid_max=True,
            sup_grid_points=int(len(ts)),
            certified=certified and not (divergent["mu"] or divergent["gamma"]),
            warnings=warnings,
        )
        bound_tag, r_tag = ("boundd", "rd") if sys.discrete else ("bound", "r")
        report.margins[bound_tag] = _strict_margin(
            bound_tag, report.q_certified, math.isfinite(report.N_certified),
            divergent["mu"] or divergent["gamma"], certified, "summation" if sys.discrete else "quadrature",
            note=f"N={report.N_certified:.6g}",
        )
        report.margins[r_tag] = _strict_margin(
            r_tag, report.q_eps_value, math.isfinite(report.r_value),
            divergent["one"] or divergent["eps"], certified, "summation" if sys.discrete else "quadrature",
            note=f"sup∫|𝒢|={report.r_value:.6g}",
        )
        logger.info(
            f"Hipótesis de '{sys.name}': N={report.N_certified:.8g}, q={report.q_certified:.8g}, L={L:g}"
        )
        return report

    def holder_x_condition(self, sys: CoupledSystem, gk: GreenKernel, C: float, alpha: float,
                           delta: str = "delta1", numerics: Optional[NumericsConfig] = None,
                           method: str = "auto") -> ConditionMargin:
        """
        Margen ``C - LHS`` de las condiciones de Hölder en ``x``.

        ``delta1`` da la condición ``c1`` (prefactor ``max{2M,N}(1+C)``) y ``delta2``
        la condición ``c2`` (prefactor ``2M``); en tiempo discreto ``c1d``/``c2d``.

        :raises ParameterValidationError: Si ``α ∉ (0,1)``, ``C ≤ 0`` o ``delta`` no aplica.
        """
        from app.services.holder_service import DeltaKind

        kind = DeltaKind(delta)
        if kind not in (DeltaKind.DELTA1, DeltaKind.DELTA2):
            raise ParameterValidationError(f"La condición en x admite delta1 o delta2, no {delta}")
        first = kind == DeltaKind.DELTA1
        prefactor = max(2.0 * sys.M_bound, sys.N_eps_bound) * (1.0 + C) if first else 2.0 * sys.M_bound
        tag = ("c1" if first else "c2") + ("d" if sys.discrete else "")
        return self._holder_condition(sys, gk, C, alpha, kind, prefactor, tag, numerics, method)

    def holder_y_condition(self, sys: CoupledSystem, gk: GreenKernel, C: float, alpha: float,
                           delta: str = "sigma", numerics: Optional[NumericsConfig] = None,
                           method: str = "auto") -> ConditionMargin:
        """
        Margen de las condiciones de Hölder en ``y``: ``c3`` con ``σ`` y ``c44`` con ``Δ3``
        (``c3d``/``c4d`` en tiempo discreto).
        """
        from app.services.holder_service import DeltaKind

        kind = DeltaKind(delta)
        if kind not in (DeltaKind.SIGMA, DeltaKind.DELTA3):
            raise ParameterValidationError(f"La condición en y admite sigma o delta3, no {delta}")
        sigma = kind == DeltaKind.SIGMA
        prefactor = max(2.0 * sys.M_bound, sys.N_eps_bound) * (1.0 + C) if sigma else 2.0 * sys.M_bound
        if sys.discrete:
            tag = "c3d" if sigma else "c4d"
        else:
            tag = "c3" if sigma else "c44"
        return self._holder_condition(sys, gk, C, alpha, kind, prefactor, tag, numerics, method)

    def _holder_condition(self, sys, gk, C, alpha, kind, prefactor, tag, numerics, method) -> ConditionMargin:
        from app.services.holder_service import holder_service

        if not 0.0 < alpha < 1.0:
            raise ParameterValidationError(f"α debe estar en (0, 1), se recibió {alpha}")
        if C <= 0:
            raise ParameterValidationError(f"C debe ser positivo, se recibió {C}")
        numerics = numerics or NumericsConfig()
        if sys.eps_envelope.is_zero():
            return ConditionMargin(tag=tag, lhs=0.0, rhs=C, margin=C, passed=True, method="closed_form",
                                   note="ε ≡ 0")
        spec = holder_service.delta_bounds(holder_service.envelope_constants(sys, gk), kind)
        eps = sys.eps_envelope
        use_closed = (
            method in ("auto", "closed_form")
            and not sys.discrete
            and gk.envelope is not None
            and gk.envelope.kind == DecayKind.EXPONENTIAL
            and eps.kind.value == "constant"
        )
        if use_closed:
            total = 0.0
            sides = ((gk.envelope.d_forward, gk.envelope.rate_forward, spec.k_behind, spec.rate_behind),
                     (gk.envelope.d_backward, gk.envelope.rate_backward, spec.k_ahead, spec.rate_ahead))
            for d, lam, k, rate in sides:
                if d == 0.0:
                    continue
                net = lam - alpha * rate
                if net <= 0:
                    return _divergent_margin(tag, C, "closed_form", f"λ - α·a = {net:.3g} ≤ 0")
                total += d * k ** alpha / net
            lhs = prefactor * eps.sup() ** alpha * total
            return ConditionMargin(tag=tag, lhs=lhs, rhs=C, margin=C - lhs, passed=lhs <= C, method="closed_form")

        growth = (alpha * spec.rate_behind, alpha * spec.rate_ahead)
        growth_scale = max(spec.k_ahead, spec.k_behind) ** alpha
        if sys.discrete:
            growth_scale *= math.exp(alpha * max(spec.rate_ahead, spec.rate_behind))
        cap = self.truncation_cap(sys, numerics)
        try:
            L, tail = self.resolve_truncation(gk, [eps.sup() ** alpha], numerics.check_tol / 3.0,
                                              [0.0], cap, numerics, growth=growth, growth_scale=growth_scale)
        except DivergenceError as e:
            return _divergent_margin(tag, C, "summation" if sys.discrete else "quadrature", str(e))
        ts = self.sup_grid(sys, L, numerics)
        if sys.discrete:
            values = self.sum_kernel(gk, ts, L, lambda m, n: eps(n - 1.0) ** alpha * spec(n - 1.0, m) ** alpha)
            used = "summation"
        else:
            values, _ = self.integrate_kernel(
                gk, ts, L, numerics,
                lambda t, s, fw: eps(s) ** alpha * spec.branch(s, t, ahead=not fw) ** alpha,
            )
            used = "quadrature"
        certified = not math.isnan(tail)
        lhs = prefactor * (float(np.max(values)) + (tail if certified else 0.0))
        return ConditionMargin(tag=tag, lhs=lhs, rhs=C, margin=C - lhs, passed=lhs <= C, method=used,
                               certified=certified, note=f"L={L:g}")

    def dichotomy_corollary_check(self, dd: DichotomyData, M: float, eps: float, alpha: float, C: float,
                                  M2: Optional[float] = None) -> HypothesisReport:
        """
        Desigualdades cerradas de los corolarios de dicotomía exponencial.

        Evalúa ``epcon``, ``epcon1``, ``epcon4`` y, si se da ``M2``, ``cor2cond1`` y
        ``cor2condition3``. Un α fuera del intervalo admisible marca la condición
        como inadmisible.

        :raises ParameterValidationError: Si alguna constante no es positiva o ``α ∉ (0,1)``.
        """
        for name, value in (("M", M), ("ε", eps), ("C", C)):
            if not value > 0:
                raise ParameterValidationError(f"La constante {name} debe ser positiva, se recibió {value}")
        if M2 is not None and not M2 > 0:
            raise ParameterValidationError(f"La constante M2 debe ser positiva, se recibió {M2}")
        if not 0.0 < alpha < 1.0:
            raise ParameterValidationError(f"α debe estar en (0, 1), se recibió {alpha}")
        d = dd
        report = HypothesisReport()

        lhs = (d.D1 / d.lambda1 + d.D2 / d.lambda2) * eps
        report.margins["epcon"] = ConditionMargin(tag="epcon", lhs=lhs, rhs=1.0, margin=1.0 - lhs, passed=lhs < 1.0)

        bounds = {
            "epcon1": min(d.lambda1 / d.a2, d.lambda2 / d.a1),
            "epcon4": min(d.lambda1 / (d.a2 + d.K1 * eps), d.lambda2 / (d.a1 + d.K2 * eps)),
        }
        ea = eps ** alpha
        forms = {
            "epcon1": lambda: max(2.0 * M, eps) * (1.0 + C) * ea * (
                d.D1 * d.K1 ** alpha / (d.lambda1 - alpha * d.a2) + d.D2 * d.K2 ** alpha / (d.lambda2 - alpha * d.a1)
            ),
            "epcon4": lambda: 2.0 * M * ea * (
                d.D1 * d.K1 ** alpha / (d.lambda1 - alpha * (d.a2 + d.K1 * eps))
                + d.D2 * d.K2 ** alpha / (d.lambda2 - alpha * (d.a1 + d.K2 * eps))
            ),
        }
        if M2 is not None:
            M3 = max(M2, d.a1, d.a2)
            bounds["cor2cond1"] = min(d.lambda1 / M2, d.lambda2 / M2)
            bounds["cor2condition3"] = min(d.lambda1 / (M3 + d.K2 * eps), d.lambda2 / (M3 + d.K1 * eps))
            forms["cor2cond1"] = lambda: 2.0 * M * (1.0 + C) * ea * (
                d.D1 / (d.lambda1 - alpha * M2) + d.D2 / (d.lambda2 - alpha * M2)
            )
            forms["cor2condition3"] = lambda: 2.0 ** (1.0 + alpha) * M * ea * (
                d.D1 / (d.lambda1 - alpha * (M3 + d.K2 * eps)) + d.D2 / (d.lambda2 - alpha * (M3 + d.K1 * eps))
            )
        for tag, form in forms.items():
            report.alpha_bounds[tag] = bounds[tag]
            if alpha >= bounds[tag]:
                report.margins[tag] = _inadmissible_margin(tag, C, bounds[tag])
                continue
            value = form()
            report.margins[tag] = ConditionMargin(tag=tag, lhs=value, rhs=C, margin=C - value, passed=value <= C)
        return report

    def coppel_conditions(self, eps: float, c: float, M: float, alpha: float, C: float) -> Dict[str, ConditionMargin]:
        """
        Condiciones cerradas del ejemplo escalar con ``T(t,s) = (φ(t)/φ(s)) e^{-(t-s)}`` y ``P ≡ I``.

        Usa ``sup ∫|𝒢| ≤ 2 + ∫(1/φ - 1) = 2 + 2c``.
        """
        if not 0.0 < alpha < 1.0:
            raise ParameterValidationError(f"α debe estar en (0, 1), se recibió {alpha}")
        margins: Dict[str, ConditionMargin] = {}
        lhs = eps * (2.0 + 2.0 * c)
        margins["coppel_bound"] = ConditionMargin(tag="coppel_bound", lhs=lhs, rhs=1.0, margin=1.0 - lhs,
                                                  passed=lhs < 1.0)
        lhs = max(2.0 * M, eps) * (1.0 + C) * eps ** alpha * (2.0 / (1.0 - alpha) + 2.0 * c)
        margins["coppel_c1"] = ConditionMargin(tag="coppel_c1", lhs=lhs, rhs=C, margin=C - lhs, passed=lhs <= C)
        if alpha * (1.0 + eps) >= 1.0:
            margins["coppel_c2"] = _inadmissible_margin("coppel_c2", C, 1.0 / (1.0 + eps))
        else:
            lhs = 2.0 * M * eps ** alpha * (2.0 / (1.0 - alpha * (1.0 + eps)) + 2.0 * c)
            margins["coppel_c2"] = ConditionMargin(tag="coppel_c2", lhs=lhs, rhs=C, margin=C - lhs, passed=lhs <= C)
        return margins

    def polynomial_admissibility(self, sys: CoupledSystem) -> ConditionMargin:
        """``∫(1+s²)μ < ∞`` y ``∫(1+s²)γ < 1`` en forma cerrada para perfiles racionales."""
        mu_moment = sys.mu_envelope.polynomial_moment()
        gamma_moment = sys.gamma_envelope.polynomial_moment()
        passed = math.isfinite(mu_moment) and gamma_moment < 1.0
        return ConditionMargin(
            tag="e1_admissibility", lhs=gamma_moment, rhs=1.0, margin=1.0 - gamma_moment, passed=passed,
            divergent=not math.isfinite(mu_moment) or not math.isfinite(gamma_moment),
            note=f"∫(1+s²)μ={mu_moment:.6g}",
        )


def _strict_margin(tag: str, lhs: float, finite: bool, divergent: bool, certified: bool, method: str,
                   note: str = "") -> ConditionMargin:
    margin = 1.0 - lhs
    return ConditionMargin(tag=tag, lhs=lhs, rhs=1.0, margin=margin, passed=bool(finite and lhs < 1.0),
                           divergent=divergent, certified=certified, method=method, note=note)


def _divergent_margin(tag: str, C: float, method: str, note: str) -> ConditionMargin:
    logger.warning(f"Condición '{tag}' divergente: {note}")
    return ConditionMargin(tag=tag, lhs=math.inf, rhs=C, margin=-math.inf, passed=False, admissible=False,
                           divergent=True, method=method, note=note)


def _inadmissible_margin(tag: str, C: float, bound: float) -> ConditionMargin:
    return ConditionMargin(tag=tag, lhs=math.inf, rhs=C, margin=-math.inf, passed=False, admissible=False,
                           note=f"α debe ser menor que {bound:.6g}")


green_service = GreenService()
