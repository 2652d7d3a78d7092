"""
Módulo de servicio de conjugaciones.

Resuelve la ecuación de punto fijo de ``h`` por iteración de Picard, calcula
``h̄`` por cuadratura (o suma) directa a lo largo del flujo acoplado y
verifica las identidades de inversa y de transporte de soluciones.
"""
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from app.core.exceptions import (
    ConvergenceError,
    DivergenceError,
    ExtentError,
    HypothesisFailure,
    MissingConstantsError,
    ParameterValidationError,
)
from app.models.system_model import CoupledSystem
from app.models.table_model import ConjugacyPair, FunctionTable, GridSpec, SolverInfo
from app.schemas.reports import DefectReport, HypothesisReport
from app.schemas.run_config import NumericsConfig
from app.services.flow_service import flow_service
from app.services.green_service import GreenKernel, green_service
from app.utils.quadrature import interval_count, richardson_error, simpson_weights
from app.utils.rk4 import integrate
from app.utils.table_io import write_rows_csv

logger = logging.getLogger(__name__)


class ConjugacyService:
    """Servicio de resolución y verificación de las conjugaciones ``H`` y ``H̄``."""

    def solve_pair(self, sys: CoupledSystem, gk: GreenKernel, grid: Optional[GridSpec] = None,
                   numerics: Optional[NumericsConfig] = None,
                   report: Optional[HypothesisReport] = None) -> ConjugacyPair:
        """
        Resuelve ``h`` y calcula ``h̄`` sobre la misma malla.

        :raises HypothesisFailure: Si ``q ≥ 1``.
        :raises ConvergenceError: Si Picard no converge.
        """
        numerics = numerics or NumericsConfig()
        grid = grid or GridSpec()
        report = report or green_service.hypothesis_N_q(sys, gk, numerics)
        if sys.discrete:
            h_table = self.solve_h_discrete(sys, gk, grid, numerics, report)
            hbar_table = self.compute_hbar_discrete(sys, gk, grid, numerics, report)
        else:
            h_table = self.solve_h(sys, gk, grid, numerics, report)
            hbar_table = self.compute_hbar(sys, gk, grid, numerics, report)
        return ConjugacyPair(system=sys, kernel=gk, h_table=h_table, hbar_table=hbar_table)

    # Resolución en tiempo continuo

    def solve_h(self, sys: CoupledSystem, gk: GreenKernel, grid: Optional[GridSpec] = None,
                numerics: Optional[NumericsConfig] = None,
                report: Optional[HypothesisReport] = None) -> FunctionTable:
        """
        Punto fijo ``h = T(h)`` por Picard desde ``h ≡ 0``.

        Cada barrido actualiza todos los nodos con
        ``∫ 𝒢(τ,s) f(s, x1 + h_k(s, x1, y), y) ds`` sobre ``[τ-L, τ+L]`` y se detiene
        cuando el cambio máximo no supera ``tol·(1-q)``.

        :raises HypothesisFailure: Si ``q ≥ 1``.
        :raises ConvergenceError: Si no converge en ``max_sweeps`` barridos.
        """
        numerics = numerics or NumericsConfig()
        grid = grid or GridSpec()
        if sys.discrete:
            raise ParameterValidationError("Use solve_h_discrete para sistemas en tiempo discreto")
        report = report or green_service.hypothesis_N_q(sys, gk, numerics)
        q = self._require_contraction(report)
        taus = grid.tau_nodes()
        xi, eta = grid.node_points(sys.dim_x, sys.dim_y)
        L, tail, n = self._solver_truncation(sys, gk, taus, numerics)
        spacing = numerics.quad_spacing
        weights = simpson_weights(n, spacing)
        sides = self._uncoupled_sides(sys, gk, taus, eta, n, numerics)

        h = np.zeros((len(taus), xi.shape[0], eta.shape[0], sys.dim_x))
        deltas: List[float] = []
        quad_error = 0.0
        for sweep in range(1, numerics.max_sweeps + 1):
            table = self._make_table("h", sys, grid, taus, h)
            h_new = np.zeros_like(h)
            quad_error = 0.0
            for i in range(len(taus)):
                for side in sides:
                    x1 = np.einsum("jkl,al->jak", side["X1"][i], xi)[:, :, None, :]
                    ys = side["Y"][i][:, None, :, :]
                    s = side["s"][i][:, None, None]
                    batch = (n + 1, xi.shape[0], eta.shape[0])
                    hval = table(s, x1, ys)
                    forcing = sys.nonlinearity(
                        np.broadcast_to(s, batch), x1 + hval, np.broadcast_to(ys, batch + (sys.dim_y,))
                    )
                    integrand = np.einsum("jkl,jabl->jabk", side["G"][i], forcing)
                    h_new[i] += np.tensordot(weights, integrand, axes=(0, 0))
                    quad_error = max(quad_error, float(np.max(richardson_error(integrand, n, spacing), initial=0.0)))
            delta = float(np.max(np.linalg.norm(h_new - h, axis=-1), initial=0.0))
            deltas.append(delta)
            h = h_new
            logger.debug(f"Barrido {sweep}: cambio {delta:.3e}")
            if not math.isfinite(delta):
                raise ConvergenceError("La iteración de Picard produjo valores no finitos", deltas)
            if delta <= numerics.tol * (1.0 - q):
                break
        else:
            raise ConvergenceError(
                f"Picard no convergió en {numerics.max_sweeps} barridos (último cambio {deltas[-1]:.3e})", deltas
            )
        table = self._make_table("h", sys, grid, taus, h)
        table.info = self._solver_info(table, report, q, deltas, L, tail, quad_error, fixed_point=True)
        logger.info(
            f"h de '{sys.name}' resuelta en {len(deltas)} barridos; presupuesto {table.info.error_budget:.3e}"
        )
        return table

    def compute_hbar(self, sys: CoupledSystem, gk: GreenKernel, grid: Optional[GridSpec] = None,
                     numerics: Optional[NumericsConfig] = None,
                     report: Optional[HypothesisReport] = None) -> FunctionTable:
        """``h̄(τ,ξ,η) = -∫ 𝒢(τ,s) f(s, x2(s,τ,ξ,η), y(s,τ,η)) ds`` en una sola pasada."""
        numerics = numerics or NumericsConfig()
        grid = grid or GridSpec()
        if sys.discrete:
            raise ParameterValidationError("Use compute_hbar_discrete para sistemas en tiempo discreto")
        report = report or green_service.hypothesis_N_q(sys, gk, numerics)
        q = self._require_contraction(report)
        taus = grid.tau_nodes()
        xi, eta = grid.node_points(sys.dim_x, sys.dim_y)
        L, tail, n = self._solver_truncation(sys, gk, taus, numerics)
        spacing = numerics.quad_spacing
        weights = simpson_weights(n, spacing)
        stride = numerics.quad_stride
        u = spacing * np.arange(n + 1)

        states = np.concatenate(
            [np.broadcast_to(xi[:, None, :], (xi.shape[0], eta.shape[0], sys.dim_x)),
             np.broadcast_to(eta[None, :, :], (xi.shape[0], eta.shape[0], sys.dim_y))],
            axis=-1,
        )
        hbar = np.zeros((len(taus), xi.shape[0], eta.shape[0], sys.dim_x))
        quad_error = 0.0
        for i, tau in enumerate(taus):
            for forward in self._live_sides(gk):
                direction = -1 if forward else 1
                s = tau + direction * u
                kernel = gk.branch(np.full_like(s, tau), s, forward)
                traj = flow_service.state_trajectories(sys, tau, states, n * stride, stride, direction, numerics,
                                                       coupled=True)
                x2, y = traj[..., : sys.dim_x], traj[..., sys.dim_x:]
                batch = x2.shape[:-1]
                forcing = sys.nonlinearity(np.broadcast_to(s[:, None, None], batch), x2, y)
                integrand = np.einsum("jkl,jabl->jabk", kernel, forcing)
                hbar[i] -= np.tensordot(weights, integrand, axes=(0, 0))
                quad_error = max(quad_error, float(np.max(richardson_error(integrand, n, spacing), initial=0.0)))
        table = self._make_table("hbar", sys, grid, taus, hbar)
        table.info = self._solver_info(table, report, q, [], L, tail, quad_error, fixed_point=False)
        logger.info(f"h̄ de '{sys.name}' calculada; presupuesto {table.info.error_budget:.3e}")
        return table

    # Resolución en tiempo discreto

    def solve_h_discrete(self, sys_d: CoupledSystem, gk_d: GreenKernel, grid: Optional[GridSpec] = None,
                         numerics: Optional[NumericsConfig] = None,
                         report: Optional[HypothesisReport] = None) -> FunctionTable:
        """
        Punto fijo discreto ``h_n = Σ_k 𝒢(n,k) f_{k-1}(x1 + h_{k-1}(x1, y), y)`` con ``x1, y`` en ``k-1``.

        Las sumas son exactas sobre ``|k-n| < L`` y la cola se certifica.
        """
        numerics = numerics or NumericsConfig()
        grid = grid or GridSpec()
        if not sys_d.discrete:
            raise ParameterValidationError("solve_h_discrete requiere un sistema en tiempo discreto")
        report = report or green_service.hypothesis_N_q(sys_d, gk_d, numerics)
        q = self._require_contraction(report)
        taus = grid.tau_nodes(discrete=True)
        xi, eta = grid.node_points(sys_d.dim_x, sys_d.dim_y)
        L, tail, _ = self._solver_truncation(sys_d, gk_d, taus, numerics)
        L = int(L)
        paths = [self._discrete_uncoupled_path(sys_d, gk_d, int(n), L, xi, eta, numerics) for n in taus]

        h = np.zeros((len(taus), xi.shape[0], eta.shape[0], sys_d.dim_x))
        deltas: List[float] = []
        for sweep in range(1, numerics.max_sweeps + 1):
            table = self._make_table("h", sys_d, grid, taus, h)
            h_new = np.zeros_like(h)
            for i, path in enumerate(paths):
                x1 = path["X1"]
                idx = path["j"][:, None, None]
                batch = (len(path["j"]), xi.shape[0], eta.shape[0])
                hval = table(idx, x1, path["Y"])
                forcing = sys_d.nonlinearity(
                    np.broadcast_to(idx, batch), x1 + hval, np.broadcast_to(path["Y"], batch + (sys_d.dim_y,))
                )
                h_new[i] = np.einsum("jkl,jabl->abk", path["G"], forcing)
            delta = float(np.max(np.linalg.norm(h_new - h, axis=-1), initial=0.0))
            deltas.append(delta)
            h = h_new
            if not math.isfinite(delta):
                raise ConvergenceError("La iteración de Picard produjo valores no finitos", deltas)
            if delta <= numerics.tol * (1.0 - q):
                break
        else:
            raise ConvergenceError(
                f"Picard discreto no convergió en {numerics.max_sweeps} barridos (último cambio {deltas[-1]:.3e})",
                deltas,
            )
        table = self._make_table("h", sys_d, grid, taus, h)
        table.info = self._solver_info(table, report, q, deltas, float(L), tail, 0.0, fixed_point=True)
        logger.info(f"h discreta de '{sys_d.name}' resuelta en {len(deltas)} barridos")
        return table

    def compute_hbar_discrete(self, sys_d: CoupledSystem, gk_d: GreenKernel, grid: Optional[GridSpec] = None,
                              numerics: Optional[NumericsConfig] = None,
                              report: Optional[HypothesisReport] = None) -> FunctionTable:
        """``h̄_n(ξ,η) = -Σ_k 𝒢(n,k) f_{k-1}(x2(k-1,n,ξ,η), y(k-1,n,η))`` con órbitas exactas."""
        numerics = numerics or NumericsConfig()
        grid = grid or GridSpec()
        if not sys_d.discrete:
            raise ParameterValidationError("compute_hbar_discrete requiere un sistema en tiempo discreto")
        report = report or green_service.hypothesis_N_q(sys_d, gk_d, numerics)
        q = self._require_contraction(report)
        taus = grid.tau_nodes(discrete=True)
        xi, eta = grid.node_points(sys_d.dim_x, sys_d.dim_y)
        L, tail, _ = self._solver_truncation(sys_d, gk_d, taus, numerics)
        L = int(L)
        x0 = np.broadcast_to(xi[:, None, :], (xi.shape[0], eta.shape[0], sys_d.dim_x))
        y0 = np.broadcast_to(eta[None, :, :], (xi.shape[0], eta.shape[0], sys_d.dim_y))
        hbar = np.zeros((len(taus), xi.shape[0], eta.shape[0], sys_d.dim_x))
        for i, n in enumerate(taus):
            n = int(n)
            xs, ys = self._discrete_orbit_window(sys_d, n, x0, y0, L, coupled=True, numerics=numerics)
            j = np.arange(n - L, n + L - 1, dtype=float)
            kernel = gk_d.row(n, n - L + 1, n + L - 1)
            batch = xs.shape[:-1]
            forcing = sys_d.nonlinearity(np.broadcast_to(j[:, None, None], batch), xs, ys)
            hbar[i] = -np.einsum("jkl,jabl->abk", kernel, forcing)
        table = self._make_table("hbar", sys_d, grid, taus, hbar)
        table.info = self._solver_info(table, report, q, [], float(L), tail, 0.0, fixed_point=False)
        return table

    def brute_force_h_discrete(self, sys_d: CoupledSystem, gk_d: GreenKernel, probe: Tuple[int, np.ndarray, np.ndarray],
                               K: int, L: Optional[int] = None, numerics: Optional[NumericsConfig] = None,
                               report: Optional[HypothesisReport] = None) -> Tuple[np.ndarray, float]:
        """
        Oráculo discreto: ``K`` pasos de Picard sobre la órbita que pasa por ``probe``.

        Por la identidad de cociclo, ``h_{k-1}`` solo se evalúa sobre la misma órbita
        desacoplada, así que la iteración actúa sobre sucesiones. El nivel ``j`` se
        calcula en ``n ± (K-j)·L`` a partir del nivel anterior, sin interpolación.

        :return: ``(valor, radio certificado q^K·N + cola/(1-q))``.
        :raises HypothesisFailure: Si ``q ≥ 1``.
        """
        numerics = numerics or NumericsConfig()
        report = report or green_service.hypothesis_N_q(sys_d, gk_d, numerics)
        q = self._require_contraction(report)
        if K < 1:
            raise ParameterValidationError("La profundidad del oráculo debe ser al menos 1")
        n, xi, eta = int(probe[0]), np.asarray(probe[1], dtype=float), np.asarray(probe[2], dtype=float)
        if L is None:
            L, _, _ = self._solver_truncation(sys_d, gk_d, np.array([float(n)]), numerics)
        L = max(int(L), 2)
        reach = K * L
        wide = numerics.model_copy(update={"t_max": float(abs(n) + reach + L + 1)})
        gk_wide = green_service.build_kernel(sys_d, gk_d.spec, wide)
        tail = self._mu_tail(sys_d, gk_wide, float(L), [float(n)])

        lo, hi = n - reach, n + reach
        with np.errstate(over="ignore", invalid="ignore"):
            back = flow_service.orbit_path(sys_d, n, xi, eta, lo - n, coupled=False, numerics=wide)
            fwd = flow_service.orbit_path(sys_d, n, xi, eta, hi - n, coupled=False, numerics=wide)
        x1 = np.concatenate([back[0][::-1], fwd[0][1:]])
        y = np.concatenate([back[1][::-1], fwd[1][1:]])
        offsets = np.arange(-L + 1, L)
        outer = np.arange(n - (K - 1) * L, n + (K - 1) * L + 1)
        rows = np.stack([gk_wide.row(int(i), int(i) - L + 1, int(i) + L - 1) for i in outer])

        v = np.zeros_like(x1)
        with np.errstate(over="ignore", invalid="ignore"):
            for level in range(1, K + 1):
                radius = (K - level) * L
                idx = np.arange(n - radius, n + radius + 1)
                j = idx[:, None] + offsets[None, :] - 1
                pos = j - lo
                forcing = sys_d.nonlinearity(j.astype(float), x1[pos] + v[pos], y[pos])
                kernel = rows[idx - outer[0]]
                updated = np.einsum("akij,akj->ai", kernel, forcing)
                v_next = v.copy()
                v_next[idx - lo] = updated
                v = v_next
        value = v[n - lo]
        radius = q ** K * float(report.N_certified) + tail / (1.0 - q)
        return value, radius

    # Evaluación y verificación

    def eval_conjugacy(self, pair: ConjugacyPair, t: Union[float, int], x, y,
                       direction: str = "forward") -> Tuple[np.ndarray, np.ndarray]:
        """
        ``H(t,x,y) = (x + h(t,x,y), y)`` o ``H̄(t,x,y) = (x + h̄(t,x,y), y)``.

        Fuera de la caja se recorta y se registra un aviso.
        """
        if direction not in ("forward", "inverse"):
            raise ParameterValidationError(f"Dirección desconocida: {direction}")
        table = pair.h_table if direction == "forward" else pair.hbar_table
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        values, clamped = table.evaluate(t, x, y)
        if np.any(clamped):
            logger.warning(f"Evaluación de {table.kind} recortada a la caja en {int(np.sum(clamped))} puntos")
        return x + values, y.copy()

    def verify_inverse(self, pair: ConjugacyPair, samples: int, rng_seed: int = 0,
                       csv_path: Optional[Union[str, Path]] = None) -> DefectReport:
        """
        Defecto de ``H ∘ H̄ = id = H̄ ∘ H`` en muestras aleatorias.

        El presupuesto compone los de ambas tablas con el factor ``1 + q/(1-q)``.
        Las muestras con recorte se informan pero no entran en el máximo.
        """
        if samples < 1:
            raise ParameterValidationError("El número de muestras debe ser al menos 1")
        h, hbar = pair.h_table, pair.hbar_table
        rng = np.random.default_rng(rng_seed)
        t, x, y = self._sample_nodes(h, samples, rng)
        hb, clamp_a = hbar.evaluate(t, x, y)
        back_a, clamp_b = h.evaluate(t, x + hb, y)
        defect_a = np.linalg.norm(hb + back_a, axis=-1)
        hv, clamp_c = h.evaluate(t, x, y)
        back_b, clamp_d = hbar.evaluate(t, x + hv, y)
        defect_b = np.linalg.norm(hv + back_b, axis=-1)
        clamped = clamp_a | clamp_b | clamp_c | clamp_d
        kept = ~clamped

        q = h.info.q_value
        lip = 1.0 + q / (1.0 - q)
        budget = max(h.info.error_budget + lip * hbar.info.error_budget,
                     hbar.info.error_budget + lip * h.info.error_budget)
        report = DefectReport(
            check="inverse",
            max_defect=float(np.max(np.maximum(defect_a, defect_b)[kept], initial=0.0)),
            budget=budget,
            samples=samples,
            clamped=int(np.sum(clamped)),
            directions={
                "H_after_Hbar": float(np.max(defect_a[kept], initial=0.0)),
                "Hbar_after_H": float(np.max(defect_b[kept], initial=0.0)),
            },
        )
        if csv_path is not None:
            header = (["t"] + [f"x{i + 1}" for i in range(h.dim_x)] + [f"y{i + 1}" for i in range(h.dim_y)]
                      + ["defect_H_after_Hbar", "defect_Hbar_after_H", "clamped"])
            rows = (
                [float(t[k])] + [float(v) for v in x[k]] + [float(v) for v in y[k]]
                + [float(defect_a[k]), float(defect_b[k]), int(clamped[k])]
                for k in range(samples)
            )
            write_rows_csv(csv_path, header, rows)
        logger.info(f"Defecto de inversa {report.max_defect:.3e} con presupuesto {report.budget:.3e}")
        return report

    def verify_mapping(self, sys: CoupledSystem, pair: ConjugacyPair, samples: int, horizon: float,
                       rng_seed: int = 0, numerics: Optional[NumericsConfig] = None) -> DefectReport:
        """
        Comprueba que ``H`` lleva soluciones desacopladas a acopladas y ``H̄`` al revés.

        El presupuesto amplifica el de cada tabla con Gronwall (``Δ2`` para ``H``,
        ``Δ1`` para ``H̄``) y suma el error de RK4 estimado por paso doble; en tiempo
        discreto no hay término de integración.

        :raises ExtentError: Si la tabla no cubre ``τ + horizon``.
        """
        numerics = numerics or NumericsConfig()
        if samples < 1:
            raise ParameterValidationError("El número de muestras debe ser al menos 1")
        h, hbar = pair.h_table, pair.hbar_table
        growth = pair.kernel.spec.growth_constants()
        if growth is None:
            raise MissingConstantsError("verify_mapping necesita constantes de crecimiento K1, a1")
        eps = sys.eps_envelope.sup()
        rng = np.random.default_rng(rng_seed)
        lo, hi = float(h.tau_axis[0]), float(h.tau_axis[-1])
        covers_time = sys.autonomous or (sys.period is not None and h.tau_policy == "wrap")
        if not covers_time and hi - lo < horizon:
            raise ExtentError(f"La tabla cubre {hi - lo} unidades de tiempo y el horizonte es {horizon}")
        top = hi if covers_time else hi - horizon
        if sys.discrete:
            steps = int(round(horizon))
            t = rng.integers(int(math.ceil(lo)), int(math.floor(top)) + 1, size=samples).astype(float)
        else:
            steps = 0
            t = rng.uniform(lo, top, size=samples)
        half = 0.5
        x = rng.uniform(-half * h.grid.box_x, half * h.grid.box_x, size=(samples, sys.dim_x))
        y = rng.uniform(-half * h.grid.box_y, half * h.grid.box_y, size=(samples, sys.dim_y))
        t_end = t + (steps if sys.discrete else horizon)

        h0, c0 = h.evaluate(t, x, y)
        x1_end, y_end, err_lin = self._advance(sys, t, x, y, horizon, steps, coupled=False, numerics=numerics)
        x2_end, y2_end, err_cpl = self._advance(sys, t, x + h0, y, horizon, steps, coupled=True, numerics=numerics)
        h_end, c1 = h.evaluate(t_end, x1_end, y_end)
        defect_h = np.linalg.norm(x2_end - (x1_end + h_end), axis=-1)

        hb0, c2 = hbar.evaluate(t, x, y)
        z2_end, w_end, err_cpl2 = self._advance(sys, t, x, y, horizon, steps, coupled=True, numerics=numerics)
        z1_end, _, err_lin2 = self._advance(sys, t, x + hb0, y, horizon, steps, coupled=False, numerics=numerics)
        hb_end, c3 = hbar.evaluate(t_end, z2_end, w_end)
        defect_hbar = np.linalg.norm(z1_end - (z2_end + hb_end), axis=-1)

        clamped = c0 | c1 | c2 | c3
        kept = ~clamped
        amp_h = growth.K1 * math.exp((growth.a1 + growth.K1 * eps) * horizon)
        amp_hbar = growth.K1 * math.exp(growth.a1 * horizon)
        ode = 0.0 if sys.discrete else float(np.max(
            np.concatenate([err_lin, err_cpl, err_cpl2, err_lin2])[np.concatenate([kept] * 4)], initial=0.0
        ))
        budget_h = h.info.error_budget * (1.0 + amp_h) + 2.0 * ode
        budget_hbar = hbar.info.error_budget * (1.0 + amp_hbar) + 2.0 * ode
        dh = float(np.max(defect_h[kept], initial=0.0))
        dhb = float(np.max(defect_hbar[kept], initial=0.0))
        report = DefectReport(
            check="mapping",
            max_defect=max(dh, dhb),
            budget=max(budget_h, budget_hbar),
            samples=samples,
            clamped=int(np.sum(clamped)),
            directions={"H": dh, "Hbar": dhb, "H_budget": budget_h, "Hbar_budget": budget_hbar, "ode": ode},
        )
        logger.info(f"Defecto de transporte {report.max_defect:.3e} con presupuesto {report.budget:.3e}")
        return report

    def periodicity_defect(self, pair: ConjugacyPair, T0: float) -> float:
        """
        ``max |h(t+T0,x,y) - h(t,x,y)|`` sobre los nodos con ``t + T0`` dentro de la tabla.

        :raises ExtentError: Si la extensión temporal de la tabla es menor que ``T0``.
        """
        table = pair.h_table
        lo, hi = float(table.tau_axis[0]), float(table.tau_axis[-1])
        if T0 <= 0:
            raise ParameterValidationError("El período debe ser positivo")
        if hi - lo < T0 - 1e-12:
            raise ExtentError(f"La tabla cubre {hi - lo} unidades de tiempo y el período es {T0}")
        xi, eta = table.grid.node_points(table.dim_x, table.dim_y)
        starts = table.tau_axis[table.tau_axis + T0 <= hi + 1e-9]
        defect = 0.0
        for t in starts:
            shifted = min(t + T0, hi)
            a = table(np.full((xi.shape[0], eta.shape[0]), shifted), xi[:, None, :], eta[None, :, :])
            b = table(np.full((xi.shape[0], eta.shape[0]), t), xi[:, None, :], eta[None, :, :])
            defect = max(defect, float(np.max(np.linalg.norm(a - b, axis=-1), initial=0.0)))
        logger.info(f"Defecto de periodicidad con T0={T0}: {defect:.3e}")
        return defect

    # Utilidades internas

    def _require_contraction(self, report: HypothesisReport) -> float:
        q = report.q_certified
        if q is None or not q < 1.0:
            raise HypothesisFailure(f"La constante de contracción q={q} no es menor que 1")
        return float(q)

    def _mu_tail(self, sys: CoupledSystem, gk: GreenKernel, L: float, ts) -> float:
        if gk.envelope is None:
            return math.nan
        return max(gk.envelope.tail(sys.mu_envelope, L, t=float(t), discrete=sys.discrete) for t in ts)

    def _solver_truncation(self, sys: CoupledSystem, gk: GreenKernel, taus: np.ndarray,
                           numerics: NumericsConfig) -> Tuple[float, float, int]:
        """Radio ``L`` con cola de ``∫|𝒢|μ`` ≤ tol/3; en continuo se ajusta a la malla de cuadratura."""
        extent = float(np.max(np.abs(taus)))
        cap = green_service.truncation_cap(sys, numerics, extent)
        try:
            L, tail = green_service.resolve_truncation(gk, [sys.mu_envelope], numerics.tol / 3.0, taus, cap, numerics)
        except DivergenceError as e:
            raise HypothesisFailure(f"La cola de ∫|𝒢|μ no es integrable: {e}")
        if sys.discrete:
            L = float(max(int(L), 2))
            return L, self._mu_tail(sys, gk, L, taus), 0
        n = interval_count(L, numerics.quad_spacing)
        if n * numerics.quad_spacing > cap + 1e-12:
            n = max(4, 4 * int(cap / (4.0 * numerics.quad_spacing)))
        L = n * numerics.quad_spacing
        return L, self._mu_tail(sys, gk, L, taus), n

    def _live_sides(self, gk: GreenKernel) -> List[bool]:
        sides = []
        if not gk.is_zero:
            sides.append(True)
        if not gk.is_identity:
            sides.append(False)
        return sides

    def _uncoupled_sides(self, sys: CoupledSystem, gk: GreenKernel, taus: np.ndarray, eta: np.ndarray, n: int,
                         numerics: NumericsConfig) -> List[Dict[str, np.ndarray]]:
        """Núcleo, ``T(s,τ)`` y trayectorias de ``y`` precalculados por nodo τ y desplazamiento."""
        u = numerics.quad_spacing * np.arange(n + 1)
        tau_col = taus[:, None]
        etas = np.broadcast_to(eta[None, :, :], (len(taus),) + eta.shape)
        sides = []
        for forward in self._live_sides(gk):
            direction = -1 if forward else 1
            s = tau_col + direction * u[None, :]
            tt = np.broadcast_to(tau_col, s.shape)
            traj = flow_service.drift_trajectories(sys, tau_col, etas, n * numerics.quad_stride,
                                                   numerics.quad_stride, direction, numerics)
            sides.append({
                "s": s,
                "G": gk.branch(tt, s, forward),
                "X1": gk.family.evolve_many(s, tt),
                "Y": np.moveaxis(traj, 0, 1),
            })
        return sides

    def _discrete_orbit_window(self, sys_d: CoupledSystem, n: int, x0: np.ndarray, y0: np.ndarray, L: int,
                               coupled: bool, numerics: NumericsConfig) -> Tuple[np.ndarray, np.ndarray]:
        """Órbita en los índices ``n-L .. n+L-2`` ordenada de menor a mayor."""
        back = flow_service.orbit_path(sys_d, n, x0, y0, -L, coupled, numerics)
        fwd = flow_service.orbit_path(sys_d, n, x0, y0, L - 2, coupled, numerics)
        xs = np.concatenate([back[0][::-1], fwd[0][1:]])
        ys = np.concatenate([back[1][::-1], fwd[1][1:]])
        return xs, ys

    def _discrete_uncoupled_path(self, sys_d: CoupledSystem, gk_d: GreenKernel, n: int, L: int, xi: np.ndarray,
                                 eta: np.ndarray, numerics: NumericsConfig) -> Dict[str, np.ndarray]:
        lo, hi = n - L, n + L - 2
        cols = gk_d.family.column(n, lo, hi)
        x1 = np.einsum("jkl,al->jak", cols, xi)[:, :, None, :]
        _, ys = self._discrete_orbit_window(sys_d, n, np.zeros((eta.shape[0], sys_d.dim_x)), eta, L,
                                            coupled=False, numerics=numerics)
        return {
            "j": np.arange(lo, hi + 1, dtype=float),
            "X1": x1,
            "Y": ys[:, None, :, :],
            "G": gk_d.row(n, n - L + 1, n + L - 1),
        }

    def _make_table(self, kind: str, sys: CoupledSystem, grid: GridSpec, taus: np.ndarray,
                    values: np.ndarray) -> FunctionTable:
        policy = "clamp"
        if sys.period is not None and taus[-1] - taus[0] >= sys.period - 1e-9:
            policy = "wrap"
        elif sys.period is not None:
            logger.warning(f"La tabla no cubre el período {sys.period}; los tiempos exteriores se recortan")
        return FunctionTable(
            kind=kind, grid=grid, dim_x=sys.dim_x, dim_y=sys.dim_y, discrete=sys.discrete,
            tau_axis=np.asarray(taus, dtype=float), values=values, tau_policy=policy, period=sys.period,
        )

    def _solver_info(self, table: FunctionTable, report: HypothesisReport, q: float, deltas: List[float], L: float,
                     tail: float, quad_error: float, fixed_point: bool) -> SolverInfo:
        """Presupuesto a posteriori ``(interpolación + residuo + cuadratura + cola)/(1-q)``."""
        interp = table.interpolation_bound()
        residual = deltas[-1] if deltas else 0.0
        tail_term = 0.0 if math.isnan(tail) else tail
        budget = interp + residual + quad_error + tail_term
        if fixed_point:
            budget /= 1.0 - q
        return SolverInfo(
            iterations=len(deltas),
            residual_history=deltas,
            final_delta=residual,
            q_value=q,
            N_value=float(report.N_certified),
            truncation=L,
            tail_bound=tail,
            quadrature_error=quad_error,
            interpolation_bound=interp,
            error_budget=budget,
        )

    def _sample_nodes(self, table: FunctionTable, samples: int, rng: np.random.Generator):
        lo, hi = float(table.tau_axis[0]), float(table.tau_axis[-1])
        if table.discrete:
            t = rng.integers(int(lo), int(hi) + 1, size=samples).astype(float)
        else:
            t = rng.uniform(lo, hi, size=samples)
        x = rng.uniform(-table.grid.box_x, table.grid.box_x, size=(samples, table.dim_x))
        y = rng.uniform(-table.grid.box_y, table.grid.box_y, size=(samples, table.dim_y))
        return t, x, y

    def _advance(self, sys: CoupledSystem, t: np.ndarray, x: np.ndarray, y: np.ndarray, horizon: float, steps: int,
                 coupled: bool, numerics: NumericsConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Avanza un lote de estados; devuelve ``(x, y, error estimado por paso doble)``."""
        if sys.discrete:
            xs, ys = x.copy(), y.copy()
            for k in range(len(t)):
                path = flow_service.orbit_path(sys, int(t[k]), x[k], y[k], steps, coupled, numerics)
                xs[k], ys[k] = path[0][-1], path[1][-1]
            return xs, ys, np.zeros(len(t))
        flow_service.evolution_family(sys, numerics).check_window(np.concatenate([t, t + horizon]))
        state = np.concatenate([x, y], axis=-1)
        field = sys.vector_field(coupled)
        fine = integrate(field, t, state, horizon, numerics.h_ode)
        coarse = integrate(field, t, state, horizon, 2.0 * numerics.h_ode)
        error = np.linalg.norm(fine - coarse, axis=-1) / 15.0
        return fine[..., : sys.dim_x], fine[..., sys.dim_x:], error


conjugacy_service = ConjugacyService()
