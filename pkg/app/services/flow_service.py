"""
Módulo de servicio de flujos.

Integra los sistemas desacoplado y acoplado, construye la familia de evolución
``T(t,s)`` y el cociclo discreto ``𝒜(m,n)``.
"""
import logging
import math
import threading
from typing import Dict, Optional, Tuple

import numpy as np

from app.core.exceptions import ConvergenceError, InvertibilityError, WindowError
from app.models.system_model import CoupledSystem
from app.schemas.run_config import NumericsConfig
from app.utils.rk4 import integrate, linear_propagators, trajectory

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
"""Número de condición a partir del cual ``A_n`` se considera singular."""


class EvolutionFamily:
    """
    Familia de evolución ``T(t,s)`` de ``x' = A(t)x``.

    La matriz fundamental ``Φ(t) = T(t,0)`` se precalcula con RK4 de paso fijo
    en la malla ``h_ode·ℤ ∩ [-T_max, T_max]``; como un paso RK4 es lineal en el
    estado, ``Φ(t)Φ(s)^{-1}`` coincide con la integración RK4 de ``s`` a ``t``
    entre nodos de la malla. Los tiempos fuera de la malla se alcanzan con un
    paso parcial desde el nodo anterior.

    :ivar dim: Dimensión de X.
    :ivar h_ode: Paso.
    :ivar t_max: Semiancho de la ventana.
    """

    def __init__(self, linear_part, dim: int, h_ode: float, t_max: float):
        self.linear_part = linear_part
        self.dim = dim
        self.h_ode = h_ode
        self.t_max = t_max
        self._lock = threading.Lock()
        self._grid: Optional[np.ndarray] = None
        self._phi: Optional[np.ndarray] = None

    def _ensure_cache(self) -> None:
        with self._lock:
            if self._phi is not None:
                return
            h = self.h_ode
            n_half = int(math.ceil(self.t_max / h - 1e-9))
            grid = h * np.arange(-n_half, n_half + 1)
            phi = np.empty((2 * n_half + 1, self.dim, self.dim))
            phi[n_half] = np.eye(self.dim)
            starts = grid[n_half:-1]
            forward = linear_propagators(
                self.linear_part(starts), self.linear_part(starts + h / 2), self.linear_part(starts + h), h
            )
            for k in range(n_half):
                phi[n_half + k + 1] = forward[k] @ phi[n_half + k]
            starts = grid[n_half:0:-1]
            backward = linear_propagators(
                self.linear_part(starts), self.linear_part(starts - h / 2), self.linear_part(starts - h), -h
            )
            for k in range(n_half):
                phi[n_half - k - 1] = backward[k] @ phi[n_half - k]
            self._grid = grid
            self._phi = phi
            logger.info(f"Matriz fundamental precalculada en {grid.size} nodos (h={h}, T_max={self.t_max})")

    def check_window(self, t) -> None:
        if np.any(np.abs(np.asarray(t, dtype=float)) > self.t_max * (1 + 1e-12)):
            raise WindowError(f"Tiempo fuera de la ventana [-{self.t_max}, {self.t_max}]")

    def fundamental(self, t) -> np.ndarray:
        """``Φ(t) = T(t, 0)`` para un arreglo de tiempos; devuelve ``(..., d, d)``."""
        self.check_window(t)
        self._ensure_cache()
        t = np.asarray(t, dtype=float)
        grid, h = self._grid, self.h_ode
        k = np.clip(np.floor((t - grid[0]) / h + 1e-9).astype(int), 0, grid.size - 2)
        delta = t - grid[k]
        base = grid[k]
        step = linear_propagators(
            self.linear_part(base), self.linear_part(base + delta / 2), self.linear_part(base + delta), delta
        )
        return step @ self._phi[k]

    def evolve_many(self, t, s) -> np.ndarray:
        """``T(t,s)`` por lotes con difusión de ``t`` y ``s``; exacto en la diagonal ``t = s``."""
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        phi_t = self.fundamental(t)
        phi_s = self.fundamental(s)
        out = np.linalg.solve(np.swapaxes(phi_s, -1, -2), np.swapaxes(phi_t, -1, -2))
        out = np.swapaxes(out, -1, -2)
        same = t == s
        if np.any(same):
            out[same] = np.eye(self.dim)
        return out


class Cocycle:
    """
    Cociclo discreto ``𝒜(m,n)``: ``A_{m-1}···A_n`` si ``m > n``, ``I`` si ``m = n`` y
    ``A_m^{-1}···A_{n-1}^{-1}`` si ``m < n``. Los productos se memorizan.
    """

    def __init__(self, linear_part, dim: int, window: int):
        self.linear_part = linear_part
        self.dim = dim
        self.window = window
        self._lock = threading.Lock()
        self._products: Dict[Tuple[int, int], np.ndarray] = {}
        self._inverses: Dict[int, np.ndarray] = {}

    def check_window(self, *indices: int) -> None:
        for i in indices:
            if abs(int(i)) > self.window:
                raise WindowError(f"Índice {i} fuera de la ventana [-{self.window}, {self.window}]")

    def operator(self, k: int) -> np.ndarray:
        return np.asarray(self.linear_part(np.asarray(float(k))), dtype=float)

    def inverse(self, k: int) -> np.ndarray:
        with self._lock:
            cached = self._inverses.get(k)
        if cached is not None:
            return cached
        a = self.operator(k)
        cond = np.linalg.cond(a)
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise InvertibilityError(f"A_{k} es singular o está mal condicionada")
        inv = np.linalg.inv(a)
        with self._lock:
            self._inverses[k] = inv
        return inv

    def evaluate(self, m: int, n: int) -> np.ndarray:
        m, n = int(m), int(n)
        self.check_window(m, n)
        if m == n:
            return np.eye(self.dim)
        key = (m, n)
        with self._lock:
            cached = self._products.get(key)
        if cached is not None:
            return cached
        prod = np.eye(self.dim)
        if m > n:
            for k in range(n, m):
                self.inverse(k)
                prod = self.operator(k) @ prod
        else:
            for k in range(m, n):
                prod = prod @ self.inverse(k)
        with self._lock:
            self._products[key] = prod
        return prod

    def column(self, n: int, lo: int, hi: int) -> np.ndarray:
        """``𝒜(j, n)`` para ``j = lo..hi`` de forma incremental; devuelve ``(hi-lo+1, d, d)``."""
        self.check_window(n, lo, hi)
        out = np.empty((hi - lo + 1, self.dim, self.dim))
        current = np.eye(self.dim)
        if lo <= n <= hi:
            out[n - lo] = current
        for j in range(n, hi):
            current = self.operator(j) @ current
            if j + 1 >= lo:
                out[j + 1 - lo] = current
        current = np.eye(self.dim)
        for j in range(n, lo, -1):
            current = self.inverse(j - 1) @ current
            if j - 1 <= hi:
                out[j - 1 - lo] = current
        if n < lo or n > hi:
            return np.stack([self.evaluate(j, n) for j in range(lo, hi + 1)])
        return out

    def row(self, m: int, lo: int, hi: int) -> np.ndarray:
        """``𝒜(m, k)`` para ``k = lo..hi`` de forma incremental; devuelve ``(hi-lo+1, d, d)``."""
        self.check_window(m, lo, hi)
        if m < lo or m > hi:
            return np.stack([self.evaluate(m, k) for k in range(lo, hi + 1)])
        out = np.empty((hi - lo + 1, self.dim, self.dim))
        current = np.eye(self.dim)
        out[m - lo] = current
        for k in range(m, lo, -1):
            current = current @ self.operator(k - 1)
            out[k - 1 - lo] = current
        current = np.eye(self.dim)
        for k in range(m, hi):
            current = current @ self.inverse(k)
            out[k + 1 - lo] = current
        return out


class FlowService:
    """Servicio de integración de trayectorias y órbitas."""

    def __init__(self):
        self._lock = threading.Lock()
        self._families: Dict[Tuple[int, float, float], Tuple[CoupledSystem, object]] = {}

    def evolution_family(self, sys: CoupledSystem, numerics: Optional[NumericsConfig] = None) -> EvolutionFamily:
        """Familia de evolución (o cociclo en tiempo discreto) compartida por sistema y numérica."""
        numerics = numerics or NumericsConfig()
        key = (id(sys), numerics.h_ode, numerics.t_max)
        with self._lock:
            cached = self._families.get(key)
            if cached is None or cached[0] is not sys:
                if sys.discrete:
                    family = Cocycle(sys.linear_part, sys.dim_x, int(numerics.t_max))
                else:
                    family = EvolutionFamily(sys.linear_part, sys.dim_x, numerics.h_ode, numerics.t_max)
                cached = (sys, family)
                self._families[key] = cached
        return cached[1]

    def evolve_linear(self, ef: EvolutionFamily, t: float, s: float) -> np.ndarray:
        """
        Evalúa ``T(t,s)``.

        :raises WindowError: Si ``t`` o ``s`` salen de la ventana.
        """
        if t == s:
            ef.check_window(t)
            return np.eye(ef.dim)
        return ef.evolve_many(t, s)

    def cocycle_eval(self, c: Cocycle, m: int, n: int) -> np.ndarray:
        return c.evaluate(m, n)

    def solve_uncoupled(self, sys: CoupledSystem, tau: float, xi, eta, t: float,
                        numerics: Optional[NumericsConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Solución ``(x1(t,τ,ξ), y(t,τ,η))`` del sistema desacoplado.

        :return: ``(x1, y)``.
        :rtype: Tuple[numpy.ndarray, numpy.ndarray]
        """
        numerics = numerics or NumericsConfig()
        xi = np.asarray(xi, dtype=float).reshape(-1)
        eta = np.asarray(eta, dtype=float).reshape(-1)
        ef = self.evolution_family(sys, numerics)
        if t == tau:
            ef.check_window(t)
            return xi.copy(), eta.copy()
        x1 = self.evolve_linear(ef, t, tau) @ xi
        y = integrate(sys.drift_field(), tau, eta, t - tau, numerics.h_ode) if sys.dim_y else eta.copy()
        return x1, y

    def solve_coupled(self, sys: CoupledSystem, tau: float, xi, eta, t: float,
                      numerics: Optional[NumericsConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Solución ``(x2(t,τ,ξ,η), y(t,τ,η))`` del sistema acoplado por RK4."""
        numerics = numerics or NumericsConfig()
        xi = np.asarray(xi, dtype=float).reshape(-1)
        eta = np.asarray(eta, dtype=float).reshape(-1)
        self.evolution_family(sys, numerics).check_window([tau, t])
        if t == tau:
            return xi.copy(), eta.copy()
        state = integrate(sys.vector_field(coupled=True), tau, np.concatenate([xi, eta]), t - tau, numerics.h_ode)
        return state[: sys.dim_x], state[sys.dim_x:]

    def state_trajectories(self, sys: CoupledSystem, taus: np.ndarray, states: np.ndarray, n_steps: int,
                           stride: int, direction: int, numerics: NumericsConfig, coupled: bool) -> np.ndarray:
        """
        Trayectorias por lotes registradas en desplazamientos ``u = ±k·stride·h_ode``.

        :param taus: Tiempos iniciales con la forma de lote de ``states[..., 0]``.
        :param states: Estados ``(..., dim_x + dim_y)``.
        :return: ``(n_steps // stride + 1, ..., dim_x + dim_y)``.
        """
        self.evolution_family(sys, numerics).check_window(
            [np.min(taus) - (direction < 0) * n_steps * numerics.h_ode,
             np.max(taus) + (direction > 0) * n_steps * numerics.h_ode]
        )
        return trajectory(sys.vector_field(coupled), taus, states, direction * numerics.h_ode, n_steps, stride)

    def drift_trajectories(self, sys: CoupledSystem, taus: np.ndarray, etas: np.ndarray, n_steps: int,
                           stride: int, direction: int, numerics: NumericsConfig) -> np.ndarray:
        """Trayectorias de ``y' = g(t,y)`` por lotes; mismas convenciones que :meth:`state_trajectories`."""
        if sys.dim_y == 0:
            return np.broadcast_to(etas, (n_steps // stride + 1,) + etas.shape).copy()
        return trajectory(sys.drift_field(), taus, etas, direction * numerics.h_ode, n_steps, stride)

    def orbit(self, sys_d: CoupledSystem, n: int, state: Tuple[np.ndarray, np.ndarray], m: int,
              coupled: bool, numerics: Optional[NumericsConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Valor en el índice ``m`` de la órbita que pasa por ``state`` en ``n``.

        Hacia atrás, ``y_k = g_k^{-1}(y_{k+1})`` y, si ``coupled``, ``x_k`` se obtiene
        por Picard amortiguado sobre ``x ↦ A_k^{-1}(x_{k+1} - f_k(x, y_k))``.

        :raises ConvergenceError: Si el paso implícito no contrae.
        """
        path = self.orbit_path(sys_d, n, state[0], state[1], m - n, coupled, numerics)
        return path[0][-1], path[1][-1]

    def orbit_path(self, sys_d: CoupledSystem, n: int, x, y, steps: int, coupled: bool,
                   numerics: Optional[NumericsConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Órbita por lotes desde el índice ``n`` durante ``steps`` pasos (con signo).

        :return: ``(xs, ys)`` con formas ``(|steps|+1, ..., dim_x)`` y ``(|steps|+1, ..., dim_y)``.
        """
        numerics = numerics or NumericsConfig()
        cocycle = self.evolution_family(sys_d, numerics)
        cocycle.check_window(n, n + steps)
        x = np.array(x, dtype=float, copy=True)
        y = np.array(y, dtype=float, copy=True)
        xs, ys = [x.copy()], [y.copy()]
        direction = 1 if steps >= 0 else -1
        with np.errstate(over="ignore", invalid="ignore"):
            for j in range(abs(steps)):
                if direction > 0:
                    k = n + j
                    kk = np.full(x.shape[:-1], float(k))
                    x_new = np.einsum("ij,...j->...i", cocycle.operator(k), x)
                    if coupled:
                        x_new = x_new + sys_d.nonlinearity(kk, x, y)
                    y = sys_d.drift(kk, y)
                    x = x_new
                else:
                    k = n - j - 1
                    kk = np.full(x.shape[:-1], float(k))
                    if sys_d.drift_inverse is None:
                        raise ConvergenceError(f"El sistema '{sys_d.name}' no define la inversa de g_n")
                    y = sys_d.drift_inverse(kk, y)
                    inv = cocycle.inverse(k)
                    target = x
                    x = np.einsum("ij,...j->...i", inv, target)
                    if coupled:
                        x = self._implicit_step(sys_d, kk, inv, target, x, y, numerics)
                xs.append(x.copy())
                ys.append(y.copy())
        return np.stack(xs), np.stack(ys)

    def _implicit_step(self, sys_d, kk, inv, target, x, y, numerics: NumericsConfig) -> np.ndarray:
        theta = numerics.picard_damping
        history = []
        for _ in range(numerics.picard_max_iter):
            update = np.einsum("ij,...j->...i", inv, target - sys_d.nonlinearity(kk, x, y))
            x_next = (1.0 - theta) * x + theta * update
            change = np.abs(x_next - x)
            finite = np.isfinite(x_next)
            scale = np.where(finite, np.maximum(1.0, np.abs(x_next)), 1.0)
            delta = float(np.max(np.where(finite, change / scale, 0.0), initial=0.0))
            history.append(delta)
            x = x_next
            if delta <= numerics.picard_tol:
                return x
        raise ConvergenceError(
            f"El paso implícito hacia atrás no convergió en {numerics.picard_max_iter} iteraciones",
            residual_history=history,
        )


flow_service = FlowService()
