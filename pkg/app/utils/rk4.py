"""
Módulo de integración Runge-Kutta clásica de paso fijo.

Todas las funciones trabajan por lotes: el estado puede tener cualquier forma
``(..., n)`` y el tiempo puede ser un escalar o un arreglo que difunde contra
``estado[..., 0]``.
"""
from typing import Callable, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]
VectorField = Callable[[np.ndarray, np.ndarray], np.ndarray]


def rk4_step(fun: VectorField, t: ArrayLike, state: np.ndarray, h: ArrayLike) -> np.ndarray:
    """
    Realiza un paso RK4 clásico.

    :param fun: Campo vectorial ``fun(t, state)``.
    :type fun: Callable
    :param t: Tiempo inicial del paso.
    :type t: float | numpy.ndarray
    :param state: Estado al inicio del paso.
    :type state: numpy.ndarray
    :param h: Tamaño de paso (puede ser negativo o un arreglo por lote).
    :type h: float | numpy.ndarray
    :return: Estado al final del paso.
    :rtype: numpy.ndarray
    """
    hh = np.asarray(h, dtype=float)
    hs = hh[..., None] if hh.ndim else hh
    k1 = fun(t, state)
    k2 = fun(t + hh / 2.0, state + hs / 2.0 * k1)
    k3 = fun(t + hh / 2.0, state + hs / 2.0 * k2)
    k4 = fun(t + hh, state + hs * k3)
    return state + hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(fun: VectorField, t0: ArrayLike, state: np.ndarray, duration: float, h: float) -> np.ndarray:
    """
    Integra desde ``t0`` durante ``duration`` (con signo) con paso fijo ``h``.

    El último paso se acorta para caer exactamente en ``t0 + duration``.

    :return: Estado final.
    :rtype: numpy.ndarray
    """
    state = np.array(state, dtype=float, copy=True)
    if duration == 0.0:
        return state
    step = abs(h) if duration > 0 else -abs(h)
    n_full = int(np.floor(abs(duration) / abs(h) + 1e-12))
    t = np.asarray(t0, dtype=float)
    for k in range(n_full):
        state = rk4_step(fun, t + k * step, state, step)
    remainder = duration - n_full * step
    if abs(remainder) > 1e-15:
        state = rk4_step(fun, t + n_full * step, state, remainder)
    return state


def trajectory(fun: VectorField, t0: ArrayLike, state: np.ndarray, h: float,
               n_steps: int, stride: int = 1) -> np.ndarray:
    """
    Integra ``n_steps`` pasos de tamaño ``h`` y registra cada ``stride`` pasos.

    :return: Arreglo ``(n_steps // stride + 1, *state.shape)`` que incluye el estado inicial.
    :rtype: numpy.ndarray
    """
    state = np.array(state, dtype=float, copy=True)
    t = np.asarray(t0, dtype=float)
    records = [state.copy()]
    for k in range(n_steps):
        state = rk4_step(fun, t + k * h, state, h)
        if (k + 1) % stride == 0:
            records.append(state.copy())
    return np.stack(records, axis=0)


def linear_propagators(a_start: np.ndarray, a_mid: np.ndarray, a_end: np.ndarray, h: ArrayLike) -> np.ndarray:
    """
    Matrices de un paso RK4 para ``X' = A(t) X``.

    Como el método es lineal en el estado, un paso equivale a multiplicar por
    ``R = I + h/6 (k1 + 2 k2 + 2 k3 + k4)`` con las etapas evaluadas sobre la
    identidad. Se calcula para pilas de matrices.

    :param a_start: ``A(t_k)`` con forma ``(..., d, d)``.
    :param a_mid: ``A(t_k + h/2)``.
    :param a_end: ``A(t_k + h)``.
    :param h: Paso (escalar o arreglo con la forma de lote).
    :return: Propagadores ``(..., d, d)``.
    :rtype: numpy.ndarray
    """
    hh = np.asarray(h, dtype=float)
    hs = hh[..., None, None] if hh.ndim else hh
    eye = np.broadcast_to(np.eye(a_start.shape[-1]), a_start.shape)
    k1 = a_start
    k2 = a_mid @ (eye + hs / 2.0 * k1)
    k3 = a_mid @ (eye + hs / 2.0 * k2)
    k4 = a_end @ (eye + hs * k3)
    return eye + hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
