"""
Módulo de cuadratura compuesta de Simpson.

Los nodos se toman equiespaciados con ``spacing`` y el número de intervalos
es siempre múltiplo de 4, de modo que la regla con paso doble también es una
regla de Simpson válida y sirve como estimador de Richardson.
"""
import math

import numpy as np


def interval_count(radius: float, spacing: float) -> int:
    """Menor número de intervalos múltiplo de 4 que cubre ``radius``."""
    if radius <= 0:
        return 4
    return 4 * int(math.ceil(radius / (4.0 * spacing) - 1e-12))


def simpson_weights(n_intervals: int, spacing: float) -> np.ndarray:
    """
    Pesos de Simpson compuesto para ``n_intervals + 1`` nodos.

    :param n_intervals: Número par de intervalos.
    :type n_intervals: int
    :param spacing: Separación entre nodos.
    :type spacing: float
    :return: Pesos de longitud ``n_intervals + 1``.
    :rtype: numpy.ndarray
    :raises ValueError: Si ``n_intervals`` es impar o no positivo.
    """
    if n_intervals <= 0 or n_intervals % 2:
        raise ValueError(f"Simpson requiere un número par de intervalos, se recibió {n_intervals}")
    w = np.ones(n_intervals + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * spacing / 3.0


def coarse_weights(n_intervals: int, spacing: float) -> np.ndarray:
    """Pesos de Simpson con paso doble, expandidos a la malla fina (ceros en nodos impares)."""
    w = np.zeros(n_intervals + 1)
    w[::2] = simpson_weights(n_intervals // 2, 2.0 * spacing)
    return w


def richardson_error(integrand: np.ndarray, n_intervals: int, spacing: float, axis: int = 0) -> np.ndarray:
    """
    Estimación del error de Simpson comparando con el paso doble: ``|S_h - S_2h| / 15``.

    :param integrand: Valores del integrando en los nodos finos a lo largo de ``axis``.
    :return: Estimación del error, con ``axis`` reducido.
    :rtype: numpy.ndarray
    """
    fine = np.tensordot(simpson_weights(n_intervals, spacing), np.moveaxis(integrand, axis, 0), axes=(0, 0))
    coarse = np.tensordot(coarse_weights(n_intervals, spacing), np.moveaxis(integrand, axis, 0), axes=(0, 0))
    return np.abs(fine - coarse) / 15.0
