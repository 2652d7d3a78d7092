"""
Módulo de excepciones del dominio.

Cada excepción lleva el código de salida que la línea de comandos devuelve
cuando la excepción escapa de un comando.
"""
from typing import List, Optional


class LinearizationError(Exception):
    """Error base de la librería."""
    exit_code: int = 1


class CatalogError(LinearizationError, KeyError):
    """Nombre de catálogo o de ejemplo desconocido."""
    exit_code = 4

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class ParameterValidationError(LinearizationError, ValueError):
    """Parámetro fuera del rango declarado o argumento inválido."""
    exit_code = 4


class ConfigError(LinearizationError, ValueError):
    """Archivo de configuración inválido."""
    exit_code = 4


class WindowError(LinearizationError, ValueError):
    """Tiempo o índice fuera de la ventana configurada."""
    exit_code = 4


class ExtentError(LinearizationError, ValueError):
    """La extensión temporal de una tabla no alcanza para la operación pedida."""
    exit_code = 4


class MissingConstantsError(LinearizationError, ValueError):
    """Faltan constantes de dicotomía o de crecimiento."""
    exit_code = 4


class InvertibilityError(LinearizationError, ArithmeticError):
    """Se encontró un operador A_n singular."""
    exit_code = 3


class DivergenceError(LinearizationError, ArithmeticError):
    """La combinación envolvente-peso no es integrable."""
    exit_code = 2


class HypothesisFailure(LinearizationError):
    """Una hipótesis requerida no se cumple (por ejemplo q ≥ 1)."""
    exit_code = 2


class ConvergenceError(LinearizationError, RuntimeError):
    """
    Un proceso iterativo no convergió.

    :ivar residual_history: Cambios sup-norma registrados por iteración.
    :vartype residual_history: List[float]
    """
    exit_code = 3

    def __init__(self, message: str, residual_history: Optional[List[float]] = None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])
