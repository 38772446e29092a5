"""
Excepciones y advertencias del paquete de recuperación levantada
"""

from typing import Optional


class LiftedLassoError(Exception):
    """Error base de todos los componentes"""


class ShapeError(LiftedLassoError, ValueError):
    """Dimensiones incompatibles entre operador, matriz y observaciones"""


class ParameterError(LiftedLassoError, ValueError):
    """Parámetro fuera de su rango válido"""


class DomainError(ParameterError):
    """Parámetros fuera del dominio de una cota (p. ej. log 0)"""


class ConfigError(LiftedLassoError, ValueError):
    """Error en la configuración de una corrida"""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class NumericalFailureError(LiftedLassoError, ArithmeticError):
    """El objetivo del solver dejó de ser finito"""

    def __init__(self, iteration: int, value: float):
        self.iteration = iteration
        self.value = value
        super().__init__(f"Objetivo no finito ({value}) en la iteración {iteration}")


class FrameStackFormatError(LiftedLassoError, ValueError):
    """Archivo FSTACK mal formado; incluye línea y columna (base 1)"""

    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"Línea {line}, columna {column}: {message}")


class OperatorNormWarning(RuntimeWarning):
    """La iteración de potencia no convergió; se devuelve la mejor estimación"""
