import numpy as np


class IgaSpectraError(Exception):
    """ Base class for every error raised by the library. """


class SplineDomainError(IgaSpectraError, ValueError):
    pass


class RegularityError(IgaSpectraError, ValueError):
    pass


class GeometryError(IgaSpectraError, ValueError):
    pass


class ConfigurationError(IgaSpectraError):
    def __init__(self, message: str, label: str | None = None):
        """
        :param message: str: Human readable description
        :param label: str | None: Configuration label (p, h, k, dt, beta, bc) that failed
        """
        super().__init__(message)
        self.label = label


class InstabilityError(IgaSpectraError):
    def __init__(self, message: str, step: int, t: float, norm: float):
        super().__init__(message)
        self.step = step
        self.t = t
        self.norm = norm


class EigenCapExceeded(IgaSpectraError):
    pass


class EigenConvergenceError(IgaSpectraError):
    def __init__(self, message: str, partial: np.ndarray | None = None):
        super().__init__(message)
        self.partial = np.empty(0, dtype=complex) if partial is None else partial


class FitError(IgaSpectraError, ValueError):
    pass


class ConfigParseError(IgaSpectraError, ValueError):
    pass


class ParameterError(IgaSpectraError, ValueError):
    pass
