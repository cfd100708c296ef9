"""Exception hierarchy shared by every module."""


class BearingRegError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(BearingRegError, ValueError):
    pass


class ConfigError(InvalidArgumentError):
    """A scenario or report file is missing or malformed."""


class DegenerateGeometryError(BearingRegError):
    """Rays are (nearly) parallel, hit a tangent singularity, or a point sits on a sensor."""


class UnobservableBiasError(BearingRegError):
    """Fisher information is singular; carries the null-space direction when known."""

    def __init__(self, message, null_direction=None):
        super().__init__(message)
        self.null_direction = null_direction


class InsufficientSensorsError(UnobservableBiasError):
    """Fewer than three sensors: biases cannot be separated from target positions."""


class InvalidCovarianceError(BearingRegError):
    pass


class NoDataError(BearingRegError):
    pass


class NumericalFailureError(BearingRegError):
    pass
