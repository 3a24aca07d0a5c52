"""Exception hierarchy shared by every tomokin module."""


class TomokinError(Exception):
    """Base class for all library errors."""


class ArgumentError(TomokinError, ValueError):
    """Invalid argument: bad axis index, malformed grid, degenerate frame."""


class NumericError(TomokinError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class PreconditionError(TomokinError):
    """An input violates a documented precondition (e.g. box too narrow)."""

    def __init__(self, message, measured=None):
        super().__init__(message)
        self.measured = measured


class AccuracyError(TomokinError):
    """A transform cannot reach its accuracy contract on the given grids."""

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = list(offending) if offending is not None else []


class InversionQualityError(TomokinError):
    """Inverse Radon output has imaginary or negative residue beyond threshold."""

    def __init__(self, message, imag_residue=None, min_value=None, tail=None):
        super().__init__(message)
        self.imag_residue = imag_residue
        self.min_value = min_value
        self.tail = tail


class InconsistencyError(TomokinError):
    """A reduction result depends on variables it must not depend on."""

    def __init__(self, message, spread=None):
        super().__init__(message)
        self.spread = spread


class ResolutionError(TomokinError):
    """Grid or time step too coarse for the requested operation."""

    def __init__(self, message, measured=None):
        super().__init__(message)
        self.measured = measured


class DivergenceError(TomokinError):
    """A characteristic left the configured safety box."""


class BoxSizeError(TomokinError):
    """Boundary-decay terms are too large: the box is too small."""

    def __init__(self, message, measured=None):
        super().__init__(message)
        self.measured = measured


class CapabilityError(TomokinError):
    """The requested route does not support this potential."""


class CoverageError(TomokinError):
    """Characteristic preimages leave the lattice hull."""

    def __init__(self, message, fraction_lost=None):
        super().__init__(message)
        self.fraction_lost = fraction_lost


class InstabilityError(TomokinError):
    """Time integration blew up or drifted beyond the allowed bound."""

    def __init__(self, message, step=None, drift=None):
        super().__init__(message)
        self.step = step
        self.drift = drift
