"""Exception classes shared across the package."""


class SwmError(Exception):
    """Base class for all errors raised by swmnet."""


class SizeError(SwmError, ValueError):
    """A size that must be a power of two (or otherwise constrained) is not."""


class DimensionError(SwmError, ValueError):
    """Operand shapes do not agree."""


class NumericalError(SwmError, ArithmeticError):
    """A numerical health check failed (e.g. non-finite values, IFFT residue)."""


class ParseError(SwmError, ValueError):
    """An input file or argument could not be parsed."""


class ModelFormatError(ParseError):
    """A model file could not be parsed or is internally inconsistent."""


class ModelVersionError(ModelFormatError):
    """A model file declares a format version this build does not read."""
