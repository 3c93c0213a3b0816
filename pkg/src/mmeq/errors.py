"""Exception hierarchy shared by all modules."""


class MMEError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(MMEError, ValueError):
    """A state or operator violates its validity invariants."""


class DimensionError(MMEError, ValueError):
    """Operands have incompatible dimensions."""


class CompletenessError(ValidationError):
    """Kraus effects do not resolve the identity."""


class ImpossibleOutcomeError(MMEError, ValueError):
    """A measurement outcome (or outcome sequence) has zero probability."""


class UnsupportedError(MMEError, NotImplementedError):
    """The requested operation is not defined for this input."""


class ConfigurationError(MMEError, ValueError):
    """Invalid run or integrator configuration."""


class NumericalFailure(MMEError, ArithmeticError):
    """Numerical integration produced an invalid state."""
