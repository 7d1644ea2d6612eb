"""Exception types shared across the package."""


class PionError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(PionError, ValueError):
    """Operand dimensions are incompatible with the requested operation."""


class DomainError(PionError, ValueError):
    """Input values lie outside the mathematical domain of the operation."""


class NonFiniteError(PionError, FloatingPointError):
    """A public operation produced NaN or infinity."""


class SingularMatrixError(PionError, ValueError):
    """A linear solve hit a pivot too small to continue."""


class ConvergenceError(PionError, RuntimeError):
    """An iterative routine exhausted its iteration budget."""


class DegenerateInputError(PionError, ValueError):
    """The input is degenerate for this operation (e.g. the zero matrix)."""


class ConfigError(PionError, ValueError):
    """An optimizer or run configuration violates its invariants."""


class StateError(PionError, ValueError):
    """Optimizer state does not match the configuration or weight shape."""


class ParseError(ConfigError):
    """A config document could not be parsed; the message names the field."""


class DivergenceError(PionError, RuntimeError):
    """A run diverged; carries the partial record accumulated so far."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
