"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures to
a diagnostic category without inspecting messages.
"""


class FracViscoError(Exception):
    exit_code = 1
    category = "error"


class DomainError(FracViscoError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    category = "domain"


class ShapeError(FracViscoError, ValueError):
    category = "shape"


class PreconditionError(FracViscoError, ValueError):
    category = "precondition"


class ConfigError(FracViscoError):
    exit_code = 2
    category = "config"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class HypothesisError(FracViscoError):
    """A material or data hypothesis (ellipticity, density bounds, boundary
    compatibility) is violated."""

    exit_code = 3
    category = "hypothesis"

    def __init__(self, message, hypothesis=None, witness=None):
        self.hypothesis = hypothesis
        self.witness = witness
        super().__init__(message)


class DataError(HypothesisError):
    category = "data"


class AssemblyError(FracViscoError):
    category = "assembly"


class IterationError(FracViscoError):
    exit_code = 4
    category = "iteration"

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class DivergenceError(FracViscoError):
    exit_code = 4
    category = "divergence"
