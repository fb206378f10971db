"""Exception types shared across the package.

The CLI maps these onto its exit codes, so each one stands for a distinct
class of failure rather than a particular call site.
"""


class InputError(ValueError):
    """Arguments violate a precondition (shapes, ranges, indices)."""


class FormatError(ValueError):
    """A data file could not be parsed or is internally inconsistent."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{':'.join(where)}: {message}"
        super().__init__(message)


class StateError(RuntimeError):
    """An operation was called on data that is not ready for it."""


class DegenerateDataError(ArithmeticError):
    """The training data cannot support a well-posed fit."""

    def __init__(self, message, pairs=()):
        self.pairs = tuple(pairs)
        super().__init__(message)


class NumericalError(ArithmeticError):
    """A numerical routine failed (non-convergence, non-finite output)."""


class DivergenceError(NumericalError):
    """The ground-truth integrator produced a non-finite state."""

    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)
