"""Exception hierarchy shared by the library and the CLI.

The CLI maps each family onto a stable exit code:

* :class:`InputError` and :class:`ContractError` -> 2
* :class:`ShapeError` and :class:`RankError` -> 3
* :class:`NumericalFailure` and :class:`DegenerateComponentError` -> 4
"""


class GPTCCAError(Exception):
    """Base class for all errors raised by this package."""


class InputError(GPTCCAError):
    """Malformed or inconsistent input data (files, CSVs, parameters)."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ContractError(GPTCCAError, ValueError):
    """A documented precondition of an operation was violated."""


class ShapeError(GPTCCAError, ValueError):
    """Array or tensor dimensions are incompatible."""


class RankError(GPTCCAError, ValueError):
    """Requested rank is not valid for the method and tensor shape."""


class NumericalFailure(GPTCCAError, ArithmeticError):
    """A numerical kernel failed (non-convergence, non-finite data)."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class DegenerateComponentError(NumericalFailure):
    """A CP component has a zero factor column and cannot be normalized."""

    def __init__(self, component, mode):
        super().__init__(
            f"component {component} has a zero column in mode {mode}"
        )
        self.component = component
        self.mode = mode
