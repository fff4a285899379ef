"""
Exceptions raised by the skdv library
Every module raises one of these so the harness can tell bad input from a failed path
"""

from typing import Any, Optional


class SkdvError(Exception):
    """Base class for all skdv errors"""


class InvalidArgumentError(SkdvError, ValueError):
    """An argument is outside its documented domain (also used for grid mismatches)"""


class PreconditionError(SkdvError, ValueError):
    """A documented precondition on the input data does not hold"""


class InternalError(SkdvError, RuntimeError):
    """A numerical invariant the library relies on was broken"""


class AccuracyError(SkdvError, ArithmeticError):
    """A quadrature did not reach the requested accuracy"""


class BlowUpError(SkdvError, ArithmeticError):
    """A path produced non-finite values or exceeded the H^1 blow-up threshold"""

    def __init__(self, message: str, last_state: Optional[Any] = None, step_index: int = 0):
        super().__init__(message)
        self.last_state = last_state
        self.step_index = step_index


class OutputError(SkdvError, OSError):
    """Run outputs could not be written"""
