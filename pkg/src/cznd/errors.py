"""Exception hierarchy shared by all cznd modules."""


class CzndError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(CzndError, ValueError):
    """Operands have incompatible shapes."""


class SingularMatrix(CzndError, ArithmeticError):
    """LU factorization hit a pivot that is zero to working tolerance."""


class NumericalFailure(CzndError, ArithmeticError):
    """An iterative routine did not converge or a linear solve is unrecoverable."""


class ParseError(CzndError, ValueError):
    """Malformed time expression.

    ``offset`` is the byte offset into the UTF-8 encoded source.  When the
    expression comes from a problem file, ``section``, ``row`` and ``col``
    locate the offending entry (1-based row/col).
    """

    def __init__(self, message, offset, section=None, row=None, col=None):
        self.message = message
        self.offset = offset
        self.section = section
        self.row = row
        self.col = col
        super().__init__(str(self))

    def __str__(self):
        where = f"offset {self.offset}"
        if self.section is not None:
            where = f"[{self.section}] row {self.row} col {self.col}, {where}"
        return f"{where}: {self.message}"


class EvalError(CzndError, ArithmeticError):
    """Division by zero while evaluating a time expression."""


class ProblemFormatError(CzndError, ValueError):
    """A problem file is structurally invalid (missing section, bad header)."""


class ComplexGainUnsupported(CzndError, ValueError):
    """A complex gain was handed to a model whose error lives in the real field."""


class IntegratorError(CzndError):
    """Base class for failures inside the ODE integrator."""


class StepSizeUnderflow(IntegratorError):
    pass


class MaxStepsExceeded(IntegratorError):
    pass


class UsageError(CzndError, ValueError):
    """Invalid experiment request (empty sweep list, unknown model name, ...)."""
