"""Exception hierarchy shared by all solver modules."""


class KKTSchurError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(KKTSchurError, ValueError):
    """Operand shapes do not conform."""


class StructuralError(KKTSchurError):
    """A sparsity pattern violates a structural requirement.

    Raised for out-of-range indices, structurally singular matrices, and
    patterns that are not block triangular under the declared structure.
    """

    def __init__(self, message, deficiency=None):
        super().__init__(message)
        self.deficiency = deficiency


class InvalidPivotError(StructuralError):
    """A requested symbolic pivot is structurally zero."""


class SingularBlockError(KKTSchurError, ArithmeticError):
    """A diagonal block could not be factorized."""

    def __init__(self, message, block_index=None):
        super().__init__(message)
        self.block_index = block_index


class BaselineBreakdown(KKTSchurError, ArithmeticError):
    """The generic LDL^T baseline found no acceptable pivot."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ParameterError(KKTSchurError, ValueError):
    """Generator or preset parameters are infeasible."""
