"""Exception types shared across the package."""


class MorkitError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(MorkitError, ValueError):
    """Operands have incompatible or invalid dimensions."""


class StructuralError(MorkitError, ValueError):
    """A system block, manifest, or interpolation set violates a structural rule.

    The message names the offending block/field.
    """


class SingularMatrixError(MorkitError):
    """A matrix required to be nonsingular is (numerically) singular.

    Parameters
    ----------
    message : str
    column : int, optional
        Index of the first column on which the factorization broke down,
        when the factorization got far enough to identify one.
    """

    def __init__(self, message, column=None):
        if column is not None:
            message = f"{message} (column {column})"
        super().__init__(message)
        self.column = column


class Index1ViolationError(SingularMatrixError):
    """The algebraic block K22 is singular, so the system is not index 1."""


class ShiftCollisionError(MorkitError):
    """An interpolation shift hit an eigenvalue of the augmented pencil.

    The shifted augmented matrix is singular at this sigma; the basis
    builder perturbs the shift and retries once before giving up.
    """

    def __init__(self, sigma, message=None):
        if message is None:
            message = f"shifted augmented matrix is singular at sigma = {sigma}"
        super().__init__(message)
        self.sigma = sigma


class PencilSingularError(MorkitError):
    """The reduced pencil (A-hat, E-hat) has a singular E-hat / infinite eigenvalues."""


class ConvergenceWarning(UserWarning):
    """Iteration hit its cap without meeting the tolerance."""


class RankDeficiencyWarning(UserWarning):
    """Orthonormalization dropped columns; the effective reduced order shrank."""
