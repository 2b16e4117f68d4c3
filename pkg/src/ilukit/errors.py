"""Exception types shared across the package."""


class IlukitError(Exception):
    """Base class for errors raised by this package."""


class MatrixFormatError(IlukitError):
    """Malformed or unsupported matrix/permutation input."""


class ConfigurationError(IlukitError):
    """Invalid option combination or precondition on a pipeline stage."""


class MissingDiagonalError(IlukitError):
    """A row lacks a stored diagonal entry where one is required."""

    def __init__(self, row):
        self.row = row
        super().__init__(f"row {row} has no stored diagonal entry")


class ZeroPivotError(IlukitError):
    """Factorization hit an exactly-zero diagonal (no pivoting available)."""

    def __init__(self, row):
        self.row = row
        super().__init__(f"zero pivot at row {row}")


class BreakdownError(IlukitError):
    """Krylov iteration broke down (e.g. non-positive curvature in CG)."""

    def __init__(self, message, iteration):
        self.iteration = iteration
        super().__init__(f"{message} (iteration {iteration})")
