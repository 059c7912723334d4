"""Exception and warning types shared across the package."""


class RotNSKError(Exception):
    """Base class for package errors."""


class GridMismatchError(RotNSKError, ValueError):
    """Arrays or fields do not match the expected lattice."""


class SymmetryError(RotNSKError, ValueError):
    """Coefficients do not satisfy Hermitian symmetry."""


class ConfigurationError(RotNSKError, ValueError):
    """A requested configuration cannot be realized on the grid or violates a hypothesis."""


class BlockRangeError(RotNSKError, IndexError):
    """A dyadic block index lies outside the resolved range."""


class ResolutionError(RotNSKError, ValueError):
    """Inputs are not resolved with the margin an exact identity requires."""


class SupportError(RotNSKError, ValueError):
    """A field leaks outside the frequency support an operation requires."""


class InadmissibleDensityError(RotNSKError, FloatingPointError):
    """The density ``1 + eps * a`` fell to or below the configured floor."""


class NonFiniteError(RotNSKError, FloatingPointError):
    """A computation produced NaN or infinite values."""


class ExpmOverflowError(RotNSKError, OverflowError):
    """A matrix exponential overflowed."""


class UnresolvedSupportWarning(UserWarning):
    """Coefficient mass lies outside the resolved dyadic range."""
