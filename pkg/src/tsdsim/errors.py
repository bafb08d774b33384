"""Exception hierarchy shared by all tsdsim modules."""


class TsdError(Exception):
    """Base class for all tsdsim errors."""


class NonFiniteError(TsdError):
    """An input matrix or scalar contains NaN or infinity."""


class AllZeroCrossMatrix(TsdError):
    """Cross-correlation matrix is identically zero."""


class ZeroCross(TsdError):
    """Scalar cross-correlation entry is zero."""


class ZeroBackground(TsdError):
    """Joint detection requested with zero background energy."""


class NotHermitian(TsdError):
    """Matrix failed the Hermitian symmetry check."""


class NotPSD(TsdError):
    """Matrix is not positive semidefinite within tolerance."""


class DimensionMismatch(TsdError):
    """Operands have incompatible dimensions."""


class BadPartition(TsdError):
    """Block partition is inconsistent with the matrix dimension."""


class ZeroTrace(TsdError):
    """Covariance has zero trace; cannot normalize to a density matrix."""


class AllZero(TsdError):
    """Cannot normalize an identically-zero vector."""


class InsufficientClicks(TsdError):
    """Too few clicks were recorded for meaningful statistics."""


class ConfigError(TsdError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """Config file is not well-formed."""


class ValidationError(ConfigError):
    """Config value violates a constraint, or an unknown key was given."""
