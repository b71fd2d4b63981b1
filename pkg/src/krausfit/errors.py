"""Exception types raised by validation and decision routines."""


class KrausfitError(Exception):
    """Base class for all krausfit errors."""


class ShapeError(KrausfitError):
    """Matrix dimensions are inconsistent with the requested operation."""


class NotHermitianError(KrausfitError):
    """Input is not Hermitian within tolerance."""


class NotPSDError(KrausfitError):
    """Input has an eigenvalue below the negative tolerance."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class TraceNotOneError(KrausfitError):
    """Density matrix trace differs from one beyond tolerance."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class LinearlyDependentError(KrausfitError):
    """States assumed linearly independent are numerically dependent."""


class DegenerateDecompositionError(KrausfitError):
    """A decomposition coefficient vanished where independence forbids it."""


class NotTracePreservingError(KrausfitError):
    """Channel fails the trace-preservation identity beyond tolerance."""


class ProblemFormatError(KrausfitError):
    """Problem or channel file failed to parse or validate."""
