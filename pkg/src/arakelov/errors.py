"""Exception hierarchy shared by all modules."""


class ArakelovError(Exception):
    """Base class for errors raised by this package."""


class RootFindingError(ArakelovError):
    """Root finder failed to certify all roots within the iteration budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CapExceeded(ArakelovError):
    """A size cap (degree, rank, enumeration budget) was exceeded."""


class CertificationError(ArakelovError):
    """A numerical bound could not be certified within the budget."""


class MeasureError(ArakelovError, ValueError):
    """Invalid measure data or a test function undefined on an atom."""


class HypothesisFailure(ArakelovError):
    """A precondition of a theorem-backed computation does not hold."""
