"""Exception types shared across the package."""


class AfsecError(Exception):
    """Base class for all package-specific errors."""


class NonInvertible(AfsecError):
    """The v -> omega map is undefined because v'v >= 1."""


class InvalidEta(AfsecError):
    """The eavesdropper-SNR cap eta must be strictly positive."""


class InvalidAlpha(AfsecError):
    """The common scaling factor alpha must lie in (0, 1)."""


class InvalidBracket(AfsecError):
    """Line-search bracket must satisfy lo < hi."""


class BadSignPattern(AfsecError):
    """Quartic coefficients do not follow the one-sign-change pattern."""


class Unbounded(AfsecError):
    """The linear objective is unbounded over the constraint set."""


class NoConvergence(AfsecError):
    """An iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class Infeasible(AfsecError):
    """Constraint system has no solution."""


class InvalidConstraintSet(AfsecError):
    """Ellipsoid constraint matrices violate symmetry/PSD requirements."""


class DegradednessViolated(AfsecError):
    """Instance is not degraded: some |h_ie| >= |h_it|."""


class NotScaled(AfsecError):
    """Instance eavesdropper gains are not a common positive multiple of h_t."""


class NotSymmetric(AfsecError):
    """Instance is not a symmetric network."""


class BudgetExceeded(AfsecError):
    """Grid search would exceed the configured evaluation cap."""


class ExperimentError(AfsecError):
    """Monte Carlo harness detected an inconsistency (e.g. bound violation)."""
