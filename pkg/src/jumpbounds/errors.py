"""Exception types shared across the package."""


class JumpBoundsError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(JumpBoundsError):
    """Operator or vector dimensions are inconsistent."""


class NonErgodicModelError(JumpBoundsError):
    """The Liouvillian has a degenerate stationary subspace (no unique steady state)."""


class SingularStateError(JumpBoundsError):
    """A density matrix is singular where a strictly positive one is required."""


class ModelValidationError(JumpBoundsError):
    """A model violates a structural invariant at construction time."""


class ImprintingError(JumpBoundsError):
    """The requested parameter imprinting is not defined for this model."""


class DivergingRateError(JumpBoundsError):
    """A trajectory exceeded the jump-count safety cap."""


class MonitoringUnderflowError(JumpBoundsError):
    """A conditional-evolution step had vanishing probability."""


class RelativeFluctuationUndefined(JumpBoundsError):
    """An observable mean is consistent with zero, so Var/mean^2 is ill-defined."""


class CorrectionUndefinedError(JumpBoundsError):
    """A bound correction term is undefined (zero mean observable)."""


class ConfigError(JumpBoundsError):
    """A run configuration failed validation."""
