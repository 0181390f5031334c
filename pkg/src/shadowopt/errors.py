"""Exception taxonomy shared by all shadowopt modules."""


class ShadowOptError(Exception):
    """Base class for every error raised by this package."""


# --- landscape ---------------------------------------------------------


class NonSymmetric(ShadowOptError):
    """Matrix expected to be symmetric is not (beyond tolerance)."""


class EmptyDataset(ShadowOptError):
    """Dataset with zero samples where at least one is required."""


class ParseError(ShadowOptError):
    """Malformed dataset file; carries the offending row number."""

    def __init__(self, row, message):
        super().__init__(f"row {row}: {message}")
        self.row = row


class BadLabel(ShadowOptError):
    """Dataset label outside {-1, +1}."""

    def __init__(self, row, label):
        super().__init__(f"row {row}: label {label!r} not in {{-1, +1}}")
        self.row = row
        self.label = label


# --- dynamics ----------------------------------------------------------


class NonFiniteGradient(ShadowOptError):
    """Gradient evaluation produced NaN or infinity."""


class NonFiniteState(ShadowOptError):
    """Integrator state left the finite floating-point range."""


class NoiseBoundViolated(ShadowOptError):
    """Gradient-noise vector larger than the declared bound."""


class BadMomentum(ShadowOptError):
    """Derived momentum 1 - h*alpha falls outside [0, 1)."""


class OrbitTooLong(ShadowOptError):
    """Requested orbit exceeds the in-memory point cap."""


# --- shadowing ---------------------------------------------------------


class NotStronglyConvex(ShadowOptError):
    """Operation needs a strong-convexity constant, none is set."""


class NotContracting(ShadowOptError):
    """Contraction factor >= 1 where a contraction is required."""


class NotExpanding(ShadowOptError):
    """Linear map is not uniformly expanding."""


class SingularMap(ShadowOptError):
    """Linear map is not invertible."""


class NotHyperbolic(ShadowOptError):
    """Spectrum touches the unit circle; no stable/unstable splitting."""


class StepTooLarge(ShadowOptError):
    """Step size violates the bound required by the target radius."""


class PerturbationTooLarge(ShadowOptError):
    """Perturbation smoothness overwhelms the quadratic curvature."""


class NoiseDominates(ShadowOptError):
    """Noise bound too large for the requested tracking radius."""


class BoundaryTooFar(ShadowOptError):
    """Boundary anchors exceed the radius budget of the construction."""


class FixedPointNotConverged(ShadowOptError):
    """Sequence-space fixed-point iteration failed to converge."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = tuple(history) if history is not None else ()


# --- harness -----------------------------------------------------------


class ConfigError(ShadowOptError):
    """Invalid experiment configuration; carries the field name."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class IoError(ShadowOptError):
    """Failed to read or write an experiment artifact."""
