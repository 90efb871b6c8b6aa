"""Exception types raised across the package.

Every error that callers are expected to branch on gets a named class;
generic misuse (wrong types, bad flag combinations) raises ValueError.
"""


class SpectralInterveneError(Exception):
    """Base class for all package-specific errors."""


class NonNegativeDiagonalError(SpectralInterveneError):
    """A raw demand-derivative matrix has a diagonal entry >= 0."""


class AsymmetricInputError(SpectralInterveneError):
    """A matrix required to be symmetric violates symmetry beyond tolerance."""


class SingularSystemError(SpectralInterveneError):
    """The equilibrium linear system could not be factorized (invalid state)."""


class DimensionMismatchError(SpectralInterveneError):
    """Vector/matrix dimensions do not agree."""


class ConvergenceFailureError(SpectralInterveneError):
    """The symmetric eigensolver failed to converge."""


class NegativeQuantityError(SpectralInterveneError):
    """Multiplicative quantity noise requires nonnegative quantities."""


class DiagonalSignFlipError(SpectralInterveneError):
    """Sampling noise pushed a diagonal demand derivative to >= 0."""


class InvalidConfigError(SpectralInterveneError):
    """A generator or experiment configuration is inconsistent."""


class FTooLargeError(SpectralInterveneError):
    """The residual coefficient would push ||q0|| above 1."""


class SingularBError(SpectralInterveneError):
    """The hedonic interaction matrix B is singular (cannot occur for alpha < 1)."""


class NoRecoverableStructureError(SpectralInterveneError):
    """No eigenvalue of the observed matrix clears the threshold."""


class DegenerateProjectionError(SpectralInterveneError):
    """A projection the rule divides by is numerically zero."""


class InfeasibleTargetsError(SpectralInterveneError):
    """Requested surplus targets are not achievable for this market state."""


class EmptySampleError(SpectralInterveneError):
    """Summary statistics requested for an empty sample."""


class ConfigError(SpectralInterveneError):
    """Experiment configuration file is malformed or inconsistent."""
