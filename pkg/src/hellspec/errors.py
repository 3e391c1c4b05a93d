"""Exception hierarchy shared by all modules."""


class HellspecError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(HellspecError):
    """Operands have incompatible shapes."""


class NotStable(HellspecError):
    """Matrix has spectral radius at or beyond the stability margin."""


class NoStabilizingSolution(HellspecError):
    """No stabilizing Riccati solution exists for the given data."""


class NotPSD(HellspecError):
    """Matrix expected to be positive semidefinite is not."""


class NotPD(HellspecError):
    """Matrix expected to be positive definite is not."""


class EmptyBasis(HellspecError):
    """A least-squares system was given no columns."""


class SingularResolvent(HellspecError):
    """(zI - A) is singular at an evaluation point."""


class SingularD(HellspecError):
    """Feedthrough matrix too ill-conditioned to invert."""


class NotCoercive(HellspecError):
    """Spectrum is not bounded away from zero on the unit circle."""


class SingularObservabilityGramian(HellspecError):
    """Observability Gramian numerically singular; realization not minimal."""


class NotInDomain(HellspecError):
    """Multiplier leaves the feasible set: I + G* Lambda G loses positivity."""


class DegenerateHessian(HellspecError):
    """Newton system numerically singular; theory guarantees violated."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StepTooSmall(HellspecError):
    """Backtracking shrank the step below the configured floor."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class MaxIterations(HellspecError):
    """Solver hit the iteration cap before reaching the gradient tolerance."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InfeasibleSigma(HellspecError):
    """State covariance lies outside the range of the moment operator."""


class ProjectionNotPD(HellspecError):
    """Projection of the estimated covariance lost positive definiteness."""


class TooFewSamples(HellspecError):
    """Not enough samples left after burn-in."""


class DegenerateSamples(HellspecError):
    """Sample covariance is singular."""


class SingularToeplitz(HellspecError):
    """Autocovariance normal equations are singular."""


class DuplicatePole(HellspecError):
    """Repeated pole breaks reachability of the diagonal filter bank."""


class PoleOutsideDisk(HellspecError):
    """Pole with modulus >= 1 requested for a stable bank."""


class GridMismatch(HellspecError):
    """Frequency grids of two sampled spectra differ."""


class PipelineStageError(HellspecError):
    """Wraps a component error with the estimation stage that raised it."""

    def __init__(self, stage, cause):
        super().__init__(f"estimation stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
