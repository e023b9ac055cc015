"""Exception types shared across the package."""


class PhasechemError(Exception):
    """Base class for all package errors."""


class OutOfDomain(PhasechemError):
    """Phase values left the open interval (-1, 1) or its safe sub-box."""


class NonZeroMean(PhasechemError):
    """A zero-mean field was required but the cell mean is not negligible."""


class SolverDiverged(PhasechemError):
    """An iterative linear solve failed to reach its residual tolerance."""


class NewtonDiverged(PhasechemError):
    """The Newton iteration for the implicit phase step did not converge."""


class PositivityLost(PhasechemError):
    """A sigma update produced a nonpositive cell value (scheme invariant broken)."""


class ConservationLost(PhasechemError):
    """A step drifted the phase mass beyond roundoff scale (scheme invariant broken)."""


class NegativeSigma(PhasechemError):
    """sigma < 0 passed where a nonnegative concentration is required."""


class NonpositiveSigma(PhasechemError):
    """sigma <= 0 passed where strict positivity is required (log evaluations)."""


class DomainViolation(PhasechemError):
    """Scalar-inequality arguments outside the admissible set."""


class IncompatibleGrids(PhasechemError):
    """Two grids do not stand in the required refinement relation."""


class ConfigError(PhasechemError):
    """A run configuration file is invalid or violates a precondition."""
