"""Exception hierarchy shared across the package.

Two families: configuration/usage errors (bad inputs, bad files) and
numerical errors (integration failures, bracketing failures, ambiguous
fits). The CLI maps the first family to exit code 2 and the second to
exit code 3.
"""


class EmcombError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EmcombError):
    """Invalid configuration, preset, or command-line input."""


class InvalidStateError(EmcombError):
    """A dynamical state contains non-finite components."""


class NumericalError(EmcombError):
    """Base class for numerical failures (CLI exit code 3)."""


class IntegrationFailureError(NumericalError):
    """Adaptive step size collapsed (stiffness / underflow).

    Carries the last good time and state so callers can diagnose.
    """

    def __init__(self, message, t_last=None, state_last=None):
        super().__init__(message)
        self.t_last = t_last
        self.state_last = state_last


class DivergenceError(NumericalError):
    """Trajectory left the finite domain (NaN/Inf encountered)."""

    def __init__(self, message, t_last=None, state_last=None):
        super().__init__(message)
        self.t_last = t_last
        self.state_last = state_last


class RootFindingError(NumericalError):
    """Fixed-point root polishing failed after bracketing."""


class NotAFixedPointError(NumericalError):
    """Linearization requested about a state that is not stationary."""


class BracketingError(NumericalError):
    """A bisection bracket does not straddle a sign change."""


class IllConditionedFitError(NumericalError):
    """Transient envelope is not a clean exponential within tolerance."""


class InsufficientDataError(NumericalError):
    """Time series too short for the requested spectral estimate."""


class ResamplingError(NumericalError):
    """Trajectory lacks the uniform tail needed for spectral analysis."""


class AmbiguousLatticeError(NumericalError):
    """Two integer-lattice assignments fit a tooth within tolerance.

    Raised when the two mode frequencies are close enough to rationally
    commensurate (over the search box) that tooth assignment would be
    a silent guess.
    """


class TruncationError(NumericalError):
    """Bessel-series truncation cannot reach the requested accuracy."""

    def __init__(self, message, required_order=None):
        super().__init__(message)
        self.required_order = required_order


class IndeterminateOutcomeError(NumericalError):
    """Mode-competition outcome requested for an undecided attractor."""
