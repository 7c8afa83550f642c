"""Exception types shared across the engine."""


class GlidepathError(Exception):
    """Base class for all engine errors."""


class ConfigError(GlidepathError):
    """Malformed or unsupported configuration input."""


# -- market data ------------------------------------------------------------

class NotPositiveDefinite(GlidepathError):
    """Covariance matrix is not symmetric positive definite."""


class NoExcessReturn(GlidepathError):
    """No risky asset offers a drift above the risk-free rate."""


class DimensionMismatch(GlidepathError):
    """Vector/matrix shapes are inconsistent."""


class TimeOutOfRange(GlidepathError):
    """Requested time lies outside [0, horizon]."""


# -- quadratic program ------------------------------------------------------

class InfeasibleAlpha(GlidepathError):
    """Risky budget bound is negative."""


# -- PDE solvers ------------------------------------------------------------

class InvariantViolated(GlidepathError):
    """A solution left its theoretically guaranteed range."""


class NonConvergence(GlidepathError):
    """Nonlinear iteration failed to converge."""


class CFLViolation(GlidepathError):
    """Explicit time step exceeds the advective stability limit."""


class CharacteristicExitsDomain(GlidepathError):
    """A transport characteristic left the spatial grid before the horizon."""


class IncompatibleGrid(GlidepathError):
    """Surfaces or solvers were combined across mismatched grids."""


class InsufficientPoints(GlidepathError):
    """Too few samples for the requested regression."""


class OutOfDomain(GlidepathError):
    """Query point lies more than one cell outside the solved grid."""


# -- Samuelson bridge -------------------------------------------------------

class WealthBelowPV(GlidepathError):
    """Lifetime wealth does not cover the present value of contributions."""


class NegativeBankAfterInverse(GlidepathError):
    """Inverse transform produced a negative bank holding (inadmissible state)."""


# -- welfare ----------------------------------------------------------------

class DiffusionDegenerate(GlidepathError):
    """Strategy has vanishing risky exposure on part (but not all) of the grid."""


class SignMismatch(GlidepathError):
    """Expected utility is outside the range of the CRRA utility."""


class BracketFailure(GlidepathError):
    """IRR root not bracketed even after widening."""


class NegativeWealth(GlidepathError):
    """Simulated wealth went non-positive (time step too coarse)."""


# -- sweep ------------------------------------------------------------------

class AllCellsFailed(GlidepathError):
    """No sweep cell produced a usable welfare row."""
