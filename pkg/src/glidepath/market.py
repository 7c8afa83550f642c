"""Market data, contribution schedules, present values, and the capital ratio.

The market is a set of d lognormal risky assets plus a risk-free bank
account.  Contributions arrive at a deterministic, piecewise-constant rate
over the accumulation horizon.  All rates are per annum, time is in years,
and money is normalized so that the default lifetime contribution is 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NoExcessReturn,
    NotPositiveDefinite,
    TimeOutOfRange,
)

# Scale-free positive-definiteness tolerance: smallest eigenvalue must exceed
# this multiple of the largest.  Strict enough for d <= 10.
PD_EIGENVALUE_RTOL = 1e-12

_TIME_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class MarketParams:
    """Risk-free rate, drift vector and covariance matrix of the risky assets.

    Instances are immutable after construction and safe to share across
    concurrent tasks.  Use :func:`validate_market` (or ``validate=True`` in
    the constructors) to enforce the model assumptions.
    """

    rate_riskfree: float
    drifts: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        drifts = np.atleast_1d(np.asarray(self.drifts, dtype=float)).copy()
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float)).copy()
        drifts.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "rate_riskfree", float(self.rate_riskfree))
        object.__setattr__(self, "drifts", drifts)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def from_volatilities(cls, rate_riskfree, drifts, volatilities, correlation) -> "MarketParams":
        """Assemble the covariance as ``corr[i,j] * vol[i] * vol[j]``."""
        vols = np.atleast_1d(np.asarray(volatilities, dtype=float))
        corr = np.atleast_2d(np.asarray(correlation, dtype=float))
        if corr.shape != (vols.size, vols.size):
            raise DimensionMismatch(
                f"correlation shape {corr.shape} does not match {vols.size} volatilities"
            )
        cov = np.outer(vols, vols) * corr
        return cls(rate_riskfree=rate_riskfree, drifts=drifts, covariance=cov)

    @property
    def dim(self) -> int:
        return self.drifts.size

    @property
    def excess_returns(self) -> np.ndarray:
        return self.drifts - self.rate_riskfree


def validate_market(params: MarketParams) -> MarketParams:
    """Check the market invariants and return the parameters unchanged.

    Raises
    ------
    DimensionMismatch : drift/covariance shapes disagree or d < 1.
    NotPositiveDefinite : covariance not symmetric positive definite.
    NoExcessReturn : no drift strictly exceeds the risk-free rate.
    """
    d = params.dim
    if d < 1:
        raise DimensionMismatch("need at least one risky asset")
    if params.covariance.shape != (d, d):
        raise DimensionMismatch(
            f"covariance shape {params.covariance.shape} does not match {d} drifts"
        )
    cov = params.covariance
    scale = np.abs(cov).max()
    if not np.allclose(cov, cov.T, atol=1e-12 * max(scale, 1.0), rtol=0.0):
        raise NotPositiveDefinite("covariance is not symmetric")
    eigenvalues = np.linalg.eigvalsh(cov)
    if eigenvalues[0] <= PD_EIGENVALUE_RTOL * eigenvalues[-1] or eigenvalues[-1] <= 0.0:
        raise NotPositiveDefinite(
            f"smallest eigenvalue {eigenvalues[0]:.3e} below tolerance "
            f"{PD_EIGENVALUE_RTOL:.0e} * {eigenvalues[-1]:.3e}"
        )
    if not np.any(params.drifts > params.rate_riskfree):
        raise NoExcessReturn("no risky drift strictly exceeds the risk-free rate")
    return params


@dataclass(frozen=True, eq=False)
class ContributionSchedule:
    """Deterministic, non-negative, piecewise-constant contribution rate.

    ``breakpoints`` has n+1 ascending entries from 0 to the horizon and
    ``rates`` holds the n per-segment contribution rates (money per year).
    """

    breakpoints: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        bp = np.atleast_1d(np.asarray(self.breakpoints, dtype=float)).copy()
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float)).copy()
        if bp.size != rates.size + 1:
            raise DimensionMismatch("need exactly one more breakpoint than segment rates")
        if bp[0] != 0.0 or np.any(np.diff(bp) <= 0.0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        if np.any(rates < 0.0):
            raise ValueError("contribution rates must be non-negative")
        if not np.all(np.isfinite(bp)) or not np.all(np.isfinite(rates)):
            raise ValueError("schedule entries must be finite")
        bp.setflags(write=False)
        rates.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def constant(cls, horizon: float = 40.0, total: float = 1.0) -> "ContributionSchedule":
        """Flat rate ``total / horizon`` over [0, horizon]."""
        return cls(breakpoints=np.array([0.0, float(horizon)]), rates=np.array([total / horizon]))

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def total(self) -> float:
        return float(np.dot(self.rates, np.diff(self.breakpoints)))

    def rate(self, t):
        """Contribution rate at time t (right-continuous; rate(T) = last rate)."""
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, t, side="right") - 1, 0, self.rates.size - 1)
        out = self.rates[idx]
        return float(out) if out.ndim == 0 else out

    def integral(self, t0: float, t1: float) -> float:
        """Exact cumulative contribution over [t0, t1]."""
        lo = np.maximum(self.breakpoints[:-1], t0)
        hi = np.minimum(self.breakpoints[1:], t1)
        return float(np.dot(self.rates, np.clip(hi - lo, 0.0, None)))


def present_value(t, schedule: ContributionSchedule, rate_riskfree: float):
    """Present value at time t of contributions over (t, T], discounted at r.

    Exact closed form per piecewise-constant segment; accepts scalar or
    array t.  Raises TimeOutOfRange outside [0, T].
    """
    t_arr = np.asarray(t, dtype=float)
    T = schedule.horizon
    if np.any(t_arr < -_TIME_ATOL) or np.any(t_arr > T + _TIME_ATOL):
        raise TimeOutOfRange(f"t={t} outside [0, {T}]")
    t_arr = np.clip(t_arr, 0.0, T)
    r = float(rate_riskfree)
    pv = np.zeros_like(t_arr)
    for a, b, y in zip(schedule.breakpoints[:-1], schedule.breakpoints[1:], schedule.rates):
        lo = np.maximum(t_arr, a)
        active = lo < b
        if not np.any(active) or y == 0.0:
            continue
        if r == 0.0:
            seg = y * (b - lo)
        else:
            seg = y * (np.exp(-r * (lo - t_arr)) - np.exp(-r * (b - t_arr))) / r
        pv = pv + np.where(active, seg, 0.0)
    return float(pv) if pv.ndim == 0 else pv


@dataclass(frozen=True, eq=False)
class PvCurve:
    """Sampled t -> PV_t curve plus the exact closed-form evaluator."""

    schedule: ContributionSchedule
    rate_riskfree: float
    times: np.ndarray
    values: np.ndarray

    @classmethod
    def build(cls, schedule: ContributionSchedule, rate_riskfree: float, n: int = 201) -> "PvCurve":
        times = np.linspace(0.0, schedule.horizon, n)
        values = present_value(times, schedule, rate_riskfree)
        return cls(schedule=schedule, rate_riskfree=rate_riskfree, times=times, values=values)

    def __call__(self, t):
        return present_value(t, self.schedule, self.rate_riskfree)


def capital_ratio(t, wealth: float, schedule: ContributionSchedule, rate_riskfree: float) -> float:
    """Ratio of accumulated savings to lifetime pension wealth, in [0, 1].

    Equals 1 once no contributions remain (PV_t = 0), and 0 for zero wealth
    while contributions are still due.
    """
    if wealth < 0.0:
        raise ValueError("wealth must be non-negative")
    pv = present_value(t, schedule, rate_riskfree)
    if pv <= 0.0:
        return 1.0
    if wealth == 0.0:
        return 0.0
    return wealth / (wealth + pv)
