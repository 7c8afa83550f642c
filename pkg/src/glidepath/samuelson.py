"""Bridge between the contributions world and the paid-up-front world.

Shifting the bank holding by the discounted value of future contributions
maps a self-financing strategy with contributions onto one without, and the
no-borrowing constraint maps onto a state-dependent cap on the total risky
proportion.  Strategies are represented as Markov policies (t, state) ->
proportions, which is all the numerics need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeBankAfterInverse


@dataclass(frozen=True, eq=False)
class PortfolioState:
    """Holdings (units) and prices of the bank account plus d risky assets."""

    time: float
    holdings: np.ndarray  # (d+1,), index 0 is the bank account
    prices: np.ndarray    # (d+1,)

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.holdings, dtype=float)).copy()
        s = np.atleast_1d(np.asarray(self.prices, dtype=float)).copy()
        if h.size != s.size or h.size < 2:
            raise ValueError("holdings and prices must share a length of at least 2")
        h.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "holdings", h)
        object.__setattr__(self, "prices", s)

    @property
    def wealth(self) -> float:
        return float(self.holdings @ self.prices)


def proportions(state: PortfolioState) -> np.ndarray:
    """Fractions of wealth in the risky assets, with the 0/0 = 0 convention."""
    w = state.wealth
    risky = state.holdings[1:] * state.prices[1:]
    if w == 0.0:
        return np.zeros_like(risky)
    return risky / w


def to_samuelson(state: PortfolioState, pv: float, rate_riskfree: float) -> PortfolioState:
    """Shift the bank holding by the discounted future contributions.

    Risky holdings are unchanged and wealth increases by exactly ``pv``.
    """
    if pv < 0.0:
        raise ValueError("pv must be non-negative")
    shifted = state.holdings.copy()
    shifted[0] += math.exp(-rate_riskfree * state.time) * pv
    return PortfolioState(time=state.time, holdings=shifted, prices=state.prices)


def from_samuelson(state: PortfolioState, pv: float, rate_riskfree: float) -> PortfolioState:
    """Inverse shift; raises if it would leave a negative bank holding."""
    if pv < 0.0:
        raise ValueError("pv must be non-negative")
    shifted = state.holdings.copy()
    shifted[0] -= math.exp(-rate_riskfree * state.time) * pv
    if shifted[0] < -1e-12 * max(abs(state.holdings[0]), 1.0):
        raise NegativeBankAfterInverse(
            f"bank holding {shifted[0]:.6g} after removing pv={pv}; state is inadmissible"
        )
    return PortfolioState(time=state.time, holdings=shifted, prices=state.prices)


def constraint_equivalence_check(state: PortfolioState, pv: float, rate_riskfree: float):
    """Evaluate both sides of the constraint correspondence; they must agree.

    Left side: the contributions-world state satisfies pi >= 0 and
    pi . 1 <= 1.  Right side: its transform satisfies pi >= 0 and
    pi . 1 <= 1 - pv / wealth.  Returns the boolean pair.
    """
    pi = proportions(state)
    lhs = bool(np.all(pi >= 0.0) and pi.sum() <= 1.0)
    bar = to_samuelson(state, pv, rate_riskfree)
    pi_bar = proportions(bar)
    rhs = bool(np.all(pi_bar >= 0.0) and pi_bar.sum() <= 1.0 - pv / bar.wealth)
    return lhs, rhs


def policy_to_samuelson(pi_value: np.ndarray, wealth: float, pv: float) -> np.ndarray:
    """Map cash-in-hand proportions to lifetime-wealth proportions.

    The risky money amounts agree across worlds, so the proportions rescale
    by the capital ratio wealth / (wealth + pv).
    """
    if wealth <= 0.0:
        raise ValueError("wealth must be positive")
    return np.asarray(pi_value, dtype=float) * (wealth / (wealth + pv))


def policy_from_samuelson(pi_bar_value: np.ndarray, lifetime_wealth: float, pv: float) -> np.ndarray:
    """Inverse of :func:`policy_to_samuelson`; composition is the identity."""
    wealth = lifetime_wealth - pv
    if wealth <= 0.0:
        raise ValueError("lifetime wealth must exceed pv")
    return np.asarray(pi_bar_value, dtype=float) * (lifetime_wealth / wealth)
