"""Response builders shared verbatim by the CLI and the HTTP service.

Keeping these in one place guarantees the two front ends return identical
numbers for identical inputs; floats are rounded to 12 significant digits so
golden files stay stable.
"""

from __future__ import annotations

import numpy as np

from .cqp import Allocation, MeanVarFrontier, pi0, pi1, pi2, pi3, solve_cqp
from .errors import GlidepathError
from .hjb import RiskAversionSurface, indirect_risk_aversion
from .market import ContributionSchedule, MarketParams, capital_ratio
from .utils import sig12

ALLOCATION_STRATEGIES = ("pi0", "pi1", "pi2", "pi3", "optimal")


class RequestShapeError(GlidepathError):
    """Request is structurally valid but semantically unusable."""


def _labels(alloc: Allocation) -> list:
    if alloc.active_set is None:
        labels = []
        if alloc.total >= alloc.budget_bound - 1e-12:
            labels.append("budget")
        labels += [f"zero:{i}" for i, w in enumerate(alloc.weights) if w == 0.0]
        return labels
    return alloc.active_set.labels()


def allocation_response(
    params: MarketParams,
    schedule: ContributionSchedule,
    *,
    strategy: str,
    gamma: float,
    alpha: float | None = None,
    time: float | None = None,
    wealth: float | None = None,
    surface: RiskAversionSurface | None = None,
) -> dict:
    """Evaluate one strategy at a capital ratio or a (time, wealth) point."""
    if strategy not in ALLOCATION_STRATEGIES:
        raise RequestShapeError(f"unknown strategy {strategy!r}")
    if not gamma > 0.0:
        raise RequestShapeError("gamma must be positive")
    if alpha is None and wealth is not None:
        if time is None:
            raise RequestShapeError("wealth queries need a time")
        alpha = capital_ratio(time, wealth, schedule, params.rate_riskfree)

    if strategy == "optimal":
        if surface is None:
            raise RequestShapeError("optimal strategy needs a solved surface")
        if time is None or wealth is None:
            raise RequestShapeError("optimal strategy is evaluated at (time, wealth)")
        effective = float(indirect_risk_aversion(surface, time, max(wealth, 1e-300)))
        alloc = solve_cqp(1.0, effective, params)
    elif strategy == "pi0":
        alloc, effective = pi0(gamma, params), gamma
    elif strategy == "pi1":
        alloc, effective = pi1(gamma, params), gamma
    elif strategy == "pi2":
        if alpha is None:
            raise RequestShapeError("pi2 needs alpha or (time, wealth)")
        alloc, effective = pi2(alpha, gamma, params), alpha * gamma
    else:
        if alpha is None:
            raise RequestShapeError("pi3 needs alpha or (time, wealth)")
        alloc, effective = pi3(alpha, gamma, params), alpha * gamma

    return {
        "strategy": strategy,
        "gamma": sig12(gamma),
        "alpha": None if alpha is None else sig12(alpha),
        "weights": [sig12(w) for w in alloc.weights],
        "total": sig12(alloc.total),
        "budget_bound": sig12(alloc.budget_bound),
        "effective_risk_aversion": sig12(effective),
        "binding": _labels(alloc),
    }


def glidepath_response(
    params: MarketParams,
    schedule: ContributionSchedule,
    *,
    gamma: float,
    strategy: str = "pi3",
    alphas=None,
) -> dict:
    """Allocation per capital ratio plus the two structural thresholds.

    ``budget_binding_alpha`` is the ratio below which the risky budget is
    saturated; ``full_stock_alpha`` the ratio below which a single asset is
    held.  Both are capped at 1.
    """
    if strategy not in ("pi2", "pi3"):
        raise RequestShapeError("glide paths are defined for the alpha-driven strategies pi2, pi3")
    if alphas is None:
        alphas = np.linspace(0.0, 1.0, 101)
    alphas = np.asarray(alphas, dtype=float)
    if alphas.size == 0 or np.any(np.diff(alphas) <= 0.0):
        raise RequestShapeError("alpha grid must be non-empty and increasing")
    if alphas[0] < 0.0 or alphas[-1] > 1.0:
        raise RequestShapeError("alpha grid must lie within [0, 1]")
    front = MeanVarFrontier.build(params)
    points = [
        allocation_response(params, schedule, strategy=strategy, gamma=gamma,
                            alpha=float(a))
        for a in alphas
    ]
    return {
        "strategy": strategy,
        "gamma": sig12(gamma),
        "points": points,
        "thresholds": {
            "budget_binding_alpha": sig12(min(1.0, front.rho_budget_bind / gamma)),
            "full_stock_alpha": sig12(min(1.0, max(0.0, front.rho_full_stock / gamma))),
        },
    }


def policy_probe_table(
    params: MarketParams,
    schedule: ContributionSchedule,
    surface: RiskAversionSurface,
    wealths=(1e-5, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 20.0),
    times=None,
) -> dict:
    """Optimal weights over a wealth x time probe grid (report layout)."""
    horizon = schedule.horizon
    if times is None:
        times = (0.0, 10.0, 20.0, 30.0, horizon - 0.025)
    front = MeanVarFrontier.build(params)
    rows = []
    for w in wealths:
        cells = []
        for t in times:
            rho = float(indirect_risk_aversion(surface, t, w))
            weights = front.pi_hat_unit(rho)
            cells.append([sig12(float(x)) for x in weights])
        rows.append({"wealth": sig12(w), "weights": cells})
    return {"times": [sig12(t) for t in times], "rows": rows}
