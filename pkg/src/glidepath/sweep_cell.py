"""Single sweep-cell worker, kept import-light for process pools."""

from __future__ import annotations

from .cqp import MeanVarFrontier
from .hjb import solve_rho
from .market import ContributionSchedule, MarketParams, validate_market
from .presets import grid_for
from .welfare import StrategySpec, strategy_ce_pde


def run_cell(payload: dict) -> list:
    """Value pi0..pi3 and the optimal policy for one market parametrization.

    Returns one entry per gamma: {"gamma", "status", "ces"} on success or
    {"gamma", "status": "failed", "message"} on error.  All strategies share
    the parabolic discretization so the gap is insensitive to grid error.
    """
    cell = payload["cell"]
    out = []
    try:
        params = validate_market(MarketParams.from_volatilities(
            rate_riskfree=payload["rate_riskfree"],
            drifts=[cell["mu1"], cell["mu2"]],
            volatilities=[cell["sigma1"], cell["sigma2"]],
            correlation=[[1.0, cell["corr"]], [cell["corr"], 1.0]],
        ))
        schedule = ContributionSchedule.constant(payload["horizon"],
                                                 payload["total_contribution"])
        grid = grid_for(payload["fidelity"], payload["horizon"])
        frontier = MeanVarFrontier.build(params)
    except Exception as exc:  # cell-level failure hits every gamma
        return [{"gamma": g, "status": "failed", "message": str(exc)}
                for g in payload["gammas"]]

    for gamma in payload["gammas"]:
        try:
            rho = solve_rho(params, schedule, gamma, grid, frontier=frontier)
            ces = {}
            for kind in ("pi0", "pi1", "pi2", "pi3"):
                ces[kind], _ = strategy_ce_pde(StrategySpec(kind, gamma), params,
                                               schedule, grid, frontier=frontier)
            ces["optimal"], _ = strategy_ce_pde(
                StrategySpec("optimal", gamma, surface=rho), params, schedule, grid,
                frontier=frontier)
            out.append({"gamma": gamma, "status": "ok", "ces": ces})
        except Exception as exc:
            out.append({"gamma": gamma, "status": "failed", "message": str(exc)})
    return out
