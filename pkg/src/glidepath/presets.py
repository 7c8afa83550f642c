"""Named parameter sets and grid fidelities used by the CLI, service and tests."""

from __future__ import annotations

from .hjb import GridSpec
from .market import ContributionSchedule, MarketParams, validate_market

#: Baseline two-asset market: bonds (2%, 5%) and stocks (10%, 25%),
#: correlation -0.05, risk-free 1%, forty years of flat contributions
#: normalized to a lifetime total of 1.
BASELINE = "paper-baseline"


def baseline_market() -> MarketParams:
    return validate_market(MarketParams.from_volatilities(
        rate_riskfree=0.01,
        drifts=[0.02, 0.10],
        volatilities=[0.05, 0.25],
        correlation=[[1.0, -0.05], [-0.05, 1.0]],
    ))


def baseline_schedule() -> ContributionSchedule:
    return ContributionSchedule.constant(horizon=40.0, total=1.0)


MARKET_PRESETS = {BASELINE: lambda: (baseline_market(), baseline_schedule())}

#: Grid fidelities: "desk" runs in seconds per solve and passes the relaxed
#: tolerances; "paper" is the full-resolution reproduction grid.
FIDELITIES = ("desk", "paper")


def grid_for(fidelity: str, horizon: float = 40.0) -> GridSpec:
    if fidelity == "desk":
        return GridSpec(t_max=horizon, dt=0.05, dz=0.01)
    if fidelity == "paper":
        return GridSpec(t_max=horizon, dt=0.01, dz=0.001)
    raise ValueError(f"unknown fidelity {fidelity!r}; expected one of {FIDELITIES}")


def load_preset(name: str):
    try:
        factory = MARKET_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(MARKET_PRESETS)}") from None
    return factory()
