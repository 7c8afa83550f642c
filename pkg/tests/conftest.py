import numpy as np
import pytest

from glidepath.cqp import MeanVarFrontier
from glidepath.hjb import GridSpec, solve_rho
from glidepath.market import ContributionSchedule, MarketParams, validate_market


@pytest.fixture(scope="session")
def baseline_market():
    return validate_market(MarketParams.from_volatilities(
        rate_riskfree=0.01,
        drifts=[0.02, 0.10],
        volatilities=[0.05, 0.25],
        correlation=[[1.0, -0.05], [-0.05, 1.0]],
    ))


@pytest.fixture(scope="session")
def baseline_schedule():
    return ContributionSchedule.constant(40.0, 1.0)


@pytest.fixture(scope="session")
def frontier(baseline_market):
    return MeanVarFrontier.build(baseline_market)


@pytest.fixture(scope="session")
def desk_grid():
    return GridSpec(t_max=40.0, dt=0.05, dz=0.01)


@pytest.fixture(scope="session")
def paper_grid():
    return GridSpec(t_max=40.0, dt=0.01, dz=0.001)


class SurfaceCache:
    """Lazily solved desk-fidelity risk-aversion surfaces, one per gamma."""

    def __init__(self, params, schedule, grid, frontier):
        self._args = (params, schedule, grid, frontier)
        self._cache = {}

    def __call__(self, gamma: float):
        if gamma not in self._cache:
            params, schedule, grid, front = self._args
            self._cache[gamma] = solve_rho(params, schedule, gamma, grid,
                                           frontier=front)
        return self._cache[gamma]


@pytest.fixture(scope="session")
def rho_desk(baseline_market, baseline_schedule, desk_grid, frontier):
    return SurfaceCache(baseline_market, baseline_schedule, desk_grid, frontier)
