"""Pension glide-path engine.

Computes the fully optimal stochastic-lifestyling policy (via the indirect
risk-aversion PDE), the explicit heuristic policies pi0..pi3 (via constrained
quadratic programming), and their welfare in certainty-equivalent and
internal-rate-of-return terms.
"""

from .market import (
    ContributionSchedule,
    MarketParams,
    PvCurve,
    capital_ratio,
    present_value,
    validate_market,
)
from .cqp import (
    ActiveSet,
    Allocation,
    MeanVarFrontier,
    full_stock_gamma,
    g_prime,
    g_value,
    min_variance_portfolio,
    mv_value,
    pi0,
    pi1,
    pi2,
    pi3,
    solve_cqp,
    unconstrained_weights,
)
from .hjb import (
    GridSpec,
    RiskAversionSurface,
    ValueSurface,
    indirect_risk_aversion,
    optimal_policy,
    optimal_policy_samuelson,
    samuelson_risk_aversion,
    solve_rho,
    solve_value_u,
    value_at_zero_extrapolation,
)
from .welfare import (
    StrategySpec,
    WelfareReport,
    certainty_equivalent,
    compare_strategies,
    irr,
    monte_carlo_ce,
    value_pde,
)

__version__ = "0.1.0"
