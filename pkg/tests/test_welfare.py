import math

import numpy as np
import pytest

from glidepath.errors import (
    BracketFailure,
    DiffusionDegenerate,
    IncompatibleGrid,
    SignMismatch,
)
from glidepath.hjb import DEFAULT_PROBE_WEALTHS, GridSpec, value_at_zero_extrapolation
from glidepath.market import ContributionSchedule
from glidepath.welfare import (
    StrategySpec,
    accumulated_contributions,
    certainty_equivalent,
    compare_strategies,
    irr,
    monte_carlo_ce,
    strategy_ce_pde,
    value_pde,
)

ZERO_SCHEDULE = ContributionSchedule(breakpoints=[0.0, 40.0], rates=[0.0])

REFERENCE_CE = {
    2.0: {"pi0": 2.2584, "pi1": 3.3353, "pi2": 3.3353, "pi3": 3.6496},
    5.0: {"pi0": 1.9720, "pi1": 2.0153, "pi2": 2.0153, "pi3": 2.1774},
    8.0: {"pi0": 1.6872, "pi1": 1.6872, "pi2": 1.7510, "pi3": 1.8161},
}


class TestStrategySpec:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            StrategySpec("pi7", 2.0)

    def test_fixed_weights_validated(self):
        with pytest.raises(ValueError):
            StrategySpec("fixed", 2.0, weights=[0.6, 0.6])
        with pytest.raises(ValueError):
            StrategySpec("fixed", 2.0, weights=[-0.1, 0.1])

    def test_optimal_needs_matching_gamma(self, rho_desk):
        with pytest.raises(IncompatibleGrid):
            StrategySpec("optimal", 5.0, surface=rho_desk(8.0))
        with pytest.raises(ValueError):
            StrategySpec("optimal", 5.0)


class TestCertaintyEquivalent:
    def test_reference_inversion(self):
        assert certainty_equivalent(-1.0 / 3.6501, 2.0) == pytest.approx(3.6501, rel=1e-12)

    def test_log_branch(self):
        assert certainty_equivalent(0.0, 1.0) == 1.0

    def test_sqrt_utility(self):
        assert certainty_equivalent(2.0 * math.sqrt(9.0), 0.5) == pytest.approx(9.0)

    def test_sign_mismatch(self):
        with pytest.raises(SignMismatch):
            certainty_equivalent(1.0, 2.0)  # positive utility impossible for gamma > 1


class TestIrr:
    def test_paper_rows(self, baseline_schedule):
        assert irr(3.6501, baseline_schedule) == pytest.approx(0.0550, abs=1e-4)
        assert irr(1.8164, baseline_schedule) == pytest.approx(0.0274, abs=1e-4)
        assert irr(1.6872, baseline_schedule) == pytest.approx(0.0242, abs=1e-4)

    def test_total_contribution_maps_to_zero(self, baseline_schedule):
        # the accumulation integral is flat to float noise near q = 0, so the
        # root is located only to ~1e-8 there (far below table resolution)
        assert irr(1.0, baseline_schedule) == pytest.approx(0.0, abs=1e-8)

    def test_widens_bracket_once(self, baseline_schedule):
        # ce achievable only above 50%/yr growth
        big = accumulated_contributions(baseline_schedule, 0.7, 0.0, 40.0)
        assert irr(big, baseline_schedule) == pytest.approx(0.7, abs=1e-9)

    def test_bracket_failure(self, baseline_schedule):
        with pytest.raises(BracketFailure):
            irr(1e20, baseline_schedule)

    def test_invalid_inputs(self, baseline_schedule):
        with pytest.raises(ValueError):
            irr(0.0, baseline_schedule)
        with pytest.raises(ValueError):
            irr(1.0, ZERO_SCHEDULE)


class TestValuePde:
    @pytest.mark.parametrize("gamma", [2.0, 5.0, 8.0])
    @pytest.mark.parametrize("kind", ["pi0", "pi1", "pi2", "pi3"])
    def test_reference_ce_desk(self, baseline_market, baseline_schedule, frontier,
                               desk_grid, gamma, kind):
        ce, _ = strategy_ce_pde(StrategySpec(kind, gamma), baseline_market,
                                baseline_schedule, desk_grid, frontier=frontier)
        assert ce == pytest.approx(REFERENCE_CE[gamma][kind], abs=0.01)

    def test_zero_risk_annuity_closed_form(self, baseline_market, baseline_schedule,
                                           desk_grid):
        surface = value_pde(StrategySpec("fixed", 2.0, weights=[0.0, 0.0]),
                            baseline_market, baseline_schedule, desk_grid)
        ann = accumulated_contributions(baseline_schedule, 0.01, 0.0, 40.0)
        xs = np.exp(surface.zs)
        assert surface.w.row_at(0.0) == pytest.approx(
            xs * math.exp(0.01 * 40.0) + ann, rel=1e-12)
        # the zero-wealth regression carries the curvature of U over the probe
        # window, so it recovers the annuity to ~1e-5 rather than exactly
        v0 = value_at_zero_extrapolation(surface, DEFAULT_PROBE_WEALTHS)
        assert certainty_equivalent(v0, 2.0) == pytest.approx(ann, rel=1e-5)

    def test_partial_degeneracy_raises(self, baseline_market, baseline_schedule,
                                       desk_grid):
        with pytest.raises(DiffusionDegenerate):
            value_pde(StrategySpec("fixed", 2.0, weights=[1e-7, 0.0]),
                      baseline_market, baseline_schedule, desk_grid)

    def test_optimal_beats_heuristics(self, baseline_market, baseline_schedule,
                                      frontier, desk_grid, rho_desk):
        gamma = 5.0
        ce_star, _ = strategy_ce_pde(StrategySpec("optimal", gamma, surface=rho_desk(gamma)),
                                     baseline_market, baseline_schedule, desk_grid,
                                     frontier=frontier)
        for kind in ("pi0", "pi1", "pi2", "pi3"):
            ce, _ = strategy_ce_pde(StrategySpec(kind, gamma), baseline_market,
                                    baseline_schedule, desk_grid, frontier=frontier)
            assert ce_star >= ce * (1.0 - 1e-3)

    def test_gamma_one_log_utility(self, baseline_market, baseline_schedule, frontier,
                                   desk_grid):
        ce, _ = strategy_ce_pde(StrategySpec("pi3", 1.0), baseline_market,
                                baseline_schedule, desk_grid, frontier=frontier)
        assert 5.0 < ce < 8.0  # log-utility CE for the baseline market


class TestMonteCarlo:
    def test_lognormal_closed_form(self, baseline_market):
        spec = StrategySpec("fixed", 2.0, weights=[0.0, 1.0])
        ce, se = monte_carlo_ce(spec, baseline_market, ZERO_SCHEDULE, 1.0,
                                100_000, 1.0 / 250.0, seed=7)
        assert se < 0.05
        assert abs(ce - math.exp(1.5)) < 3.0 * se

    def test_zero_risk_exact_zero_variance(self, baseline_market, baseline_schedule):
        spec = StrategySpec("fixed", 2.0, weights=[0.0, 0.0])
        ce, se = monte_carlo_ce(spec, baseline_market, baseline_schedule, 0.0,
                                1000, 1.0 / 12.0, seed=3)
        assert se == 0.0
        ann = accumulated_contributions(baseline_schedule, 0.01, 0.0, 40.0)
        assert ce == pytest.approx(ann, rel=1e-12)

    def test_seed_determinism(self, baseline_market, baseline_schedule, frontier):
        spec = StrategySpec("pi3", 5.0)
        a = monte_carlo_ce(spec, baseline_market, baseline_schedule, 0.0, 4000, 0.1,
                           seed=11, frontier=frontier)
        b = monte_carlo_ce(spec, baseline_market, baseline_schedule, 0.0, 4000, 0.1,
                           seed=11, frontier=frontier)
        c = monte_carlo_ce(spec, baseline_market, baseline_schedule, 0.0, 4000, 0.1,
                           seed=12, frontier=frontier)
        assert a == b
        assert a != c

    def test_validates_inputs(self, baseline_market, baseline_schedule):
        spec = StrategySpec("pi1", 2.0)
        with pytest.raises(ValueError):
            monte_carlo_ce(spec, baseline_market, baseline_schedule, 0.0, 1, 0.1, seed=1)
        with pytest.raises(ValueError):
            monte_carlo_ce(spec, baseline_market, baseline_schedule, 0.0, 10, 0.0, seed=1)

    def test_matches_pde_within_three_sigma(self, baseline_market, baseline_schedule,
                                            frontier, desk_grid):
        spec = StrategySpec("pi1", 8.0)
        ce_pde, _ = strategy_ce_pde(spec, baseline_market, baseline_schedule, desk_grid,
                                    frontier=frontier)
        ce_mc, se = monte_carlo_ce(spec, baseline_market, baseline_schedule, 0.0,
                                   60_000, 1.0 / 50.0, seed=5, frontier=frontier)
        assert abs(ce_mc - ce_pde) < 3.0 * se

    def test_optimal_policy_value_consistent_with_simulation(
            self, baseline_market, baseline_schedule, frontier, desk_grid, rho_desk):
        # the solved value function prices the simulated optimal wealth process
        spec = StrategySpec("optimal", 8.0, surface=rho_desk(8.0))
        ce_pde, _ = strategy_ce_pde(spec, baseline_market, baseline_schedule, desk_grid,
                                    frontier=frontier)
        ce_mc, se = monte_carlo_ce(spec, baseline_market, baseline_schedule, 0.0,
                                   40_000, 1.0 / 50.0, seed=9, frontier=frontier)
        assert abs(ce_mc - ce_pde) < 3.0 * se

    def test_common_random_numbers_shrink_gap_error(self, baseline_market,
                                                    baseline_schedule, frontier):
        n, dt, seed = 30_000, 0.1, 99
        _, _, u3 = monte_carlo_ce(StrategySpec("pi3", 5.0), baseline_market,
                                  baseline_schedule, 0.0, n, dt, seed=seed,
                                  frontier=frontier, return_utilities=True)
        _, _, u1 = monte_carlo_ce(StrategySpec("pi1", 5.0), baseline_market,
                                  baseline_schedule, 0.0, n, dt, seed=seed,
                                  frontier=frontier, return_utilities=True)
        _, _, u1_indep = monte_carlo_ce(StrategySpec("pi1", 5.0), baseline_market,
                                        baseline_schedule, 0.0, n, dt, seed=seed + 1,
                                        frontier=frontier, return_utilities=True)
        paired = np.std(u3 - u1, ddof=1) / math.sqrt(n)
        independent = math.sqrt((np.var(u3, ddof=1) + np.var(u1_indep, ddof=1)) / n)
        assert paired < independent


class TestCompareStrategies:
    def test_report_rows_and_ordering(self, baseline_market, baseline_schedule,
                                      frontier, desk_grid, rho_desk):
        gamma = 8.0
        specs = [StrategySpec(k, gamma) for k in ("pi0", "pi1", "pi2", "pi3")]
        specs.append(StrategySpec("optimal", gamma, surface=rho_desk(gamma)))
        report = compare_strategies(specs, baseline_market, baseline_schedule, "pde",
                                    grid=desk_grid, frontier=frontier)
        ces = [report.by(k, "pde").ce for k in ("pi0", "pi1", "pi2", "pi3", "optimal")]
        assert all(b >= a - 1e-9 for a, b in zip(ces, ces[1:]))
        assert report.by("pi1").irr == pytest.approx(0.0242, abs=5e-4)

    def test_tied_strategies_identical(self, baseline_market, baseline_schedule,
                                       frontier, desk_grid):
        # gamma=2: pi1 is fully invested, so pi2 rescaling is the identity
        specs = [StrategySpec("pi1", 2.0), StrategySpec("pi2", 2.0)]
        report = compare_strategies(specs, baseline_market, baseline_schedule, "pde",
                                    grid=desk_grid, frontier=frontier)
        assert report.by("pi1").ce == report.by("pi2").ce

    def test_csv_schema(self, baseline_market, baseline_schedule, frontier, desk_grid):
        report = compare_strategies([StrategySpec("pi1", 2.0)], baseline_market,
                                    baseline_schedule, "pde", grid=desk_grid,
                                    frontier=frontier)
        lines = report.to_csv().splitlines()
        assert lines[0] == "gamma,strategy,ce,irr,method,stderr,runtime_s"
        assert lines[1].startswith("2.0,pi1,")

    def test_both_methods_consistent(self, baseline_market, baseline_schedule,
                                     frontier, desk_grid):
        report = compare_strategies([StrategySpec("pi1", 5.0)], baseline_market,
                                    baseline_schedule, "both", grid=desk_grid,
                                    frontier=frontier, mc_paths=40_000, mc_dt=1.0 / 50.0)
        assert report.max_method_gap_sigmas() < 3.0

    def test_pde_requires_grid(self, baseline_market, baseline_schedule):
        with pytest.raises(ValueError):
            compare_strategies([StrategySpec("pi1", 2.0)], baseline_market,
                               baseline_schedule, "pde")
