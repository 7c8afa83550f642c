import math

import numpy as np
import pytest

from glidepath.cqp import MeanVarFrontier, g_value
from glidepath.errors import (
    CFLViolation,
    CharacteristicExitsDomain,
    IncompatibleGrid,
    InsufficientPoints,
    OutOfDomain,
    WealthBelowPV,
)
from glidepath.hjb import (
    DEFAULT_PROBE_WEALTHS,
    GridSpec,
    characteristic_terminal_wealth,
    indirect_risk_aversion,
    inverse_utility,
    load_surface,
    optimal_policy,
    optimal_policy_samuelson,
    samuelson_risk_aversion,
    save_surface,
    solve_rho,
    solve_value_u,
    surface_cache_key,
    transport_consistency_residual,
    utility,
    value_at_zero_extrapolation,
)
from glidepath.market import (
    ContributionSchedule,
    MarketParams,
    capital_ratio,
    present_value,
    validate_market,
)

ZERO_SCHEDULE = ContributionSchedule(breakpoints=[0.0, 40.0], rates=[0.0])


class TestGridSpec:
    def test_rejects_bad_steps(self):
        with pytest.raises(ValueError):
            GridSpec(t_max=40.0, dt=0.0)
        with pytest.raises(ValueError):
            GridSpec(t_max=40.0, dz=-0.1)
        with pytest.raises(ValueError):
            GridSpec(t_max=40.0, z_min=2.0, z_max=1.0)

    def test_counts(self, desk_grid):
        assert desk_grid.n_steps == 800
        assert desk_grid.nz == 1801
        assert desk_grid.zs[0] == -12.0 and desk_grid.zs[-1] == pytest.approx(6.0)


class TestSolveRho:
    def test_terminal_slice_exact(self, rho_desk):
        surface = rho_desk(8.0)
        assert np.all(surface.values[-1] == 8.0)
        assert surface.ts[-1] == 40.0

    def test_range_invariant(self, rho_desk):
        for gamma in (2.0, 8.0):
            surface = rho_desk(gamma)
            assert surface.values.min() > 0.0
            assert surface.values.max() <= gamma + 1e-8

    def test_neumann_flat_at_right(self, rho_desk):
        surface = rho_desk(8.0)
        assert np.abs(surface.values[:, -1] - surface.values[:, -2]).max() < 1e-4

    def test_zero_contributions_keep_terminal_gamma(self, baseline_market, desk_grid):
        surface = solve_rho(baseline_market, ZERO_SCHEDULE, 5.0, desk_grid)
        assert np.abs(surface.values - 5.0).max() < 1e-8

    def test_degenerate_market_matches_annuity_risk_aversion(self, baseline_schedule,
                                                             desk_grid):
        # vanishing excess return: the value function is the deterministic
        # annuity accumulation, so R(t,x) = gamma x e^{r(T-t)} / (x e^{r(T-t)} + ann_t)
        eps = 1e-6
        params = validate_market(MarketParams(
            rate_riskfree=0.01, drifts=[0.01, 0.01 + eps],
            covariance=[[0.0025, 0.0], [0.0, 0.0625]]))
        gamma = 4.0
        surface = solve_rho(params, baseline_schedule, gamma, desk_grid)
        r = 0.01
        for t in (0.0, 17.3, 35.0):
            ann = sum(
                y * (math.exp(r * (40.0 - a)) - math.exp(r * (40.0 - b))) / r
                for a, b, y in [(max(t, 0.0), 40.0, 0.025)])
            for x in (1e-4, 0.1, 1.0, 10.0):
                grow = x * math.exp(r * (40.0 - t))
                expected = gamma * grow / (grow + ann)
                got = indirect_risk_aversion(surface, t, x)
                assert got == pytest.approx(expected, abs=0.02 * gamma)

    def test_explicit_scheme_raises_cfl(self, baseline_market, baseline_schedule,
                                        desk_grid):
        with pytest.raises(CFLViolation):
            solve_rho(baseline_market, baseline_schedule, 2.0, desk_grid,
                      scheme="explicit-advection")

    def test_incompatible_horizon(self, baseline_market, baseline_schedule):
        with pytest.raises(IncompatibleGrid):
            solve_rho(baseline_market, baseline_schedule, 2.0, GridSpec(t_max=30.0))

    def test_refinement_moves_probes_little(self, baseline_market, baseline_schedule,
                                            frontier, rho_desk):
        coarse = rho_desk(8.0)
        fine = solve_rho(baseline_market, baseline_schedule, 8.0,
                         GridSpec(t_max=40.0, dt=0.025, dz=0.005), frontier=frontier)
        for t, w in [(0.0, 2.0), (0.0, 0.2), (20.0, 0.1), (30.0, 0.5)]:
            pc = frontier.pi_hat_unit(indirect_risk_aversion(coarse, t, w))
            pf = frontier.pi_hat_unit(indirect_risk_aversion(fine, t, w))
            assert np.abs(pc - pf).max() < 0.015  # half the probe tolerance


class TestPolicies:
    def test_optimal_policy_spot_values(self, rho_desk, baseline_market):
        surface = rho_desk(8.0)
        alloc = optimal_policy(surface, 0.0, 2.0, baseline_market)
        assert alloc.weights == pytest.approx([0.740, 0.260], abs=0.02)
        alloc = optimal_policy(surface, 0.0, 1e-5, baseline_market)
        assert alloc.weights == pytest.approx([0.0, 1.0], abs=1e-6)

    def test_low_gamma_near_horizon_policy(self, rho_desk, baseline_market):
        surface = rho_desk(2.0)
        alloc = optimal_policy(surface, 39.975, 20.0, baseline_market)
        assert alloc.weights == pytest.approx([0.349, 0.651], abs=0.01)

    def test_monotone_lifestyling_in_wealth(self, rho_desk, frontier):
        surface = rho_desk(8.0)
        wealths = [1e-5, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 20.0]
        for t in (0.0, 10.0, 20.0, 30.0, 39.975):
            stocks = [float(frontier.pi_hat_unit(indirect_risk_aversion(surface, t, w))[1])
                      for w in wealths]
            assert all(hi >= lo - 1e-9 for hi, lo in zip(stocks[:-1], stocks[1:]))

    def test_rbar_probe(self, rho_desk, baseline_schedule):
        surface = rho_desk(8.0)
        assert samuelson_risk_aversion(surface, 0.0, 2.0, baseline_schedule, 0.01) == \
            pytest.approx(8.01, abs=0.05)

    def test_samuelson_policy_identity(self, rho_desk, baseline_market, baseline_schedule):
        surface = rho_desk(8.0)
        for t, xbar in [(0.0, 1.2), (10.0, 2.5), (35.0, 0.8)]:
            pv = present_value(t, baseline_schedule, 0.01)
            direct = optimal_policy_samuelson(surface, t, xbar, baseline_market,
                                              baseline_schedule)
            via_w_world = (1.0 - pv / xbar) * optimal_policy(
                surface, t, xbar - pv, baseline_market).weights
            assert direct.weights == pytest.approx(via_w_world, abs=1e-9)

    def test_samuelson_policy_budget_is_capital_ratio(self, rho_desk, baseline_market,
                                                      baseline_schedule):
        surface = rho_desk(8.0)
        pv = present_value(0.0, baseline_schedule, 0.01)
        lifetime = 2.0 + pv
        alloc = optimal_policy_samuelson(surface, 0.0, lifetime, baseline_market,
                                         baseline_schedule)
        assert alloc.budget_bound == pytest.approx(2.0 / lifetime, rel=1e-12)

    def test_samuelson_policy_requires_wealth_above_pv(self, rho_desk, baseline_market,
                                                       baseline_schedule):
        surface = rho_desk(8.0)
        with pytest.raises(WealthBelowPV):
            optimal_policy_samuelson(surface, 0.0, 0.5, baseline_market, baseline_schedule)

    def test_out_of_domain_and_clamp(self, rho_desk):
        surface = rho_desk(8.0)
        with pytest.raises(OutOfDomain):
            surface.interp(0.0, 7.5)
        # one-cell overshoot clamps with a warning instead
        val = surface.interp(0.0, 6.005)
        assert val == pytest.approx(surface.interp(0.0, 6.0), rel=1e-9)
        with pytest.raises(ValueError):
            indirect_risk_aversion(surface, 0.0, 0.0)


class TestValueTransport:
    def test_terminal_profile(self, rho_desk, baseline_market, baseline_schedule):
        surface = solve_value_u(rho_desk(2.0), baseline_market, baseline_schedule, 2.0)
        zs = surface.zs
        assert surface.values[-1] == pytest.approx(utility(np.exp(zs), 2.0), rel=1e-12)

    def test_log_utility_terminal(self, rho_desk, baseline_market, baseline_schedule):
        surface = solve_value_u(rho_desk(1.0), baseline_market, baseline_schedule, 1.0)
        assert surface.values[-1] == pytest.approx(surface.zs, abs=1e-12)

    def test_merton_closed_form_without_contributions(self, baseline_market, desk_grid):
        # y = 0 and slack budget: v(0, x) = U(x e^{cT}), c = r + g(gamma)
        gamma = 8.0
        rho = solve_rho(baseline_market, ZERO_SCHEDULE, gamma, desk_grid)
        u = solve_value_u(rho, baseline_market, ZERO_SCHEDULE, gamma)
        c = 0.01 + g_value(gamma, baseline_market)
        for x in (0.01, 1.0, 50.0):
            expected = utility(x * math.exp(c * 40.0), gamma)
            assert float(u.value_at(0.0, x)) == pytest.approx(expected, rel=2e-4)
        x_t = characteristic_terminal_wealth(rho, baseline_market, ZERO_SCHEDULE, 1.0)
        assert x_t == pytest.approx(math.exp(c * 40.0), rel=1e-6)

    def test_sign_and_monotonicity(self, rho_desk, baseline_market, baseline_schedule):
        u8 = solve_value_u(rho_desk(8.0), baseline_market, baseline_schedule, 8.0)
        assert np.all(u8.values < 0.0)
        assert np.all(np.diff(u8.values, axis=1) > 0.0)

    def test_transport_consistency(self, rho_desk, baseline_market, baseline_schedule):
        rho = rho_desk(2.0)
        u = solve_value_u(rho, baseline_market, baseline_schedule, 2.0)
        assert transport_consistency_residual(u, rho, t=0.0, z_band=(-4.0, 3.0)) < 0.05

    def test_characteristic_exits_small_domain(self, baseline_market, baseline_schedule):
        grid = GridSpec(t_max=40.0, z_min=-12.0, z_max=0.5, dt=0.05, dz=0.01)
        rho = solve_rho(baseline_market, baseline_schedule, 8.0, grid)
        with pytest.raises(CharacteristicExitsDomain):
            characteristic_terminal_wealth(rho, baseline_market, baseline_schedule, 1.0)

    def test_matches_characteristics_oracle(self, rho_desk, baseline_market,
                                            baseline_schedule, frontier):
        rho = rho_desk(2.0)
        u = solve_value_u(rho, baseline_market, baseline_schedule, 2.0, frontier=frontier)
        for x0 in (1e-4, 0.1):
            x_t = characteristic_terminal_wealth(rho, baseline_market, baseline_schedule,
                                                 x0, substeps=2, frontier=frontier)
            assert float(u.value_at(0.0, x0)) == pytest.approx(utility(x_t, 2.0), rel=5e-4)


class TestExtrapolation:
    def test_linear_data_recovers_intercept(self, rho_desk, baseline_market,
                                            baseline_schedule):
        surface = solve_value_u(rho_desk(2.0), baseline_market, baseline_schedule, 2.0)
        xs = DEFAULT_PROBE_WEALTHS
        values = surface.value_at(0.0, xs)
        design = np.column_stack([np.ones_like(xs), xs])
        expected = np.linalg.lstsq(design, values, rcond=None)[0][0]
        assert value_at_zero_extrapolation(surface, xs) == pytest.approx(expected, rel=1e-12)

    def test_insufficient_points(self, rho_desk, baseline_market, baseline_schedule):
        surface = solve_value_u(rho_desk(2.0), baseline_market, baseline_schedule, 2.0)
        with pytest.raises(InsufficientPoints):
            value_at_zero_extrapolation(surface, [0.1])

    def test_ce_star_desk(self, rho_desk, baseline_market, baseline_schedule):
        surface = solve_value_u(rho_desk(2.0), baseline_market, baseline_schedule, 2.0)
        ce = inverse_utility(value_at_zero_extrapolation(surface, DEFAULT_PROBE_WEALTHS), 2.0)
        assert ce == pytest.approx(3.6501, abs=0.03)


class TestSerialization:
    def test_round_trip(self, rho_desk, tmp_path):
        surface = rho_desk(8.0)
        path = tmp_path / "rho.npz"
        save_surface(surface, path)
        loaded = load_surface(path)
        assert np.array_equal(loaded.values, surface.values)
        assert loaded.gamma == surface.gamma
        assert loaded.interp(13.0, -2.5) == surface.interp(13.0, -2.5)

    def test_value_surface_round_trip(self, rho_desk, baseline_market, baseline_schedule,
                                      tmp_path):
        surface = solve_value_u(rho_desk(2.0), baseline_market, baseline_schedule, 2.0)
        path = tmp_path / "value.npz"
        save_surface(surface, path)
        loaded = load_surface(path)
        assert np.array_equal(loaded.values, surface.values)
        assert float(loaded.value_at(0.0, 0.5)) == float(surface.value_at(0.0, 0.5))

    def test_cache_key_sensitivity(self, baseline_market, baseline_schedule, desk_grid,
                                   paper_grid):
        k1 = surface_cache_key(baseline_market, baseline_schedule, 8.0, desk_grid)
        assert k1 == surface_cache_key(baseline_market, baseline_schedule, 8.0, desk_grid)
        assert k1 != surface_cache_key(baseline_market, baseline_schedule, 2.0, desk_grid)
        assert k1 != surface_cache_key(baseline_market, baseline_schedule, 8.0, paper_grid)
        assert k1 != surface_cache_key(baseline_market, baseline_schedule, 8.0, desk_grid,
                                       robin_kappa=2.0)
