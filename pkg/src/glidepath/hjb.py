"""Indirect risk aversion PDE, value transport, and the optimal policy.

The optimal policy is pihat(1, R(t, x)) where R(t, x) = rho(t, ln x) and rho
solves a quasilinear Cauchy problem backward from rho(T, .) = gamma.  In
backward time tau = T - t the equation is a conservation law

    d rho / d tau = d/dz [ D(rho) drho/dz + V(z,t) rho - h(rho) ],

with D = -g'(rho) > 0, V = y(t) e^{-z} + r  and  h = (1 - rho) g(rho).

Discretization notes.  V blows up like e^{-z} on the left of the domain, so
the advective flux must be integrated implicitly: an explicit update would
need dt <= dz / max(V) ~ 1e-7 on the default domain.  The V-flux is upwinded
with the right-hand state (characteristics run left in backward time), which
reproduces the exact quasi-steady profile rho ~ C e^z in the contribution-
dominated region because V_{j+1/2} * e^{z_{j+1}} is interface-independent.
The h-flux is a mild velocity term and is upwinded by its local speed.  The
scheme is an M-matrix, so 0 < rho <= gamma is preserved without clamping;
the bound is asserted after the march rather than enforced.

The value function u (log-wealth coordinates) solves pure transport along
dz/dt = V + g(rho) - y e^{-z} ... i.e. dx/dt = y + (r + g(rho)) x, and is
marched by a semi-Lagrangian step in the certainty-equivalent scale
w = U^{-1}(u), which is smooth and O(1) across the whole domain.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .cqp import MeanVarFrontier, solve_cqp, Allocation
from .errors import (
    CFLViolation,
    CharacteristicExitsDomain,
    IncompatibleGrid,
    InsufficientPoints,
    InvariantViolated,
    NonConvergence,
    OutOfDomain,
    WealthBelowPV,
)
from .market import ContributionSchedule, MarketParams, present_value, validate_market
from .utils import content_hash

log = logging.getLogger(__name__)

MAX_SURFACE_BYTES = 512 * 1024 ** 2
RHO_UPPER_SLACK = 1e-6  # post-hoc invariant tolerance on rho <= gamma


@dataclass(frozen=True)
class GridSpec:
    """Uniform (t, z) grid on [0, t_max] x [z_min, z_max]."""

    t_max: float
    z_min: float = -12.0
    z_max: float = 6.0
    dt: float = 0.05
    dz: float = 0.01

    def __post_init__(self):
        if self.dt <= 0.0 or self.dz <= 0.0:
            raise ValueError("dt and dz must be positive")
        if not self.z_min < self.z_max:
            raise ValueError("need z_min < z_max")
        if self.t_max <= 0.0:
            raise ValueError("t_max must be positive")
        if self.nz * 8 > MAX_SURFACE_BYTES:
            raise ValueError("spatial grid alone exceeds the memory budget")

    @property
    def n_steps(self) -> int:
        return max(1, round(self.t_max / self.dt))

    @property
    def nz(self) -> int:
        return round((self.z_max - self.z_min) / self.dz) + 1

    @property
    def zs(self) -> np.ndarray:
        return self.z_min + self.dz * np.arange(self.nz)

    def store_every(self) -> int:
        """Thinning factor keeping the stored surface within the memory budget."""
        rows = self.n_steps + 1
        budget_rows = max(2, MAX_SURFACE_BYTES // (2 * 8 * self.nz))
        every = 1
        while (rows - 1) // every + 1 > budget_rows or every * self.dt < 0.05 - 1e-12:
            every += 1
        return every


class _Surface:
    """Shared bilinear interpolation over stored (ts, zs) slices."""

    def __init__(self, grid: GridSpec, ts: np.ndarray, zs: np.ndarray, values: np.ndarray):
        self.grid = grid
        self.ts = ts
        self.zs = zs
        self.values = values
        values.setflags(write=False)

    def row_at(self, t: float) -> np.ndarray:
        """Slice at time t, linear in t between stored levels."""
        ts = self.ts
        if t <= ts[0]:
            return self.values[0]
        if t >= ts[-1]:
            return self.values[-1]
        k = int(np.searchsorted(ts, t, side="right") - 1)
        frac = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (1.0 - frac) * self.values[k] + frac * self.values[k + 1]

    def interp(self, t: float, z) -> np.ndarray:
        """Bilinear value at (t, z); z outside the grid clamps with a warning."""
        z_arr = np.asarray(z, dtype=float)
        g = self.grid
        if np.any(z_arr < g.z_min - g.dz - 1e-12) or np.any(z_arr > g.z_max + g.dz + 1e-12):
            raise OutOfDomain(
                f"z query outside [{g.z_min}, {g.z_max}] by more than one cell"
            )
        if np.any(z_arr < g.z_min) or np.any(z_arr > g.z_max):
            log.warning("query clamped to the z boundary (full-stock region below z_min)")
            z_arr = np.clip(z_arr, g.z_min, g.z_max)
        row = self.row_at(float(t))
        pos = (z_arr - g.z_min) / g.dz
        j = np.clip(pos.astype(int), 0, self.zs.size - 2)
        frac = pos - j
        out = (1.0 - frac) * row[j] + frac * row[j + 1]
        return float(out) if out.ndim == 0 else out


class RiskAversionSurface(_Surface):
    """Grid function rho(t, z) with terminal value gamma; 0 < rho <= gamma.

    Between stored time levels the surface interpolates the transformed
    field rho * (x + PV_t) / x rather than rho itself.  That field (the
    risk aversion read in lifetime-wealth units) stays smooth through the
    steep terminal transient at small wealth, where rho drops from gamma to
    roughly gamma * x / (x + PV_t) within a few advective time scales, so
    linear interpolation in it remains faithful arbitrarily close to the
    horizon.  The transform is the identity once contributions stop.
    """

    def __init__(self, grid, ts, zs, values, gamma: float, params_hash: str,
                 schedule: ContributionSchedule, rate_riskfree: float):
        vmax = float(values.max())
        vmin = float(values.min())
        if not vmin > 0.0 or vmax > gamma + RHO_UPPER_SLACK:
            raise InvariantViolated(
                f"rho range [{vmin:.3e}, {vmax:.6f}] outside (0, {gamma}]"
            )
        super().__init__(grid, ts, zs, values)
        self.gamma = float(gamma)
        self.params_hash = params_hash
        self.schedule = schedule
        self.rate_riskfree = float(rate_riskfree)
        self._xs = np.exp(zs)
        self._pv_stored = np.array([present_value(t, schedule, rate_riskfree)
                                    for t in ts])

    def row_at(self, t: float) -> np.ndarray:
        ts = self.ts
        t = float(min(max(t, ts[0]), ts[-1]))
        k = min(int(np.searchsorted(ts, t, side="right")) - 1, ts.size - 2)
        if t == ts[k]:
            return self.values[k]
        if t == ts[k + 1]:
            return self.values[k + 1]
        frac = (t - ts[k]) / (ts[k + 1] - ts[k])
        x = self._xs
        scale_lo = (x + self._pv_stored[k]) / x
        scale_hi = (x + self._pv_stored[k + 1]) / x
        blended = (1.0 - frac) * self.values[k] * scale_lo \
            + frac * self.values[k + 1] * scale_hi
        pv_t = present_value(t, self.schedule, self.rate_riskfree)
        return blended * x / (x + pv_t)


class ValueSurface(_Surface):
    """Grid function u(t, z); monotone in z, sign fixed by 1 - gamma.

    ``values`` holds u; the certainty-equivalent scale w = U^{-1}(u) is kept
    alongside for well-conditioned interpolation.
    """

    def __init__(self, grid, ts, zs, values, w_values, gamma: float, params_hash: str):
        if np.any(np.diff(w_values, axis=1) < -1e-13 * w_values[:, :-1]):
            raise InvariantViolated("value surface is not increasing in z")
        super().__init__(grid, ts, zs, values)
        self.w = _Surface(grid, ts, zs, w_values)
        self.gamma = float(gamma)
        self.params_hash = params_hash

    def value_at(self, t: float, wealth) -> np.ndarray:
        """v(t, x) = u(t, ln x), interpolated in the w scale."""
        z = np.log(np.asarray(wealth, dtype=float))
        return utility(self.w.interp(t, z), self.gamma)


# -- CRRA helpers -------------------------------------------------------------

def utility(x, gamma: float):
    x = np.asarray(x, dtype=float)
    if gamma == 1.0:
        out = np.log(x)
    else:
        out = x ** (1.0 - gamma) / (1.0 - gamma)
    return float(out) if out.ndim == 0 else out


def inverse_utility(u, gamma: float):
    u = np.asarray(u, dtype=float)
    if gamma == 1.0:
        out = np.exp(u)
    else:
        out = ((1.0 - gamma) * u) ** (1.0 / (1.0 - gamma))
    return float(out) if out.ndim == 0 else out


# -- risk-aversion PDE march ---------------------------------------------------

def solve_rho(
    params: MarketParams,
    schedule: ContributionSchedule,
    gamma: float,
    grid: GridSpec,
    *,
    robin_kappa: float = 1.0,
    inner_iterations: int = 1,
    inner_tol: float = 1e-10,
    scheme: str = "implicit",
    terminal_ramp: bool = True,
    frontier: MeanVarFrontier | None = None,
) -> RiskAversionSurface:
    """March the risk-aversion equation backward from rho(T, .) = gamma.

    Left boundary is Robin, d rho/dz = robin_kappa * rho * (1 - rho/gamma);
    right boundary is Neumann.  This Robin form is exact in both boundary
    regimes -- rho = gamma is stationary without contributions, and the
    contribution-dominated layer satisfies rho ~ e^z, i.e. d rho/dz = rho --
    and it keeps the marching matrix an M-matrix, so positivity needs no
    clamping.  (The alternative d rho/dz = kappa (gamma - rho) injects a
    negative source that drives rho below zero whenever the layer amplitude
    is small, e.g. for nearly vanishing excess returns.)

    ``scheme='explicit-advection'`` treats the V-flux explicitly and raises
    CFLViolation when dt exceeds dz / max V, which it does on any standard
    domain -- the implicit default exists because of exactly that failure.

    The terminal data equilibrates into a contribution-dominated layer whose
    local time scale is x / y, and the equilibrated amplitude then decays
    like 1/(time to go), so a uniform step cannot track the first few
    intervals.  With ``terminal_ramp`` the march subdivides early intervals
    into steps proportional to the time to go (floored at 1e-4 years) until
    the uniform step satisfies the same proportionality; stored time levels
    are unaffected.
    """
    validate_market(params)
    if not gamma > 0.0:
        raise ValueError("gamma must be positive")
    if abs(grid.t_max - schedule.horizon) > 1e-9:
        raise IncompatibleGrid("grid horizon differs from the contribution horizon")
    front = frontier if frontier is not None else MeanVarFrontier.build(params)
    zs = grid.zs
    nz = zs.size
    dt, dz = grid.dt, grid.dz
    r = params.rate_riskfree
    z_half = np.concatenate(([zs[0] - 0.5 * dz], 0.5 * (zs[:-1] + zs[1:]), [zs[-1] + 0.5 * dz]))
    exp_half = np.exp(-z_half)

    if scheme == "explicit-advection":
        v_max = schedule.rates.max() * float(exp_half.max()) + r
        if dt * v_max / dz > 1.0:
            raise CFLViolation(
                f"dt={dt} exceeds the advective limit dz/max(V)={dz / v_max:.3e}"
            )
    elif scheme != "implicit":
        raise ValueError(f"unknown scheme {scheme!r}")

    every = grid.store_every()
    n_steps = grid.n_steps
    rho = np.full(nz, float(gamma))
    stored = [rho.copy()]
    stored_ts = [grid.t_max]

    band = np.zeros((3, nz))
    explicit = scheme == "explicit-advection"

    def advance(state, t_new, step, min_inner=1):
        y = schedule.rate(max(t_new, 0.0))
        v_half = y * exp_half + r
        star = state
        inner = max(min_inner, inner_iterations)
        for _ in range(inner):
            new = _rho_step(state, star, front, v_half, step, dz, gamma,
                            robin_kappa, band, explicit_advection=explicit)
            if inner > 1 and np.max(np.abs(new - star)) < inner_tol:
                star = new
                break
            star = new
        return star

    ramp_c = 0.03  # sub-step <= ramp_c * (time to go) while ramping
    ramp_floor = 2e-5
    ramp_until = dt / ramp_c if terminal_ramp and not explicit else 0.0
    for n in range(n_steps):
        t_new = grid.t_max - (n + 1) * dt
        tau_end = (n + 1) * dt
        if n * dt < ramp_until:
            tau = n * dt
            while tau < tau_end - 1e-15:
                sub = min(max(ramp_floor, ramp_c * tau), tau_end - tau)
                tau += sub
                rho = advance(rho, grid.t_max - tau, sub, min_inner=2)
        else:
            rho = advance(rho, t_new, dt)
        if not np.all(np.isfinite(rho)):
            raise NonConvergence(f"non-finite rho at step {n + 1}")
        if (n + 1) % every == 0 or n + 1 == n_steps:
            stored.append(rho.copy())
            stored_ts.append(t_new)

    values = np.array(stored[::-1])
    ts = np.array(stored_ts[::-1])
    return RiskAversionSurface(
        grid, ts, zs, values, gamma,
        params_hash=content_hash({"params": _params_payload(params)}),
        schedule=schedule, rate_riskfree=params.rate_riskfree,
    )


def _rho_step(rho_old, rho_star, front, v_half, dt, dz, gamma, kappa, band, explicit_advection):
    """One implicit step with coefficients frozen at rho_star.

    Row j of the system is  rho_j/dt - (F_{j+1/2} - F_{j-1/2})/dz - s_j drho/dz
    = rho_j^old/dt  with the diffusive and V parts of F implicit.  The left
    boundary replaces the diffusive part of F_{-1/2} by the Robin expression
    D kappa (gamma - rho_0); the right boundary uses the Neumann ghost
    rho_{J+1} = rho_J, which zeroes the outermost diffusive flux and turns the
    advective one into pure outflow.
    """
    nz = rho_old.size
    mid = 0.5 * (rho_star[:-1] + rho_star[1:])
    d_half = np.empty(nz + 1)
    d_half[1:-1] = -front.g_prime(mid)
    d_half[0] = -front.g_prime(rho_star[0])
    d_half[-1] = 0.0  # Neumann ghost: no diffusive flux through z_max
    s = -front.h_prime(rho_star)
    s_pos = np.maximum(s, 0.0)
    s_neg = np.minimum(s, 0.0)

    diag = np.full(nz, 1.0 / dt)
    upper = np.zeros(nz)  # coefficient of rho_{j+1}; upper[-1] unused
    lower = np.zeros(nz)  # coefficient of rho_{j-1}; lower[0] unused
    rhs = rho_old / dt

    # diffusion through interior interfaces (1/2 .. J-1/2)
    diag += (d_half[1:] + d_half[:-1]) / dz ** 2
    upper -= d_half[1:] / dz ** 2
    lower -= d_half[:-1] / dz ** 2
    diag[0] -= d_half[0] / dz ** 2  # Robin replaces the -1/2 interface below

    # V-flux, upwinded with the right-hand state; at j-1/2 that state is rho_j
    if explicit_advection:
        rhs[:-1] += (v_half[1:-1] * rho_old[1:] - v_half[:-2] * rho_old[:-1]) / dz
        rhs[-1] += (v_half[-1] - v_half[-2]) * rho_old[-1] / dz
    else:
        diag += v_half[:-1] / dz
        upper[:-1] -= v_half[1:-1] / dz
        diag[-1] -= v_half[-1] / dz  # ghost outflow at z_max

    # h-term, velocity form with sign-based upwinding
    diag += (s_pos - s_neg) / dz
    upper -= s_pos / dz
    lower += s_neg / dz
    diag[-1] -= s_pos[-1] / dz  # forward difference vanishes via the ghost
    # Robin derivative at z_min, coefficient frozen at rho_star:
    # d rho/dz = kappa_eff * rho with kappa_eff = kappa (1 - rho_star/gamma) >= 0
    kappa_eff = kappa * max(0.0, 1.0 - rho_star[0] / gamma)
    if s_neg[0] < 0.0:
        # backward difference at z_min from the Robin derivative
        diag[0] += s_neg[0] / dz - s_neg[0] * kappa_eff

    # Robin diffusive flux at the -1/2 interface: +[D kappa_eff rho_0]/dz
    diag[0] += d_half[0] * kappa_eff / dz

    band[0, 1:] = upper[:-1]
    band[1, :] = diag
    band[2, :-1] = lower[1:]
    return solve_banded((1, 1), band, rhs)


def _params_payload(params: MarketParams) -> dict:
    return {
        "rate_riskfree": params.rate_riskfree,
        "drifts": params.drifts.tolist(),
        "covariance": params.covariance.tolist(),
    }


# -- value transport -----------------------------------------------------------

def solve_value_u(
    rho: RiskAversionSurface,
    params: MarketParams,
    schedule: ContributionSchedule,
    gamma: float,
    grid: GridSpec | None = None,
    *,
    frontier: MeanVarFrontier | None = None,
) -> ValueSurface:
    """Transport the terminal value backward along characteristics.

    Semi-Lagrangian march in the certainty-equivalent scale w = U^{-1}(u):
    w is constant along dx/dt = y + (r + g(rho)) x and the per-step foot is
    computed by the exact constant-coefficient update of that linear ODE
    (a Heun refinement makes it second order in dt).  Feet that overshoot
    z_max by more than one advective step raise CharacteristicExitsDomain.
    """
    if grid is None:
        grid = rho.grid
    if abs(grid.dz - rho.grid.dz) > 1e-15 or abs(grid.z_min - rho.grid.z_min) > 1e-12:
        raise IncompatibleGrid("value grid must match the risk-aversion grid in z")
    if abs(gamma - rho.gamma) > 1e-12:
        raise IncompatibleGrid("gamma differs from the risk-aversion surface")
    front = frontier if frontier is not None else MeanVarFrontier.build(params)
    zs = grid.zs
    xs = np.exp(zs)
    dt = grid.dt
    r = params.rate_riskfree
    n_steps = grid.n_steps
    every = grid.store_every()

    w = xs.copy()  # w(T, z) = e^z
    stored_w = [w.copy()]
    stored_ts = [grid.t_max]
    z_span_tol = (r + float(front.g(1e-8))) * dt + grid.dz

    for n in range(n_steps):
        t_hi = grid.t_max - n * dt
        t_lo = t_hi - dt
        y = schedule.rate(max(t_lo, 0.0))
        # foot of the characteristic leaving (t_lo, z_j), landing at t_hi
        a1 = r + front.g(rho.row_at(t_lo))
        x1 = _grow(xs, a1, y, dt)
        a2 = r + front.g(rho.interp(t_hi, np.minimum(np.log(x1), grid.z_max)))
        x_foot = _grow(xs, 0.5 * (a1 + a2), y, dt)
        z_foot = np.log(x_foot)
        if np.any(z_foot > grid.z_max + z_span_tol):
            raise CharacteristicExitsDomain(
                f"characteristic foot reached z={z_foot.max():.3f} > z_max={grid.z_max}; "
                "extend the domain upward"
            )
        spline = CubicSpline(zs, np.log(w), extrapolate=True)
        w = np.exp(spline(z_foot))
        if (n + 1) % every == 0 or n + 1 == n_steps:
            stored_w.append(w.copy())
            stored_ts.append(t_lo)

    w_values = np.array(stored_w[::-1])
    ts = np.array(stored_ts[::-1])
    u_values = utility(w_values, gamma)
    return ValueSurface(
        grid, ts, zs, u_values, w_values, gamma, params_hash=rho.params_hash,
    )


def _grow(x, a, y, dt):
    """Exact step of dx/dt = a x + y for constant coefficients."""
    growth = np.exp(a * dt)
    with np.errstate(invalid="ignore", divide="ignore"):
        annuity = np.where(np.abs(a) > 1e-14, (growth - 1.0) / np.where(a == 0.0, 1.0, a), dt)
    return x * growth + y * annuity


def transport_consistency_residual(
    u: ValueSurface, rho: RiskAversionSurface, t: float = 0.0,
    z_band=(-6.0, 4.0),
) -> float:
    """Max |(1 - u_zz/u_z) - rho| over interior nodes of a z band.

    Central differences of the stored u slice; the residual shrinks under
    grid refinement wherever both surfaces are smooth.
    """
    zs = u.zs
    mask = (zs >= z_band[0]) & (zs <= z_band[1])
    row = u.row_at(t)
    dz = u.grid.dz
    u_z = (row[2:] - row[:-2]) / (2.0 * dz)
    u_zz = (row[2:] - 2.0 * row[1:-1] + row[:-2]) / dz ** 2
    implied = 1.0 - u_zz / u_z
    rho_row = rho.row_at(t)[1:-1]
    inner = mask[1:-1]
    return float(np.abs(implied[inner] - rho_row[inner]).max())


def value_at_zero_extrapolation(surface: ValueSurface, xs) -> float:
    """OLS regression of v(0, x) on x over small wealths; returns the intercept."""
    xs = np.asarray(xs, dtype=float)
    if xs.size < 2:
        raise InsufficientPoints("need at least two wealth points to extrapolate")
    values = surface.value_at(0.0, xs)
    design = np.column_stack([np.ones_like(xs), xs])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    return float(coef[0])


DEFAULT_PROBE_WEALTHS = np.exp(np.arange(-10.0, -4.0))  # e^-10 .. e^-5


def characteristic_terminal_wealth(
    rho: RiskAversionSurface,
    params: MarketParams,
    schedule: ContributionSchedule,
    x0: float,
    t0: float = 0.0,
    *,
    substeps: int = 1,
    frontier: MeanVarFrontier | None = None,
) -> float:
    """Terminal wealth of the single characteristic leaving (t0, x0).

    Integrates dx/dt = y + (r + g(rho(t, ln x))) x with Heun steps on the
    risk-aversion grid (optionally refined).  This is the pointwise form of
    the value transport: v(t0, x0) = U(x_T).  Raises
    CharacteristicExitsDomain if the path leaves the grid before the horizon.
    """
    front = frontier if frontier is not None else MeanVarFrontier.build(params)
    grid = rho.grid
    r = params.rate_riskfree
    n = max(1, round((grid.t_max - t0) / grid.dt)) * substeps
    dt = (grid.t_max - t0) / n
    x = float(x0)
    for k in range(n):
        t = t0 + k * dt
        y = schedule.rate(t)
        a1 = r + float(front.g(rho.interp(t, max(np.log(x), grid.z_min))))
        x1 = float(_grow(np.asarray(x), a1, y, dt))
        if np.log(x1) > grid.z_max:
            raise CharacteristicExitsDomain(
                f"characteristic from x0={x0} left the grid at t={t + dt:.3f}"
            )
        a2 = r + float(front.g(rho.interp(t + dt, np.log(x1))))
        x = float(_grow(np.asarray(x), 0.5 * (a1 + a2), y, dt))
    return x


# -- policy extraction ----------------------------------------------------------

def indirect_risk_aversion(rho: RiskAversionSurface, t: float, wealth) -> float:
    """R(t, x) = rho(t, ln x) by bilinear interpolation."""
    wealth_arr = np.asarray(wealth, dtype=float)
    if np.any(wealth_arr <= 0.0):
        raise ValueError("wealth must be positive")
    return rho.interp(t, np.log(wealth_arr))


def samuelson_risk_aversion(
    rho: RiskAversionSurface, t: float, wealth, schedule: ContributionSchedule,
    rate_riskfree: float,
) -> float:
    """Rbar(t, .) tabulated against accumulated savings: rho / capital ratio."""
    pv = present_value(t, schedule, rate_riskfree)
    wealth_arr = np.asarray(wealth, dtype=float)
    out = indirect_risk_aversion(rho, t, wealth_arr) * (wealth_arr + pv) / wealth_arr
    return float(out) if np.ndim(out) == 0 else out


def optimal_policy(rho: RiskAversionSurface, t: float, wealth: float,
                   params: MarketParams) -> Allocation:
    """pi*(t, x) = pihat(1, R(t, x))."""
    return solve_cqp(1.0, float(indirect_risk_aversion(rho, t, wealth)), params)


def optimal_policy_samuelson(
    rho: RiskAversionSurface, t: float, lifetime_wealth: float,
    params: MarketParams, schedule: ContributionSchedule,
) -> Allocation:
    """pibar*(t, xbar) = pihat(1 - PV/xbar, Rbar(t, xbar))."""
    pv = present_value(t, schedule, params.rate_riskfree)
    wealth = lifetime_wealth - pv
    if wealth <= 0.0:
        raise WealthBelowPV(
            f"lifetime wealth {lifetime_wealth} does not exceed PV_t={pv}"
        )
    alpha = 1.0 - pv / lifetime_wealth
    r_bar = float(indirect_risk_aversion(rho, t, wealth)) / alpha
    return solve_cqp(alpha, r_bar, params)


# -- serialization and caching ---------------------------------------------------

FORMAT_VERSION = 1


def save_surface(surface, path) -> None:
    """Columnar on-disk format: JSON header plus row-major value arrays."""
    kind = "rho" if isinstance(surface, RiskAversionSurface) else "value"
    header = {
        "schema_version": FORMAT_VERSION,
        "kind": kind,
        "gamma": surface.gamma,
        "params_hash": surface.params_hash,
        "grid": {
            "t_max": surface.grid.t_max, "z_min": surface.grid.z_min,
            "z_max": surface.grid.z_max, "dt": surface.grid.dt, "dz": surface.grid.dz,
        },
    }
    arrays = {"ts": surface.ts, "zs": surface.zs, "values": surface.values}
    if kind == "value":
        arrays["w_values"] = surface.w.values
    else:
        header["rate_riskfree"] = surface.rate_riskfree
        arrays["schedule_breakpoints"] = surface.schedule.breakpoints
        arrays["schedule_rates"] = surface.schedule.rates
    np.savez_compressed(path, header=json.dumps(header, sort_keys=True), **arrays)


def load_surface(path):
    with np.load(path, allow_pickle=False) as blob:
        header = json.loads(str(blob["header"]))
        if header["schema_version"] != FORMAT_VERSION:
            raise IncompatibleGrid(f"unsupported surface format {header['schema_version']}")
        grid = GridSpec(**header["grid"])
        args = (grid, blob["ts"], blob["zs"], blob["values"].copy())
        if header["kind"] == "rho":
            schedule = ContributionSchedule(
                breakpoints=blob["schedule_breakpoints"], rates=blob["schedule_rates"])
            return RiskAversionSurface(*args, gamma=header["gamma"],
                                       params_hash=header["params_hash"],
                                       schedule=schedule,
                                       rate_riskfree=header["rate_riskfree"])
        return ValueSurface(*args, w_values=blob["w_values"].copy(),
                            gamma=header["gamma"], params_hash=header["params_hash"])


def surface_cache_key(params: MarketParams, schedule: ContributionSchedule,
                      gamma: float, grid: GridSpec, robin_kappa: float = 1.0) -> str:
    """Content hash of everything the rho march depends on."""
    return content_hash({
        "params": _params_payload(params),
        "schedule": {"breakpoints": schedule.breakpoints.tolist(),
                     "rates": schedule.rates.tolist()},
        "gamma": gamma,
        "grid": [grid.t_max, grid.z_min, grid.z_max, grid.dt, grid.dz],
        "robin_kappa": robin_kappa,
    })
