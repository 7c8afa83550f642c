"""Constrained mean-variance allocation and the explicit policy family.

Solves, for a risky budget ``alpha`` and risk aversion ``rho``,

    maximize   pi . excess  -  (rho/2) pi Sigma pi'
    over       pi >= 0,  pi . 1 <= alpha

by enumerating active sets (d is small) and solving each equality-constrained
subproblem by the Cholesky block formula.  The unique optimizer is
self-similar, ``pihat(alpha, rho) = alpha * pihat(1, alpha * rho)``, which is
what turns the solution into a glide path in the capital ratio.

The four explicit strategies are

    pi0           tangency weights rescaled by max(sum, gamma)
    pi1           pihat(1, gamma)
    pi2(alpha)    pi1 / max(pi1 . 1, alpha)
    pi3(alpha)    pihat(1, alpha * gamma)

``MeanVarFrontier`` precomputes the finitely many active-set regimes of
``pihat(1, rho)`` so that policies and the objective derivative can be
evaluated exactly on whole arrays of rho (used heavily by the PDE solvers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InfeasibleAlpha
from .market import MarketParams

DUAL_TOL = 1e-10
PRIMAL_TOL = 1e-12
# rho at which pi3's alpha -> 0 limit is evaluated (full-investment vertex).
RHO_FLOOR = 1e-8


@dataclass(frozen=True)
class ActiveSet:
    """Binding constraints at the optimum: indices at zero, budget saturation."""

    at_zero: tuple
    budget: bool

    def __post_init__(self):
        if len(set(self.at_zero)) != len(self.at_zero):
            raise ValueError("at_zero indices must be distinct")

    def labels(self) -> list:
        out = [f"zero:{i}" for i in self.at_zero]
        if self.budget:
            out.append("budget")
        return out


@dataclass(frozen=True, eq=False)
class Allocation:
    """Weight vector in the constraint set {pi >= 0, pi . 1 <= budget_bound}.

    ``active_set`` and the Lagrange multipliers are populated when the
    allocation comes from the QP solver; formula-based policies leave them
    as None.
    """

    weights: np.ndarray
    budget_bound: float
    active_set: ActiveSet | None = None
    multiplier_budget: float | None = None
    multipliers_zero: np.ndarray | None = None

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float)).copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if np.any(w < -1e-12):
            raise ValueError(f"negative weight beyond tolerance: {w}")
        if w.sum() > self.budget_bound + 1e-12:
            raise ValueError(f"weights sum {w.sum()} exceeds budget {self.budget_bound}")

    @property
    def total(self) -> float:
        return float(self.weights.sum())


def unconstrained_weights(params: MarketParams) -> np.ndarray:
    """Unit-risk-aversion tangency weights, the solution of Sigma x = excess."""
    return np.linalg.solve(params.covariance, params.excess_returns)


def min_variance_portfolio(params: MarketParams) -> np.ndarray:
    """Fully invested portfolio with the smallest variance; sums to 1."""
    x = np.linalg.solve(params.covariance, np.ones(params.dim))
    return x / x.sum()


def full_stock_gamma(params: MarketParams) -> float:
    """Risk aversion below which pihat(1, rho) holds a single asset only."""
    return MeanVarFrontier.build(params).rho_full_stock


def _objective(weights: np.ndarray, rho: float, params: MarketParams) -> float:
    return float(weights @ params.excess_returns - 0.5 * rho * weights @ params.covariance @ weights)


def _zero_allocation(alpha: float, d: int) -> Allocation:
    return Allocation(
        weights=np.zeros(d),
        budget_bound=alpha,
        active_set=ActiveSet(at_zero=tuple(range(d)), budget=(alpha == 0.0)),
        multiplier_budget=0.0,
        multipliers_zero=np.zeros(d),
    )


def solve_cqp(alpha: float, rho: float, params: MarketParams) -> Allocation:
    """Unique optimizer pihat(alpha, rho) of the constrained mean-variance program.

    Active sets are enumerated in order of size; each candidate is solved by
    the Cholesky block formula and accepted iff primal and dual feasible
    (dual tolerance 1e-10).  Ties (a zero multiplier) resolve to the smaller
    active set, which is well defined because the optimizer is unique.

    ``rho = +inf`` returns the zero allocation (convention 0 * inf = 0), as
    does ``alpha = 0``.
    """
    if alpha < 0.0:
        raise InfeasibleAlpha(f"alpha={alpha} is negative")
    if not rho > 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    d = params.dim
    if alpha == 0.0 or math.isinf(rho):
        return _zero_allocation(alpha, d)

    excess = params.excess_returns
    cov = params.covariance
    chol = cho_factor(cov, lower=True)
    base = cho_solve(chol, excess) / rho  # unconstrained optimizer

    best: Allocation | None = None
    best_size = d + 2
    for n_zero in range(d + 1):
        if best is not None and best_size <= n_zero:
            break
        for zero_set in combinations(range(d), n_zero):
            for budget in (False, True):
                if budget and n_zero == d:
                    continue  # rows would be linearly dependent
                cand = _solve_candidate(zero_set, budget, alpha, rho, params, chol, base)
                if cand is None:
                    continue
                size = n_zero + int(budget)
                if size < best_size:
                    best, best_size = cand, size
    if best is None:
        # unreachable for PD covariance: the feasible set is compact and the
        # enumeration is exhaustive
        raise RuntimeError("active-set enumeration found no KKT point")
    return best


def _solve_candidate(zero_set, budget, alpha, rho, params, chol, base) -> Allocation | None:
    d = params.dim
    rows = [np.eye(d)[i] for i in zero_set]
    rhs = [0.0] * len(zero_set)
    if budget:
        rows.append(np.ones(d))
        rhs.append(alpha)

    if rows:
        a2 = np.array(rows)
        b2 = np.array(rhs)
        m = cho_solve(chol, a2.T)  # Sigma^{-1} A2'
        gram = a2 @ m
        try:
            w = np.linalg.solve(gram, b2 - a2 @ base)
        except np.linalg.LinAlgError:
            return None
        weights = base + m @ w
        # stationarity gives excess - rho Sigma pi = -rho A2' w, hence
        # nu_i = rho w_i on the zero set and lambda = -rho w_budget
        lam = -rho * w[-1] if budget else 0.0
        nus = rho * w[: len(zero_set)]
    else:
        weights = base.copy()
        lam = 0.0
        nus = np.array([])

    free = [i for i in range(d) if i not in zero_set]
    if any(weights[i] < -PRIMAL_TOL for i in free):
        return None
    if not budget and weights.sum() > alpha + PRIMAL_TOL:
        return None
    if lam < -DUAL_TOL or np.any(nus < -DUAL_TOL):
        return None

    full_nus = np.zeros(d)
    clean = weights.copy()
    for k, i in enumerate(zero_set):
        full_nus[i] = nus[k]
        clean[i] = 0.0
    clean = np.maximum(clean, 0.0)
    if budget:
        # remove round-off drift so the budget row holds exactly
        s = clean.sum()
        if s > 0.0:
            clean *= alpha / s
    return Allocation(
        weights=clean,
        budget_bound=alpha,
        active_set=ActiveSet(at_zero=tuple(zero_set), budget=budget),
        multiplier_budget=max(lam, 0.0),
        multipliers_zero=full_nus,
    )


def kkt_residual(alloc: Allocation, alpha: float, rho: float, params: MarketParams) -> float:
    """Max violation of the KKT system at the returned allocation."""
    w = alloc.weights
    lam = alloc.multiplier_budget or 0.0
    nus = alloc.multipliers_zero if alloc.multipliers_zero is not None else np.zeros(w.size)
    grad = params.excess_returns - rho * params.covariance @ w + nus - lam
    out = float(np.abs(grad).max())
    out = max(out, float(np.abs(nus * w).max(initial=0.0)))
    out = max(out, abs(lam * (w.sum() - alpha)))
    out = max(out, float((-w).max(initial=0.0)))
    out = max(out, w.sum() - alpha)
    out = max(out, -lam, float((-nus).max(initial=0.0)))
    return out


def mv_value(alpha: float, rho: float, params: MarketParams) -> float:
    """Optimal deterministic mean-variance utility f(alpha, rho)."""
    if alpha < 0.0:
        raise InfeasibleAlpha(f"alpha={alpha} is negative")
    if alpha == 0.0 or math.isinf(rho):
        return 0.0
    return _objective(solve_cqp(alpha, rho, params).weights, rho, params)


def g_value(rho: float, params: MarketParams) -> float:
    """g(rho) = f(1, rho), the unit-budget optimal utility."""
    return mv_value(1.0, rho, params)


def g_prime(rho: float, params: MarketParams) -> float:
    """Envelope derivative g'(rho) = -pihat Sigma pihat' / 2; always negative."""
    w = solve_cqp(1.0, rho, params).weights
    return -0.5 * float(w @ params.covariance @ w)


# -- explicit strategies ------------------------------------------------------

def pi0(gamma: float, params: MarketParams) -> Allocation:
    """Tangency mix rescaled to respect the leverage constraint."""
    if not gamma > 0.0:
        raise ValueError("gamma must be positive")
    w = unconstrained_weights(params)
    return Allocation(weights=w / max(w.sum(), gamma), budget_bound=1.0)


def pi1(gamma: float, params: MarketParams) -> Allocation:
    """Fixed-proportions strategy: the constrained optimizer pihat(1, gamma)."""
    if not gamma > 0.0:
        raise ValueError("gamma must be positive")
    return solve_cqp(1.0, gamma, params)


def pi2(alpha: float, gamma: float, params: MarketParams) -> Allocation:
    """pi1 rescaled into cash-in-hand proportions at capital ratio alpha."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    w = pi1(gamma, params).weights
    return Allocation(weights=w / max(w.sum(), alpha), budget_bound=1.0)


def pi3(alpha: float, gamma: float, params: MarketParams) -> Allocation:
    """Near-optimal lifestyling rule pihat(1, alpha * gamma).

    At alpha = 0 the limit allocation is returned (full investment in the
    constrained-optimal risky mix as the effective risk aversion vanishes).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if not gamma > 0.0:
        raise ValueError("gamma must be positive")
    return solve_cqp(1.0, max(alpha * gamma, RHO_FLOOR), params)


# -- exact active-set regimes of pihat(1, .) ----------------------------------

@dataclass(frozen=True, eq=False)
class _Regime:
    """On rho in (lo, hi], pihat(1, rho) = offset + slope / rho."""

    lo: float
    hi: float
    offset: np.ndarray
    slope: np.ndarray
    at_zero: tuple
    budget: bool
    # g(rho) = g0 + g1 / rho + g2 * rho on the regime
    g0: float
    g1: float
    g2: float


class MeanVarFrontier:
    """Piecewise-exact map rho -> pihat(1, rho) with g and g' per regime.

    Built once per market; evaluation is vectorized via searchsorted over the
    regime breakpoints, so PDE solvers can query whole grids cheaply and
    exactly (no interpolation error).
    """

    def __init__(self, params: MarketParams, regimes: list):
        self.params = params
        self.regimes = regimes  # ordered by descending rho
        self._edges = np.array([reg.lo for reg in regimes])  # descending
        self._offsets = np.array([reg.offset for reg in regimes])
        self._slopes = np.array([reg.slope for reg in regimes])
        self._g0 = np.array([reg.g0 for reg in regimes])
        self._g1 = np.array([reg.g1 for reg in regimes])
        self._g2 = np.array([reg.g2 for reg in regimes])

    @classmethod
    def build(cls, params: MarketParams, rho_max: float = 1e8) -> "MeanVarFrontier":
        regimes = []
        probe = rho_max
        hi = math.inf
        for _ in range(4 ** params.dim + 4):
            alloc = solve_cqp(1.0, probe, params)
            reg = cls._regime_from_active_set(alloc.active_set, hi, params)
            regimes.append(reg)
            if reg.lo <= 0.0:
                break
            hi = reg.lo
            probe = reg.lo * (1.0 - 1e-6)
        else:
            raise RuntimeError("regime walk did not terminate")
        return cls(params, regimes)

    @staticmethod
    def _regime_from_active_set(active: ActiveSet, hi: float, params: MarketParams) -> "_Regime":
        d = params.dim
        excess = params.excess_returns
        cov = params.covariance
        free = [i for i in range(d) if i not in active.at_zero]
        offset = np.zeros(d)
        slope = np.zeros(d)
        if free:
            sub = cov[np.ix_(free, free)]
            x = np.linalg.solve(sub, excess[free])
            s = x.sum()
            if active.budget:
                z = np.linalg.solve(sub, np.ones(len(free)))
                zeta = z / z.sum()
                offset[free] = zeta
                slope[free] = x - zeta * s
            else:
                slope[free] = x
        # validity interval: all KKT conditions drop to affine functions of
        # rho or of 1/rho on the regime; find the largest violated root below
        lo = 0.0
        # primal pi_i >= 0 on free coordinates
        for i in free:
            if slope[i] < 0.0 and offset[i] > 0.0:
                lo = max(lo, -slope[i] / offset[i])
        if not active.budget:
            # budget slack sum(slope)/rho <= 1 requires rho >= sum(slope);
            # when the budget binds, lambda = (s - rho)/c stays nonneg downward
            lo = max(lo, float(slope.sum()))
        # dual feasibility on the zero set: nu_i(rho) = p_i + q_i rho
        if active.at_zero:
            sig_off = cov @ offset
            sig_slo = cov @ slope
            if active.budget:
                sub = cov[np.ix_(free, free)]
                s_f = float(np.linalg.solve(sub, excess[free]).sum()) if free else 0.0
                c_f = float(np.linalg.solve(sub, np.ones(len(free))).sum()) if free else 1.0
                lam_p, lam_q = s_f / c_f, -1.0 / c_f  # lambda = lam_p + lam_q rho
            else:
                lam_p, lam_q = 0.0, 0.0
            for i in active.at_zero:
                p = lam_p - excess[i] + sig_slo[i]
                q = lam_q + sig_off[i]
                # nu_i = p + q rho, nonneg on the regime; crosses at -p/q
                if q > 0.0:
                    root = -p / q
                    if root > 0.0:
                        lo = max(lo, root)
        g0 = float(offset @ excess - offset @ cov @ slope)
        g1 = float(slope @ excess - 0.5 * slope @ cov @ slope)
        g2 = float(-0.5 * offset @ cov @ offset)
        return _Regime(lo=lo, hi=hi, offset=offset, slope=slope,
                       at_zero=active.at_zero, budget=active.budget,
                       g0=g0, g1=g1, g2=g2)

    def _index(self, rho: np.ndarray) -> np.ndarray:
        # edges are descending regime lower bounds; regime k covers (lo_k, hi_k]
        idx = np.searchsorted(-self._edges, -np.asarray(rho), side="left")
        return np.clip(idx, 0, len(self.regimes) - 1)

    def pi_hat_unit(self, rho) -> np.ndarray:
        """pihat(1, rho) for scalar or array rho; shape (..., d)."""
        rho_arr = np.asarray(rho, dtype=float)
        idx = self._index(rho_arr)
        out = self._offsets[idx] + self._slopes[idx] / rho_arr[..., None]
        return out

    def g(self, rho) -> np.ndarray:
        rho_arr = np.asarray(rho, dtype=float)
        idx = self._index(rho_arr)
        return self._g0[idx] + self._g1[idx] / rho_arr + self._g2[idx] * rho_arr

    def g_prime(self, rho) -> np.ndarray:
        rho_arr = np.asarray(rho, dtype=float)
        idx = self._index(rho_arr)
        return -self._g1[idx] / rho_arr ** 2 + self._g2[idx]

    def h(self, rho) -> np.ndarray:
        """(1 - rho) g(rho), the nonlinear flux in the risk-aversion PDE."""
        rho_arr = np.asarray(rho, dtype=float)
        return (1.0 - rho_arr) * self.g(rho_arr)

    def h_prime(self, rho) -> np.ndarray:
        rho_arr = np.asarray(rho, dtype=float)
        return -self.g(rho_arr) + (1.0 - rho_arr) * self.g_prime(rho_arr)

    @property
    def rho_budget_bind(self) -> float:
        """Largest rho at which the budget constraint binds (sum of tangency weights)."""
        for reg in self.regimes:
            if reg.budget:
                return reg.hi
        return 0.0

    @property
    def rho_full_stock(self) -> float:
        """Largest rho at which a single asset is held; 0 if no such regime."""
        bottom = self.regimes[-1]
        if bottom.budget and len(bottom.at_zero) == self.params.dim - 1:
            return bottom.hi
        return 0.0
