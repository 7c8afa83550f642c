"""Robustness sweep: welfare gaps of the explicit strategies over a parameter grid.

Each cell is one market parametrization; for every requested risk aversion
the cell solves the risk-aversion PDE, values pi0..pi3 and the optimal
policy with the same parabolic discretization (so discretization error
largely cancels in the gaps), and records relative certainty-equivalent
gaps (CE* - CE_i) / CE*.  Cells run in a process pool and are collected in
deterministic order; failed cells are recorded, excluded from aggregates,
and listed in the report footer.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import AllCellsFailed
from .market import ContributionSchedule, MarketParams, validate_market
from .sweep_cell import run_cell as _run_cell
from .utils import content_hash, sig12

GAP_STRATEGIES = ("pi0", "pi1", "pi2", "pi3")

CELL_COLUMNS = (
    "mu1", "mu2", "sigma1", "sigma2", "corr", "gamma",
    "ce_pi0", "ce_pi1", "ce_pi2", "ce_pi3", "ce_star",
    "gap_pi0", "gap_pi1", "gap_pi2", "gap_pi3", "status",
)

#: Subfamily where the largest pi3 gaps concentrate on the full grid:
#: strongly negative correlation with high-return, low-volatility bonds.
HARDEST_REGION = {"corr": -0.20, "mu1": 0.03, "sigma1": 0.03}


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian parameter grid; every combination must be a valid market."""

    mu1: tuple
    mu2: tuple
    sigma1: tuple
    sigma2: tuple
    corr: tuple
    gammas: tuple
    rate_riskfree: float = 0.01
    horizon: float = 40.0
    total_contribution: float = 1.0

    def __post_init__(self):
        for cell in self.cells():
            validate_market(self.market(cell))

    @classmethod
    def paper_full(cls, gammas=(1.0, 2.0, 5.0, 8.0)) -> "SweepGrid":
        """The full 3 x 3 x 3 x 3 x 4 grid (324 parametrizations)."""
        return cls(
            mu1=(0.015, 0.02, 0.03),
            mu2=(0.07, 0.10, 0.13),
            sigma1=(0.03, 0.05, 0.07),
            sigma2=(0.20, 0.25, 0.30),
            corr=(-0.20, -0.05, 0.05, 0.20),
            gammas=tuple(gammas),
        )

    @classmethod
    def desk_acceptance(cls) -> "SweepGrid":
        """3 x 3 sub-grid in (mu1, sigma1) including the hardest-region member."""
        return cls(
            mu1=(0.015, 0.02, 0.03),
            mu2=(0.10,),
            sigma1=(0.03, 0.05, 0.07),
            sigma2=(0.25,),
            corr=(-0.20,),
            gammas=(1.0, 2.0, 5.0, 8.0),
        )

    def cells(self):
        """Deterministic lexicographic enumeration of parametrizations."""
        out = []
        for mu1 in self.mu1:
            for mu2 in self.mu2:
                for sigma1 in self.sigma1:
                    for sigma2 in self.sigma2:
                        for corr in self.corr:
                            out.append({"mu1": mu1, "mu2": mu2, "sigma1": sigma1,
                                        "sigma2": sigma2, "corr": corr})
        return out

    def market(self, cell) -> MarketParams:
        return MarketParams.from_volatilities(
            rate_riskfree=self.rate_riskfree,
            drifts=[cell["mu1"], cell["mu2"]],
            volatilities=[cell["sigma1"], cell["sigma2"]],
            correlation=[[1.0, cell["corr"]], [cell["corr"], 1.0]],
        )

    def schedule(self) -> ContributionSchedule:
        return ContributionSchedule.constant(self.horizon, self.total_contribution)

    def config_payload(self) -> dict:
        return {
            "mu1": list(self.mu1), "mu2": list(self.mu2),
            "sigma1": list(self.sigma1), "sigma2": list(self.sigma2),
            "corr": list(self.corr), "gammas": list(self.gammas),
            "rate_riskfree": self.rate_riskfree, "horizon": self.horizon,
            "total_contribution": self.total_contribution,
        }


@dataclass(frozen=True)
class SweepRow:
    cell: dict
    gamma: float
    ces: dict          # strategy -> certainty equivalent, plus "optimal"
    status: str        # "ok" or "failed"
    message: str = ""

    def gap(self, strategy: str) -> float:
        ce_star = self.ces["optimal"]
        return (ce_star - self.ces[strategy]) / ce_star


@dataclass(frozen=True)
class SweepResult:
    grid: SweepGrid
    fidelity: str
    rows: tuple
    config_hash: str

    @property
    def failed(self) -> tuple:
        return tuple(r for r in self.rows if r.status != "ok")

    def aggregate(self) -> dict:
        """{gamma: {strategy: (avg gap, max gap)}} over successful cells."""
        ok = [r for r in self.rows if r.status == "ok"]
        if not ok:
            raise AllCellsFailed("no sweep cell succeeded")
        out = {}
        for gamma in self.grid.gammas:
            rows = [r for r in ok if r.gamma == gamma]
            if not rows:
                continue
            out[gamma] = {}
            for strat in GAP_STRATEGIES:
                gaps = np.array([r.gap(strat) for r in rows])
                out[gamma][strat] = (float(gaps.mean()), float(gaps.max()))
        return out

    def max_gap_row(self, strategy: str = "pi3") -> SweepRow:
        ok = [r for r in self.rows if r.status == "ok"]
        if not ok:
            raise AllCellsFailed("no sweep cell succeeded")
        return max(ok, key=lambda r: r.gap(strategy))

    def hardest_region_holds(self, strategy: str = "pi3") -> bool:
        """True iff the max-gap cell lies in the known hardest subfamily."""
        cell = self.max_gap_row(strategy).cell
        return all(abs(cell[k] - v) < 1e-12 for k, v in HARDEST_REGION.items())

    def to_cell_csv(self) -> str:
        lines = [",".join(CELL_COLUMNS)]
        for row in self.rows:
            fields = [repr(sig12(row.cell[k])) for k in ("mu1", "mu2", "sigma1", "sigma2", "corr")]
            fields.append(repr(sig12(row.gamma)))
            if row.status == "ok":
                fields += [repr(sig12(row.ces[s])) for s in GAP_STRATEGIES]
                fields.append(repr(sig12(row.ces["optimal"])))
                fields += [repr(sig12(row.gap(s))) for s in GAP_STRATEGIES]
            else:
                fields += [""] * 9
            fields.append(row.status)
            lines.append(",".join(fields))
        footer = [f"# failed cells: {len(self.failed)}"]
        footer += [f"# {r.cell} gamma={r.gamma}: {r.message}" for r in self.failed]
        return "\n".join(lines + footer) + "\n"

    def to_aggregate_csv(self) -> str:
        agg = self.aggregate()
        lines = ["gamma,strategy,avg_gap,max_gap"]
        for gamma in self.grid.gammas:
            if gamma not in agg:
                continue
            for strat in GAP_STRATEGIES:
                avg, mx = agg[gamma][strat]
                lines.append(f"{repr(sig12(gamma))},{strat},{repr(sig12(avg))},{repr(sig12(mx))}")
        return "\n".join(lines) + "\n"

    def manifest(self) -> dict:
        return {
            "schema_version": 1,
            "config_hash": self.config_hash,
            "fidelity": self.fidelity,
            "code_version": __version__,
            "n_cells": len(self.grid.cells()),
            "n_gammas": len(self.grid.gammas),
            "n_failed": len(self.failed),
        }


def run_sweep(grid: SweepGrid, fidelity: str = "desk", workers: int | None = None,
              out_dir=None) -> SweepResult:
    """Run every (cell, gamma) welfare comparison; cells run concurrently.

    Results are collected in grid order regardless of completion order.
    ``out_dir`` (optional) receives cells.csv, aggregate.csv and
    manifest.json; the two CSVs are byte-identical across repeated runs with
    the same configuration.
    """
    cells = grid.cells()
    payloads = [
        {
            "cell": cell,
            "gammas": list(grid.gammas),
            "rate_riskfree": grid.rate_riskfree,
            "horizon": grid.horizon,
            "total_contribution": grid.total_contribution,
            "fidelity": fidelity,
        }
        for cell in cells
    ]
    if workers is None:
        workers = min(8, len(cells)) or 1
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell, payloads))
    else:
        outcomes = [_run_cell(p) for p in payloads]

    rows = []
    for cell, outcome in zip(cells, outcomes):
        for entry in outcome:
            rows.append(SweepRow(cell=cell, gamma=entry["gamma"], ces=entry.get("ces", {}),
                                 status=entry["status"], message=entry.get("message", "")))
    result = SweepResult(grid=grid, fidelity=fidelity, rows=tuple(rows),
                         config_hash=content_hash(grid.config_payload()))
    if out_dir is not None:
        import pathlib

        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "cells.csv").write_text(result.to_cell_csv())
        (out / "aggregate.csv").write_text(result.to_aggregate_csv())
        (out / "manifest.json").write_text(
            json.dumps(result.manifest(), sort_keys=True, indent=2) + "\n")
    return result
