"""Command-line entry points.

Exit codes: 0 success, 2 configuration problems, 3 domain errors (bad
query values), 4 solver failures.
"""

from __future__ import annotations

import json
import os
import pathlib
import sys

import click

from . import api_core, presets
from .config import load_market_config
from .errors import (
    AllCellsFailed,
    CFLViolation,
    CharacteristicExitsDomain,
    ConfigError,
    GlidepathError,
    InvariantViolated,
    NonConvergence,
)
from .hjb import solve_rho, save_surface, surface_cache_key

from .sweep import SweepGrid, run_sweep
from .welfare import StrategySpec, compare_strategies

EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_SOLVER = 4

_SOLVER_ERRORS = (NonConvergence, InvariantViolated, CFLViolation,
                  CharacteristicExitsDomain, AllCellsFailed)


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_inputs(config_path, preset):
    try:
        if config_path is not None:
            return load_market_config(config_path)
        return presets.load_preset(preset)
    except (ConfigError, KeyError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))


def _cache_dir(option_value) -> pathlib.Path:
    path = option_value or os.environ.get("GLIDEPATH_CACHE_DIR") or \
        pathlib.Path.home() / ".cache" / "glidepath"
    path = pathlib.Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _surface_path(cache_dir, params, schedule, gamma, grid, kappa=1.0):
    key = surface_cache_key(params, schedule, gamma, grid, kappa)
    return pathlib.Path(cache_dir) / f"rho-{key[:16]}.npz"


@click.group()
def main():
    """Pension glide-path engine."""


@main.command("allocate")
@click.option("--strategy", type=click.Choice(api_core.ALLOCATION_STRATEGIES), default="pi3")
@click.option("--gamma", type=float, required=True)
@click.option("--alpha", type=float, default=None, help="Capital ratio in [0, 1].")
@click.option("--wealth", type=float, default=None)
@click.option("--time", "time_", type=float, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--preset", default=presets.BASELINE, show_default=True)
@click.option("--fidelity", type=click.Choice(presets.FIDELITIES), default="desk")
@click.option("--cache-dir", default=None, help="Surface cache (env GLIDEPATH_CACHE_DIR).")
@click.option("--format", "fmt", type=click.Choice(["table", "json"]), default="table")
def cmd_allocate(strategy, gamma, alpha, wealth, time_, config_path, preset,
                 fidelity, cache_dir, fmt):
    """Print the allocation of one strategy at a point."""
    params, schedule = _load_inputs(config_path, preset)
    surface = None
    if strategy == "optimal":
        path = _surface_path(_cache_dir(cache_dir), params, schedule, gamma,
                             presets.grid_for(fidelity, schedule.horizon))
        if not path.exists():
            _fail(EXIT_DOMAIN, f"no cached surface at {path}; run 'glidepath solve-hjb' first")
        from .hjb import load_surface

        surface = load_surface(path)
    try:
        response = api_core.allocation_response(
            params, schedule, strategy=strategy, gamma=gamma, alpha=alpha,
            time=time_, wealth=wealth, surface=surface)
    except _SOLVER_ERRORS as exc:
        _fail(EXIT_SOLVER, str(exc))
    except (GlidepathError, ValueError) as exc:
        _fail(EXIT_DOMAIN, str(exc))
    if fmt == "json":
        click.echo(json.dumps(response, indent=2, sort_keys=True))
    else:
        click.echo(f"strategy {response['strategy']}  gamma {response['gamma']}"
                   + (f"  alpha {response['alpha']}" if response["alpha"] is not None else ""))
        for i, w in enumerate(response["weights"]):
            click.echo(f"  asset {i}: {w:10.6f}")
        click.echo(f"  total {response['total']:.6f}  effective risk aversion "
                   f"{response['effective_risk_aversion']:.6f}")
        if response["binding"]:
            click.echo("  binding: " + ", ".join(response["binding"]))


@main.command("solve-hjb")
@click.option("--gamma", type=float, required=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--preset", default=presets.BASELINE, show_default=True)
@click.option("--fidelity", type=click.Choice(presets.FIDELITIES), default="desk")
@click.option("--kappa", type=float, default=1.0, help="Left Robin coefficient.")
@click.option("--cache-dir", default=None)
def cmd_solve_hjb(gamma, config_path, preset, fidelity, kappa, cache_dir):
    """Solve the risk-aversion PDE, cache the surface, print probe policies."""
    params, schedule = _load_inputs(config_path, preset)
    try:
        grid = presets.grid_for(fidelity, schedule.horizon)
        if gamma <= 0.0:
            raise ValueError("gamma must be positive")
    except ValueError as exc:
        _fail(EXIT_CONFIG, str(exc))
    try:
        surface = solve_rho(params, schedule, gamma, grid, robin_kappa=kappa)
    except _SOLVER_ERRORS as exc:
        _fail(EXIT_SOLVER, str(exc))
    path = _surface_path(_cache_dir(cache_dir), params, schedule, gamma, grid, kappa)
    save_surface(surface, path)
    table = api_core.policy_probe_table(params, schedule, surface)
    click.echo(f"cached surface: {path}")
    click.echo("wealth \\ t  " + "  ".join(f"{t:>14}" for t in table["times"]))
    for row in table["rows"]:
        cells = "  ".join(f"({c[0]:.3f},{c[1]:.3f})" for c in row["weights"])
        click.echo(f"{row['wealth']:>10}  {cells}")


@main.command("welfare")
@click.option("--gammas", default="2,5,8", show_default=True)
@click.option("--strategies", default="pi0,pi1,pi2,pi3,optimal", show_default=True)
@click.option("--method", type=click.Choice(["pde", "mc", "both"]), default="pde")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--preset", default=presets.BASELINE, show_default=True)
@click.option("--fidelity", type=click.Choice(presets.FIDELITIES), default="desk")
@click.option("--mc-paths", type=int, default=10 ** 6, show_default=True)
@click.option("--mc-dt", type=float, default=1.0 / 250.0)
@click.option("--seed", type=int, default=20250810)
@click.option("--out", "out_path", type=click.Path(), default=None)
def cmd_welfare(gammas, strategies, method, config_path, preset, fidelity,
                mc_paths, mc_dt, seed, out_path):
    """Certainty equivalents and IRRs per strategy, as CSV."""
    params, schedule = _load_inputs(config_path, preset)
    try:
        gamma_list = [float(g) for g in gammas.split(",") if g]
        kinds = [s.strip() for s in strategies.split(",") if s.strip()]
        grid = presets.grid_for(fidelity, schedule.horizon)
    except ValueError as exc:
        _fail(EXIT_CONFIG, str(exc))
    csv_parts = []
    try:
        for gamma in gamma_list:
            specs = []
            for kind in kinds:
                if kind == "optimal":
                    surface = solve_rho(params, schedule, gamma, grid)
                    specs.append(StrategySpec("optimal", gamma, surface=surface))
                else:
                    specs.append(StrategySpec(kind, gamma))
            report = compare_strategies(specs, params, schedule, method, grid=grid,
                                        mc_paths=mc_paths, mc_dt=mc_dt, mc_seed=seed)
            csv_parts.append(report.to_csv())
    except _SOLVER_ERRORS as exc:
        _fail(EXIT_SOLVER, str(exc))
    except (GlidepathError, ValueError) as exc:
        _fail(EXIT_DOMAIN, str(exc))
    header, *rest = csv_parts[0].splitlines()
    body = [header] + [line for part in csv_parts for line in part.splitlines()[1:]]
    text = "\n".join(body) + "\n"
    if out_path:
        pathlib.Path(out_path).write_text(text)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text, nl=False)


@main.command("sweep")
@click.option("--grid", "grid_name", type=click.Choice(["desk-acceptance", "paper-full"]),
              default="desk-acceptance", show_default=True)
@click.option("--fidelity", type=click.Choice(presets.FIDELITIES), default="desk")
@click.option("--workers", type=int, default=None)
@click.option("--out-dir", type=click.Path(), required=True)
def cmd_sweep(grid_name, fidelity, workers, out_dir):
    """Run the robustness sweep and write cells.csv / aggregate.csv / manifest.json."""
    grid = SweepGrid.desk_acceptance() if grid_name == "desk-acceptance" \
        else SweepGrid.paper_full()
    try:
        result = run_sweep(grid, fidelity=fidelity, workers=workers, out_dir=out_dir)
    except _SOLVER_ERRORS as exc:
        _fail(EXIT_SOLVER, str(exc))
    agg = result.aggregate()
    for gamma in result.grid.gammas:
        line = "  ".join(
            f"{s}: avg {agg[gamma][s][0]:.4%} max {agg[gamma][s][1]:.4%}"
            for s in ("pi0", "pi1", "pi2", "pi3"))
        click.echo(f"gamma={gamma}: {line}")
    if result.failed:
        click.echo(f"{len(result.failed)} cell-gamma units failed; see cells.csv footer",
                   err=True)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--preset", default=presets.BASELINE, show_default=True)
@click.option("--cache-dir", default=None)
def cmd_serve(host, port, config_path, preset, cache_dir):
    """Run the HTTP/JSON service."""
    import uvicorn

    from .service import create_app

    params, schedule = _load_inputs(config_path, preset)
    app = create_app(params, schedule, cache_dir=_cache_dir(cache_dir))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
