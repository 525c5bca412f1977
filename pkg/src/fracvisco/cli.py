"""Command-line driver: ``fracvisco run | verify | converge``.

Exit codes: 0 success, 1 failed checks or other errors, 2 configuration
errors, 3 hypothesis or data violations, 4 solver non-convergence or
divergence.
"""

from __future__ import annotations

import contextlib
import functools
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import fracops
from .assembly import assemble
from .config import RunConfig, load_config
from .csvio import format_value, write_csv, write_text
from .diagnostics import apriori_check, energy_report, weak_residual
from .errors import FracViscoError
from .manufactured import ManufacturedProblem
from .verify import SUITES, run_suite, thread_count, write_report
from .volterra import solve

__all__ = ["main", "run_simulation", "convergence_study", "ConvergenceRow"]


def _fail(exc: FracViscoError):
    click.echo(f"error [{exc.category}]: {exc}", err=True)
    sys.exit(exc.exit_code)


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FracViscoError as exc:
            _fail(exc)

    return wrapper


def _summary_text(items: dict) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in items.items())


def run_simulation(cfg: RunConfig, out_dir: Path, seed: int = 0) -> dict:
    """Assemble, solve and post-process one configuration; returns the summary."""
    spec = cfg.spec()
    basis = cfg.basis()
    tgrid = cfg.time_grid()
    system = assemble(spec, basis, tgrid, enforce=cfg.problem["enforce_hypotheses"])
    history = solve(system, config=cfg.solver_config())
    energy = energy_report(history, system)
    weak = weak_residual(history, system, test_modes=min(5, system.m))
    zero_data = not (np.any(system.F) or np.any(system.c) or np.any(system.d0))
    apriori = None if zero_data else apriori_check(history, system)

    scale = max(float(np.max(np.abs(energy.total))), float(np.max(np.abs(energy.dissipation))), 1e-300)
    increments = np.diff(energy.dissipation)
    sqrt_rho_u = math.sqrt(max(float(np.max(np.einsum("ij,ik,kj->j", history.coeffs, system.M, history.coeffs))), 0))
    summary = {
        "alpha": spec.alpha,
        "basis": basis.kind,
        "m": basis.m,
        "n_cells": basis.grid.n_cells,
        "n_steps": tgrid.n_steps,
        "scheme": cfg.solver["scheme"],
        "seed": seed,
        "hypotheses": " ".join(f"{c.name}:{'pass' if c.passed else 'fail'}" for c in system.hypotheses.checks),
        "max_total_energy": float(np.max(energy.total)),
        "final_total_energy": float(energy.total[-1]),
        "final_work": float(energy.work[-1]),
        "final_dissipation": float(energy.dissipation[-1]),
        "final_balance_residual": float(energy.balance_residual[-1]),
        "max_abs_balance_residual": float(np.max(np.abs(energy.balance_residual))),
        "min_dissipation": float(np.min(energy.dissipation)),
        "dissipation_nonnegative": bool(np.min(energy.dissipation) >= -1e-12 * scale),
        "min_dissipation_increment": float(np.min(increments)),
        "dissipation_nondecreasing": bool(np.min(increments) >= -1e-12 * scale),
        "weak_residual": weak,
        "apriori_ratio": apriori.ratio if apriori is not None else "n/a",
        "max_sqrt_rho_u": sqrt_rho_u,
        "uniqueness_probe": ("pass" if sqrt_rho_u <= 1e-12 else "fail") if zero_data else "n/a",
    }

    reports = set(cfg.output["reports"])
    out_dir.mkdir(parents=True, exist_ok=True)
    if "solution" in reports:
        history.to_csv(out_dir / "solution.csv")
    if "energy" in reports:
        energy.to_csv(out_dir / "energy.csv")
    if "apriori" in reports and apriori is not None:
        apriori.to_csv(out_dir / "apriori.csv")
    if "matrices" in reports:
        system.export_csv(out_dir / "matrices")
    if "summary" in reports:
        write_text(out_dir / "summary.txt", _summary_text(summary))
    return summary


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    h: float
    dt: float
    l2_error: float
    l2_order: float
    balance_residual: float
    balance_order: float
    weak_residual: float
    weak_order: float


def _level_sizes(cfg: RunConfig, study: str, level: int) -> tuple[int, int, int]:
    d = cfg.discretization
    time_factor = 2**level if study in ("temporal", "space_time") else 1
    space_factor = 2**level if study in ("spatial", "space_time") else 1
    n_cells = d["n_cells"] * space_factor
    m = n_cells - 1 if d["basis"] == "p1_fem" else d["m"] * space_factor
    return d["n_steps"] * time_factor, n_cells, m


def _solve_level(cfg: RunConfig, study: str, level: int):
    p = cfg.problem
    mp = ManufacturedProblem(p["length"], p["horizon"], p["alpha"], cfg.material())
    n_steps, n_cells, m = _level_sizes(cfg, study, level)
    basis = cfg.basis(n_cells=n_cells, m=m)
    system = assemble(mp.spec(), basis, cfg.time_grid(n_steps), enforce=p["enforce_hypotheses"])
    history = solve(system, config=cfg.solver_config())
    err = float(np.max(mp.l2_errors(history, basis)))
    balance = abs(float(energy_report(history, system).balance_residual[-1]))
    weak = weak_residual(history, system, test_modes=min(5, system.m))
    return basis.grid.h, system.tgrid.dt, err, balance, weak


def _order(prev: float | None, cur: float) -> float:
    if prev is None or prev <= 0 or cur <= 0:
        return float("nan")
    return math.log2(prev / cur)


def convergence_study(cfg: RunConfig, levels: int, study: str | None = None) -> list[ConvergenceRow]:
    """Manufactured-solution refinement study over dyadic levels."""
    study = study or cfg.converge["study"]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(lambda lvl: _solve_level(cfg, study, lvl), range(levels)))
    rows = []
    prev = None
    for lvl, (h, dt, err, bal, weak) in enumerate(results):
        rows.append(
            ConvergenceRow(
                lvl, h, dt, err, _order(prev and prev[0], err), bal, _order(prev and prev[1], bal),
                weak, _order(prev and prev[2], weak),
            )
        )
        prev = (err, bal, weak)
    return rows


@contextlib.contextmanager
def _maybe_fault(factor):
    if factor is None:
        yield
    else:
        with fracops.inject_gamma_fault(factor):
            yield


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Fractional Kelvin-Voigt solver and identity checks."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="TOML run configuration.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--seed", type=int, default=0, show_default=True, help="Recorded for reproducibility.")
@_handle_errors
def run(config_path, out_dir, seed):
    """Assemble, solve and write solution, energy and summary files."""
    cfg = load_config(config_path)
    out = Path(out_dir or cfg.output["directory"])
    summary = run_simulation(cfg, out, seed)
    click.echo(_summary_text(summary), nl=False)


@main.command()
@click.option("--suite", type=click.Choice(SUITES), default="all", show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for random test trajectories.")
@click.option("--inject-gamma-fault", "fault", type=float, default=None, hidden=True)
@_handle_errors
def verify(suite, out_dir, seed, fault):
    """Run identity suites; exit 0 iff every check passes."""
    with _maybe_fault(fault):
        rows = run_suite(suite, seed)
    path = write_report(Path(out_dir) / f"verify_{suite}.csv", rows)
    failed = [r for r in rows if not r.passed]
    for r in rows:
        click.echo(f"{'PASS' if r.passed else 'FAIL'}  {r.suite:9s} {r.check}: {r.value:.3e} {r.relation} {r.tolerance:g}")
    click.echo(f"{len(rows) - len(failed)}/{len(rows)} checks passed; report {path}")
    if failed:
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--levels", type=click.IntRange(min=3), default=None, help="Number of dyadic levels (>= 3).")
@click.option("--study", type=click.Choice(("temporal", "spatial", "space_time")), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@_handle_errors
def converge(config_path, levels, study, out_dir):
    """Manufactured-solution convergence table."""
    cfg = load_config(config_path)
    levels = levels or cfg.converge["levels"]
    rows = convergence_study(cfg, levels, study)
    out = Path(out_dir or cfg.output["directory"])
    header = list(ConvergenceRow.__dataclass_fields__)
    write_csv(out / "convergence.csv", header, [[getattr(r, k) for k in header] for r in rows])
    click.echo(f"{'level':>5} {'h':>10} {'dt':>10} {'l2_error':>12} {'order':>7} {'balance':>12} {'order':>7}")
    for r in rows:
        click.echo(
            f"{r.level:5d} {r.h:10.4g} {r.dt:10.4g} {r.l2_error:12.4e} {r.l2_order:7.3f} "
            f"{r.balance_residual:12.4e} {r.balance_order:7.3f}"
        )


if __name__ == "__main__":
    main()
