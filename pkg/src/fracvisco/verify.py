"""Identity-verification suites run by ``fracvisco verify``.

Every check yields one :class:`CheckResult` row with the measured value,
the tolerance it is compared against, and the verdict. Resolutions are
fixed so that reports are reproducible.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fracops as fo
from . import fracspace as fs
from .assembly import GalerkinSystem, MaterialModel, ProblemSpec, SpaceGrid, assemble, build_basis
from .csvio import write_csv
from .diagnostics import (
    accumulated_dissipation,
    dissipation_scale,
    energy_report,
    uniqueness_probe,
    weak_residual,
)
from .manufactured import ManufacturedProblem
from .volterra import solve

__all__ = ["CheckResult", "SUITES", "run_suite", "write_report", "bump", "thread_count"]

SUITES = ("operators", "spectral", "energy", "all")
ROUNDOFF = 1e-13
RATE = 1.8


def bump(t, center: float = 0.5, width: float = 0.3):
    """Smooth bump ``exp(-1/(1-s^2))`` with ``s = (t-center)/width``, zero outside."""
    t = np.asarray(t, dtype=float)
    s = (t - center) / width
    out = np.zeros_like(t)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


TEST_FUNCTIONS: dict[str, Callable] = {
    "one": lambda t: np.ones_like(t),
    "t2": lambda t: t**2,
    "t3": lambda t: t**3,
    "cos": np.cos,
    "bump": lambda t: bump(t, 0.5, 0.3),
    "bump_wide": lambda t: bump(t, 0.5, 0.45),
    "bump_skew": lambda t: bump(t, 0.35, 0.25) * (1 + t),
}


def series(name: str, n_steps: int) -> fo.TimeSeries:
    return fo.TimeSeries.from_function(fo.TimeGrid(0.0, 1.0, n_steps), TEST_FUNCTIONS[name])


@dataclass(frozen=True)
class CheckResult:
    suite: str
    check: str
    value: float
    tolerance: float
    passed: bool
    relation: str = "<="

    def row(self):
        return [self.suite, self.check, self.value, self.relation, self.tolerance, self.passed]


def _upper(suite, name, value, tol):
    return CheckResult(suite, name, float(value), tol, bool(value <= tol), "<=")


def _lower(suite, name, value, tol):
    return CheckResult(suite, name, float(value), tol, bool(value >= tol), ">=")


def _rate(suite, name, coarse, fine):
    """Reduction factor per doubling; residuals already at roundoff count as converged."""
    if fine <= ROUNDOFF:
        return CheckResult(suite, name + " rate", float("inf"), RATE, True, ">=")
    return _lower(suite, name + " rate", coarse / fine, RATE)


def _gamma_check():
    points = [0.1, 0.5, 1.0, 2.5, 7.3, 15.0, 29.5]
    err = max(abs(fo.gamma_fn(x) / math.gamma(x) - 1.0) for x in points)
    return [_upper("operators", "gamma relative error", err, 1e-13)]


def _constant_rule_checks():
    g = fo.TimeGrid(0.0, 1.0, 1024)
    one = fo.TimeSeries.constant(g)
    out = []
    for alpha in (0.25, 0.5, 0.75):
        d = fo.rl_derivative_left(one, alpha, 1.0).values[1:]
        exact = 1.0 / (fo.gamma_fn(1 - alpha) * g.nodes[1:] ** alpha)
        out.append(_upper("operators", f"constant rule RL alpha={alpha}", np.max(np.abs(d / exact - 1)), 1e-14))
        c = fo.caputo_derivative_left(one, alpha, 1.0).values
        out.append(_upper("operators", f"constant rule Caputo alpha={alpha}", np.max(np.abs(c)), 0.0))
    return out


# Identity cases: (label, residual(n_steps)).
def _identity_cases():
    cases = []
    for name, beta, gamma in (("one", 0.5, 0.5), ("one", 0.25, 0.75), ("t2", 0.3, 0.4), ("bump", 0.3, 0.4)):
        cases.append(
            (f"semigroup u={name} beta={beta} gamma={gamma}",
             lambda n, name=name, b=beta, c=gamma: fo.semigroup_check(series(name, n), b, c))
        )
    for name in ("t2", "t3", "bump"):
        for order in (0.25, 0.5):
            cases.append(
                (f"inverse u={name} order={order}",
                 lambda n, name=name, o=order: fo.inverse_residual(series(name, n), o))
            )
        for alpha in (0.25, 0.5):
            cases.append(
                (f"split derivative u={name} alpha={alpha}",
                 lambda n, name=name, a=alpha: fo.split_derivative_residual(series(name, n), a))
            )
    for order in (0.25, 0.5):
        cases.append(
            (f"ibp derivative u=bump v=bump_skew order={order}",
             lambda n, o=order: fo.ibp_derivative_residual(series("bump", n), series("bump_skew", n), o))
        )
        for u, v in (("one", "cos"), ("t2", "bump")):
            cases.append(
                (f"ibp integral u={u} v={v} order={order}",
                 lambda n, u=u, v=v, o=order: fo.ibp_integral_residual(series(u, n), series(v, n), o))
            )
    return cases


def identity_rows(n_steps: int = 1024, tol: float = 1e-3, suite: str = "operators"):
    rows = []
    for label, fn in _identity_cases():
        coarse, fine = fn(n_steps), fn(2 * n_steps)
        rows.append(_upper(suite, label, coarse, tol))
        rows.append(_rate(suite, label, coarse, fine))
    return rows


def _operators():
    return [_gamma_check, _constant_rule_checks, identity_rows]


def _equivalence_rows():
    rows = []
    for name in ("bump", "bump_wide", "bump_skew"):
        u = series(name, 4096)
        for alpha in (0.25, 0.5, 0.75):
            r = fs.energy_equivalence_check(u, alpha).ratio
            rows.append(_upper("spectral", f"energy equivalence u={name} alpha={alpha} |ratio-1|", abs(r - 1), 1e-3))
    for name in ("one", "cos", "bump"):
        u = series(name, 4096)
        for alpha in (0.25, 0.5, 0.75):
            r = fs.integral_energy_equivalence_check(u, alpha).ratio
            rows.append(
                _upper("spectral", f"integral energy equivalence u={name} alpha={alpha} |ratio-1|", abs(r - 1), 1e-3)
            )
    return rows


def _plancherel_rows():
    u = series("bump", 2048)
    rep = fs.frac_norm(u, 0.5)
    sample = fs.spectral_transform(u)
    l2_freq = sample.weighted_energy(0.0)
    l2_time = float(np.sum(sample.samples**2) * sample.dt)
    return [
        _upper("spectral", "Plancherel l2", abs(l2_freq / l2_time - 1), 1e-10),
        _upper("spectral", "seminorm two-path alpha=0.5", abs(rep.left_deriv_norm / rep.seminorm_alpha - 1), 1e-6),
    ]


def poincare_rows(n_steps: int = 2048):
    """Empirical Poincare constant over a bump family; reported, bounded only by finiteness."""
    family = [(0.5, 0.45), (0.5, 0.3), (0.3, 0.2), (0.7, 0.2), (0.5, 0.1)]
    rows = []
    for alpha in (0.25, 0.5, 0.75):
        worst = max(
            fs.poincare_ratio(fo.TimeSeries.from_function(fo.TimeGrid(0.0, 1.0, n_steps), lambda t: bump(t, c, w)), alpha)
            for c, w in family
        )
        rows.append(_upper("spectral", f"poincare ratio max alpha={alpha}", worst, math.inf))
    return rows


def cross_path_rows(n_steps: int = 2048, pad_factor: int = 8, orders=(0.25, 0.5)):
    u = series("bump", n_steps)
    rows = []
    for order in orders:
        quad = fo.rl_derivative_left(u, order, 0.0).values
        spec = fs.spectral_frac_derivative(u, order, "left", pad_factor).values
        rows.append(_upper("spectral", f"cross-path derivative order={order}", np.max(np.abs(quad - spec)), 1e-3))
    return rows


def _spectral():
    return [_equivalence_rows, _plancherel_rows, poincare_rows, cross_path_rows]


def random_trajectories(rng: np.random.Generator, count: int, m: int, n_steps: int) -> list[np.ndarray]:
    """Random smooth trajectories: a few random Fourier modes plus a random polynomial."""
    t = np.linspace(0.0, 1.0, n_steps + 1)
    out = []
    for _ in range(count):
        coeffs = rng.standard_normal((m, 4))
        freqs = rng.uniform(0.5, 12.0, size=(m, 1))
        phase = rng.uniform(0, 2 * np.pi, size=(m, 1))
        u = coeffs[:, :1] * np.sin(freqs * t + phase) + coeffs[:, 1:2] + coeffs[:, 2:3] * t + coeffs[:, 3:] * t**2
        out.append(u)
    return out


def dissipation_rows(seed: int = 0, count: int = 100, n_steps: int = 1024, alphas=(0.25, 0.5, 0.75), suite="energy"):
    tg = fo.TimeGrid(0.0, 1.0, n_steps)
    basis = build_basis("sine_spectral", 3, SpaceGrid(1.0, 32))
    mat = MaterialModel(lambda x: 1.0, lambda x: 1.0, lambda x: 1.0 + 0.5 * np.sin(2 * np.pi * x), 0.5, 1.0)
    rows = []
    for alpha in alphas:
        system = assemble(ProblemSpec(1.0, 1.0, alpha, mat), basis, tg)
        rng = np.random.default_rng([seed, int(alpha * 1000)])
        worst = math.inf
        for u in random_trajectories(rng, count, system.m, n_steps):
            acc = accumulated_dissipation(u, system, alpha, tg.dt)
            worst = min(worst, float(np.min(acc)) / dissipation_scale(u, system, tg.dt))
        rows.append(_lower(suite, f"dissipation min/scale alpha={alpha}", worst, -1e-6))
    return rows


def _energy_rows():
    rows = []
    mat = MaterialModel(lambda x: 1.0 + 0.2 * x, lambda x: 1 + 0.5 * np.sin(2 * np.pi * x), lambda x: 0.5 + 0 * x, 0.4, 0.5)
    balance = []
    weak = []
    for n, cells in ((64, 16), (128, 32), (256, 64)):
        mp = ManufacturedProblem(1.0, 1.0, 0.5, mat)
        tg = fo.TimeGrid(0.0, 1.0, n)
        system = assemble(mp.spec(), build_basis("p1_fem", cells - 1, SpaceGrid(1.0, cells)), tg)
        history = solve(system)
        balance.append(abs(energy_report(history, system).balance_residual[-1]))
        weak.append(weak_residual(history, system, test_modes=5))
    for i in range(2):
        rows.append(_lower("energy", f"energy balance reduction level {i}->{i + 1}", balance[i] / balance[i + 1], 1.5))
        rows.append(_lower("energy", f"weak residual reduction level {i}->{i + 1}", weak[i] / weak[i + 1], 1.5))
    # Inviscid limit conserves energy.
    tg = fo.TimeGrid(0.0, 1.0, 1000)
    cons = MaterialModel(lambda x: 1.0, lambda x: 1.0, lambda x: 0.0, 1.0, 1.0)
    spec = ProblemSpec(1.0, 1.0, 0.5, cons, initial_displacement=lambda x: np.sin(np.pi * x) * (1 + x))
    system = assemble(spec, build_basis("sine_spectral", 4, SpaceGrid(1.0, 32)), tg, enforce=False)
    e = energy_report(solve(system), system).total
    rows.append(_upper("energy", "inviscid energy drift (relative)", np.max(np.abs(e - e[0])) / e[0], 1e-5))
    zero = GalerkinSystem.from_matrices(tg, 0.5, np.eye(2), np.diag([1.0, 4.0]), np.diag([1.0, 2.0]))
    rows.append(_upper("energy", "uniqueness zero data", uniqueness_probe(zero), 1e-12))
    return rows


def _energy(seed: int):
    return [lambda: dissipation_rows(seed, count=20, n_steps=512), _energy_rows]


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("FRACVISCO_THREADS", "1")))
    except ValueError:
        return 1


def run_suite(name: str, seed: int = 0) -> list[CheckResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    groups = []
    if name in ("operators", "all"):
        groups += _operators()
    if name in ("spectral", "all"):
        groups += _spectral()
    if name in ("energy", "all"):
        groups += _energy(seed)
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(lambda g: g(), groups))
    return [row for rows in results for row in rows]


def write_report(path, rows: list[CheckResult]):
    header = ["suite", "check", "value", "relation", "tolerance", "passed"]
    return write_csv(path, header, [r.row() for r in rows])
