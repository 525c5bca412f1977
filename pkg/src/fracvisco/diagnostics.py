"""Energy, dissipation, a-priori and weak-form checks on coefficient histories.

All time integrals use the trapezoid rule on the history's grid, so the
discrete energy balance telescopes exactly up to the error of the velocity
and dissipation quadratures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import GalerkinSystem, ProblemSpec
from .csvio import write_csv
from .errors import DomainError, PreconditionError, ShapeError
from .fracops import frac_integral, gamma_fn, rl_derivative, trapezoid_weights
from .volterra import FieldHistory, SolverConfig, solve

__all__ = [
    "EnergyReport",
    "AprioriReport",
    "energy_report",
    "accumulated_dissipation",
    "dissipation_scale",
    "dissipation_nonneg_check",
    "apriori_check",
    "weak_residual",
    "uniqueness_probe",
]


def _cumulative_trapezoid(values: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]))
    return out


def _check_grid(history: FieldHistory, system: GalerkinSystem):
    if history.coeffs.shape != system.F.shape:
        raise ShapeError(f"history shape {history.coeffs.shape} does not match system load {system.F.shape}")


def _quad(mat: np.ndarray, x: np.ndarray, y: np.ndarray | None = None) -> np.ndarray:
    """Node-wise ``x_j^T mat y_j`` for trajectories of shape ``(m, n+1)``."""
    y = x if y is None else y
    return np.einsum("ij,ik,kj->j", x, mat, y)


@dataclass(frozen=True, eq=False)
class EnergyReport:
    t: np.ndarray
    kinetic: np.ndarray
    elastic: np.ndarray
    total: np.ndarray
    work: np.ndarray
    dissipation: np.ndarray
    balance_residual: np.ndarray

    def to_csv(self, path):
        header = ["t", "kinetic", "elastic", "total", "work", "dissipation", "balance_residual"]
        cols = np.column_stack(
            [self.t, self.kinetic, self.elastic, self.total, self.work, self.dissipation, self.balance_residual]
        )
        return write_csv(path, header, cols.tolist())


def accumulated_dissipation(u: np.ndarray, system: GalerkinSystem, alpha: float, dt: float) -> np.ndarray:
    """``∫_0^t (b I^(1-alpha) u_x, u_x) ds`` at every node for a coefficient trajectory ``u``."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    q = _quad(system.V, frac_integral(u, dt, 1.0 - alpha), u)
    return _cumulative_trapezoid(q, dt)


def dissipation_scale(u: np.ndarray, system: GalerkinSystem, dt: float) -> float:
    """``∫_0^T (b u_x, u_x) dt``, the natural size of the dissipation functional."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    q = _quad(system.V, u)
    return float(np.sum(trapezoid_weights(q.shape[0], dt) * q))


def dissipation_nonneg_check(u, system: GalerkinSystem, alpha: float, dt: float | None = None) -> float:
    """Minimum over nodes of the accumulated dissipation of ``u``."""
    dt = system.tgrid.dt if dt is None else dt
    return float(np.min(accumulated_dissipation(u, system, alpha, dt)))


def energy_report(history: FieldHistory, system: GalerkinSystem, spec: ProblemSpec | None = None) -> EnergyReport:
    _check_grid(history, system)
    dt = history.tgrid.dt
    d, v = history.coeffs, history.velocity
    kinetic = 0.5 * _quad(system.M, v)
    elastic = 0.5 * _quad(system.K, d)
    total = kinetic + elastic
    work = _cumulative_trapezoid(np.einsum("ij,ij->j", system.F, v), dt)
    dissipation = accumulated_dissipation(v, system, system.alpha, dt)
    balance = total - total[0] - work + dissipation
    return EnergyReport(history.tgrid.nodes, kinetic, elastic, total, work, dissipation, balance)


@dataclass(frozen=True)
class AprioriReport:
    sup_h1: float
    sup_velocity_l2: float
    frac_norm: float
    forcing_norm: float
    g_norm: float
    h_norm: float

    @property
    def lhs(self) -> float:
        return self.sup_h1 + self.sup_velocity_l2 + self.frac_norm

    @property
    def rhs(self) -> float:
        return self.forcing_norm + self.g_norm + self.h_norm

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs

    def to_csv(self, path):
        header = ["sup_h1", "sup_velocity_l2", "frac_norm", "forcing_norm", "g_norm", "h_norm", "lhs", "rhs", "ratio"]
        row = [self.sup_h1, self.sup_velocity_l2, self.frac_norm, self.forcing_norm, self.g_norm, self.h_norm]
        return write_csv(path, header, [row + [self.lhs, self.rhs, self.ratio]])


def apriori_check(history: FieldHistory, system: GalerkinSystem, spec: ProblemSpec | None = None) -> AprioriReport:
    """Discrete terms of the a-priori estimate.

    Spatial norms on the Galerkin space: ``H^1_0`` through the unweighted
    stiffness matrix ``S``, ``L^2`` through the Gram matrix, and the dual
    ``H^-1`` norm of a load vector ``F`` as ``sqrt(F^T S^-1 F)``. The
    fractional time norm is taken of ``u - g_m``, which vanishes at t = 0.
    """
    _check_grid(history, system)
    dt = history.tgrid.dt
    S, G = system.stiffness0, system.gram
    d, v = history.coeffs, history.velocity
    w = trapezoid_weights(d.shape[1], dt)
    sup_h1 = math.sqrt(max(float(np.max(_quad(S, d))), 0.0))
    sup_vel = math.sqrt(max(float(np.max(_quad(G, v))), 0.0))
    e = d - system.c[:, None]
    de = rl_derivative(e, dt, system.alpha / 2, "left", np.zeros(e.shape[0]))
    frac_sq = float(np.sum(w * (_quad(S, e) + _quad(S, de))))
    dual = np.linalg.solve(S, system.F)
    forcing = math.sqrt(max(float(np.sum(w * np.einsum("ij,ij->j", system.F, dual))), 0.0))
    g_norm = math.sqrt(max(float(system.c @ S @ system.c), 0.0))
    h_norm = math.sqrt(max(float(system.d0 @ G @ system.d0), 0.0))
    if forcing + g_norm + h_norm == 0.0:
        raise DomainError("a-priori ratio is undefined for zero data")
    return AprioriReport(sup_h1, sup_vel, math.sqrt(max(frac_sq, 0.0)), forcing, g_norm, h_norm)


def _time_factor(p: int, t: np.ndarray, T: float, half: float):
    """``(1 - t/T)^p``, its derivative and its right RL derivative of order ``half``."""
    s = np.clip(1.0 - t / T, 0.0, None)
    theta = s**p
    dtheta = -p * s ** (p - 1) / T
    right = gamma_fn(p + 1.0) / gamma_fn(p + 1.0 - half) * T ** (-half) * s ** (p - half)
    return theta, dtheta, right


def weak_residual(
    history: FieldHistory,
    system: GalerkinSystem,
    spec: ProblemSpec | None = None,
    test_modes: int = 5,
    powers=(1, 2, 3),
) -> float:
    """Largest mismatch of the weak formulation over separated test functions
    ``(1 - t/T)^p w_k``, ``k < test_modes``, ``p`` in ``powers``.

    Each test vanishes at ``t = T``. The fractional term pairs the Caputo
    derivative of order ``alpha/2`` of ``u`` with the right derivative of
    the test factor, which is evaluated in closed form.
    """
    _check_grid(history, system)
    if int(test_modes) != test_modes or test_modes < 1:
        raise DomainError("test_modes must be a positive integer")
    for p in powers:
        if int(p) != p or p < 1:
            raise PreconditionError(f"time factor (1 - t/T)^{p} does not vanish at t = T")
    modes = min(int(test_modes), system.m)
    tg = history.tgrid
    dt, T = tg.dt, tg.t_end - tg.t_start
    t = tg.nodes - tg.t_start
    w = trapezoid_weights(t.shape[0], dt)
    half = system.alpha / 2
    d, v = history.coeffs, history.velocity
    e = d - system.c[:, None]
    caputo = rl_derivative(e, dt, half, "left", np.zeros(e.shape[0]))
    Mv = (system.M @ v)[:modes]
    Vc = (system.V @ caputo)[:modes]
    Kd = (system.K @ d)[:modes]
    F = system.F[:modes]
    rho_h = system.rho_h_load[:modes]
    worst = 0.0
    for p in powers:
        theta, dtheta, right = _time_factor(int(p), t, T, half)
        lhs = (Mv * dtheta - Vc * right - Kd * theta) @ w
        rhs = -(F * theta) @ w - rho_h * theta[0]
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def uniqueness_probe(system: GalerkinSystem, config: SolverConfig | None = None, initial_guess=None) -> float:
    """Solve and return ``max_t ||sqrt(rho) u(t)||``; zero for zero data."""
    history = solve(system, config=config, initial_guess=initial_guess)
    return math.sqrt(max(float(np.max(_quad(system.M, history.coeffs))), 0.0))
