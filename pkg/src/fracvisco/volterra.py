r"""Time integration of ``M d'' + V cD^alpha d + K d = F``.

Integrating twice turns the system into a Volterra equation of the second
kind,

.. math::

    d = c + d_0 t + \frac{B c\, t^{2-\alpha}}{\Gamma(3-\alpha)} + I^2 f
        - B I^{2-\alpha} d - A I^2 d,

with ``A = M^{-1} K``, ``B = M^{-1} V`` and ``f = M^{-1} F``. Both solvers
discretize the integrals with the product-integration weights of
:mod:`fracvisco.fracops`:

* ``marching`` solves one ``m x m`` system per node (the diagonal weight of
  the integrals is constant, so one LU factorization serves every step);
* ``picard`` iterates the fixed-point map on windows of consecutive nodes.

The velocity follows from the once-integrated form
``d' = d_0 + I f - B I^{1-alpha}(d - c) - A I d``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import GalerkinSystem
from .csvio import read_csv, write_csv
from .errors import AssemblyError, DivergenceError, DomainError, IterationError, ShapeError
from .fracops import (
    TimeGrid,
    TimeSeries,
    _integral_coefficients,
    caputo_derivative,
    frac_integral,
    gamma_fn,
)

__all__ = [
    "FieldHistory",
    "SolverConfig",
    "VolterraForm",
    "to_volterra_rhs",
    "solve",
    "residual",
    "second_difference",
    "OVERFLOW_FACTOR",
]

OVERFLOW_FACTOR = 1e12


@dataclass(frozen=True, eq=False)
class FieldHistory:
    """Coefficient trajectories ``d_k(t_j)`` and velocities, shape ``(m, n+1)``."""

    tgrid: TimeGrid
    coeffs: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float, ndmin=2)
        velocity = np.array(self.velocity, dtype=float, ndmin=2)
        if coeffs.shape != velocity.shape or coeffs.shape[1] != self.tgrid.n_nodes:
            raise ShapeError(
                f"history shapes {coeffs.shape} / {velocity.shape} do not match "
                f"{self.tgrid.n_nodes} time nodes"
            )
        if not (np.all(np.isfinite(coeffs)) and np.all(np.isfinite(velocity))):
            raise DomainError("history contains non-finite entries")
        coeffs.flags.writeable = False
        velocity.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "velocity", velocity)

    @property
    def m(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def zeros(cls, tgrid: TimeGrid, m: int) -> "FieldHistory":
        z = np.zeros((m, tgrid.n_nodes))
        return cls(tgrid, z, z)

    def perturbed(self, k: int, delta: float) -> "FieldHistory":
        """Copy with ``delta`` added to coefficient ``k`` at every node after the first."""
        coeffs = self.coeffs.copy()
        coeffs[k, 1:] += delta
        return FieldHistory(self.tgrid, coeffs, self.velocity)

    def to_csv(self, path):
        m = self.m
        header = ["t"] + [f"d_{k + 1}" for k in range(m)] + [f"v_{k + 1}" for k in range(m)]
        rows = np.column_stack([self.tgrid.nodes, self.coeffs.T, self.velocity.T])
        return write_csv(path, header, rows.tolist())

    @classmethod
    def from_csv(cls, path) -> "FieldHistory":
        header, data = read_csv(path)
        m = (len(header) - 1) // 2
        t = data[:, 0]
        tgrid = TimeGrid(float(t[0]), float(t[-1]), len(t) - 1)
        return cls(tgrid, data[:, 1 : m + 1].T, data[:, m + 1 :].T)


SCHEMES = ("marching", "picard")


@dataclass(frozen=True)
class SolverConfig:
    """Solver options.

    ``picard_window`` is the number of nodes iterated jointly (``None`` means
    the whole trajectory). ``regularity_note`` warns when the data produce
    the nonsmooth ``t^(2-alpha)`` startup term, which limits observed orders.
    """

    scheme: str = "marching"
    picard_tol: float = 1e-12
    picard_max_iter: int = 500
    picard_window: int | None = 32
    regularity_note: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.picard_tol > 0:
            raise DomainError("picard_tol must be positive")
        if int(self.picard_max_iter) != self.picard_max_iter or self.picard_max_iter < 1:
            raise DomainError("picard_max_iter must be a positive integer")
        if self.picard_window is not None and self.picard_window < 1:
            raise DomainError("picard_window must be positive or None")


@dataclass(frozen=True, eq=False)
class VolterraForm:
    """Second-kind data: ``d = inhomogeneity - B I^(2-alpha) d - A I^2 d``."""

    tgrid: TimeGrid
    alpha: float
    A: np.ndarray
    B: np.ndarray
    f: np.ndarray
    c: np.ndarray
    d0: np.ndarray
    singular_term: np.ndarray
    inhomogeneity: np.ndarray

    def kernel(self, d: np.ndarray) -> np.ndarray:
        dt = self.tgrid.dt
        return self.B @ frac_integral(d, dt, 2.0 - self.alpha) + self.A @ frac_integral(d, dt, 2.0)

    def fixed_point_map(self, d: np.ndarray) -> np.ndarray:
        return self.inhomogeneity - self.kernel(d)

    def velocity(self, d: np.ndarray) -> np.ndarray:
        dt = self.tgrid.dt
        v = self.d0[:, None] + frac_integral(self.f, dt, 1.0)
        v = v - self.B @ frac_integral(d - self.c[:, None], dt, 1.0 - self.alpha)
        return v - self.A @ frac_integral(d, dt, 1.0)

    @property
    def scale(self) -> float:
        s = float(np.max(np.abs(self.inhomogeneity)))
        return s if s > 0 else 1.0


def to_volterra_rhs(system: GalerkinSystem, tgrid: TimeGrid | None = None) -> VolterraForm:
    tgrid = system.tgrid if tgrid is None else tgrid
    if system.F.shape[1] != tgrid.n_nodes:
        raise ShapeError(f"load history has {system.F.shape[1]} nodes, grid has {tgrid.n_nodes}")
    try:
        factor = scipy.linalg.cho_factor(system.M)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError(f"mass matrix is not positive definite: {exc}") from exc
    A = scipy.linalg.cho_solve(factor, system.K)
    B = scipy.linalg.cho_solve(factor, system.V)
    f = scipy.linalg.cho_solve(factor, system.F)
    alpha = system.alpha
    t = tgrid.nodes - tgrid.t_start
    c, d0 = system.c, system.d0
    singular = np.outer(B @ c, t ** (2.0 - alpha) / gamma_fn(3.0 - alpha))
    g = c[:, None] + np.outer(d0, t) + singular + frac_integral(f, tgrid.dt, 2.0)
    return VolterraForm(tgrid, alpha, A, B, f, c, d0, singular, g)


def _weight_block(c, e, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Dense product-integration weights for the given row/column indices."""
    lag = rows[:, None] - cols[None, :]
    w = np.where(lag >= 0, c[np.clip(lag, 0, None)], 0.0)
    if cols.size and cols[0] == 0:
        w[:, 0] = np.where(rows > 0, e[rows], 0.0)
    return w


class _Weights:
    def __init__(self, n: int, dt: float, beta: float):
        self.c, self.e = _integral_coefficients(n, beta)
        self.scale = dt**beta / gamma_fn(beta + 2.0)

    def history(self, d: np.ndarray, j: int) -> np.ndarray:
        # Contribution of nodes 0..j-1 to the integral at node j.
        out = self.e[j] * d[:, 0]
        if j > 1:
            out = out + d[:, 1:j] @ self.c[j - 1 : 0 : -1]
        return self.scale * out


def _guard(value: np.ndarray, form: VolterraForm, j: int):
    if not np.all(np.isfinite(value)) or np.max(np.abs(value)) > OVERFLOW_FACTOR * form.scale:
        raise DivergenceError(f"solution norm exceeded the overflow guard at node {j}")


def _march(form: VolterraForm) -> np.ndarray:
    n = form.tgrid.n_steps
    dt = form.tgrid.dt
    m = form.c.shape[0]
    frac = _Weights(n, dt, 2.0 - form.alpha)
    second = _Weights(n, dt, 2.0)
    lhs = np.eye(m) + frac.scale * form.B + second.scale * form.A
    lu = scipy.linalg.lu_factor(lhs, check_finite=True)
    if np.min(np.abs(np.diag(lu[0]))) < 1e-14 * np.max(np.abs(lhs)):
        raise DivergenceError("marching step matrix is singular; reduce the time step")
    d = np.zeros((m, n + 1))
    d[:, 0] = form.c
    for j in range(1, n + 1):
        rhs = form.inhomogeneity[:, j] - form.B @ frac.history(d, j) - form.A @ second.history(d, j)
        d[:, j] = scipy.linalg.lu_solve(lu, rhs)
        _guard(d[:, j], form, j)
    return d


def _picard(form: VolterraForm, config: SolverConfig, initial_guess=None) -> tuple[np.ndarray, int]:
    n = form.tgrid.n_steps
    dt = form.tgrid.dt
    m = form.c.shape[0]
    width = n if config.picard_window is None else int(config.picard_window)
    kernels = []
    for beta, mat in ((2.0 - form.alpha, form.B), (2.0, form.A)):
        c, e = _integral_coefficients(n, beta)
        kernels.append((c, e, dt**beta / gamma_fn(beta + 2.0), mat))
    if initial_guess is None:
        d = form.inhomogeneity.copy()
    else:
        d = np.array(initial_guess, dtype=float, copy=True)
        if d.shape != (m, n + 1):
            raise ShapeError(f"initial guess has shape {d.shape}, expected {(m, n + 1)}")
    d[:, 0] = form.c
    total_iter = 0
    for j0 in range(1, n + 1, width):
        rows = np.arange(j0, min(j0 + width, n + 1))
        past = np.arange(0, j0)
        known = form.inhomogeneity[:, rows].copy()
        local = []
        for c, e, s, mat in kernels:
            known -= mat @ (d[:, past] @ (s * _weight_block(c, e, rows, past)).T)
            local.append((mat, s * _weight_block(c, e, rows, rows)))
        for it in range(1, config.picard_max_iter + 1):
            new = known.copy()
            for mat, w in local:
                new -= mat @ (d[:, rows] @ w.T)
            if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > OVERFLOW_FACTOR * form.scale:
                raise DivergenceError(f"Picard iterates exceeded the overflow guard in window at node {j0}")
            change = float(np.max(np.abs(new - d[:, rows])))
            d[:, rows] = new
            if change <= config.picard_tol * max(1.0, float(np.max(np.abs(new)))):
                break
        else:
            raise IterationError(
                f"Picard iteration did not converge in {config.picard_max_iter} iterations "
                f"(window starting at node {j0}, last change {change:.3e})",
                residual=change,
            )
        total_iter += it
    return d, total_iter


def solve(
    system: GalerkinSystem,
    tgrid: TimeGrid | None = None,
    config: SolverConfig | None = None,
    initial_guess=None,
) -> FieldHistory:
    """Solve the semidiscrete system; the initial conditions hold exactly."""
    config = SolverConfig() if config is None else config
    form = to_volterra_rhs(system, tgrid)
    if config.regularity_note and np.any(form.singular_term):
        warnings.warn(
            "data produce a t^(2-alpha) startup term; second differences are singular at t=0 "
            "and observed temporal orders are limited near the origin",
            stacklevel=2,
        )
    if config.scheme == "marching":
        d = _march(form)
    else:
        d, _ = _picard(form, config, initial_guess)
    v = form.velocity(d)
    v[:, 0] = form.d0
    return FieldHistory(form.tgrid, d, v)


def second_difference(d: np.ndarray, dt: float) -> np.ndarray:
    """Second derivative along the last axis: central inside, four-point
    one-sided stencils at both ends (second order throughout)."""
    d = np.asarray(d, dtype=float)
    if d.shape[-1] < 4:
        raise ShapeError("need at least four time nodes for second differences")
    out = np.empty_like(d)
    out[..., 1:-1] = d[..., 2:] - 2.0 * d[..., 1:-1] + d[..., :-2]
    out[..., 0] = 2.0 * d[..., 0] - 5.0 * d[..., 1] + 4.0 * d[..., 2] - d[..., 3]
    out[..., -1] = 2.0 * d[..., -1] - 5.0 * d[..., -2] + 4.0 * d[..., -3] - d[..., -4]
    return out / dt**2


def residual(history: FieldHistory, system: GalerkinSystem) -> TimeSeries:
    """Node-wise max-norm of ``M d'' + V cD^alpha d + K d - F``."""
    d = history.coeffs
    if d.shape != system.F.shape:
        raise ShapeError(f"history shape {d.shape} does not match load shape {system.F.shape}")
    dt = history.tgrid.dt
    r = system.M @ second_difference(d, dt) + system.V @ caputo_derivative(d, dt, system.alpha)
    r = r + system.K @ d - system.F
    return TimeSeries(history.tgrid, np.max(np.abs(r), axis=0))
