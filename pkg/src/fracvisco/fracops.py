r"""Discrete Riemann-Liouville and Caputo operators on uniform time grids.

All operators use piecewise-linear product integration: the sampled function
is replaced by its linear interpolant and the weakly singular kernel
:math:`(t-s)^{\beta-1}/\Gamma(\beta)` is integrated exactly against it. For
derivatives of order :math:`0 < \alpha < 1` this is the L1 scheme applied to
the Caputo part, with the Riemann-Liouville endpoint term

.. math::

    \frac{u(a)}{\Gamma(1-\alpha)(t-a)^\alpha}

added analytically. Right-sided operators are obtained by time reversal.

Array-level functions (:func:`frac_integral`, :func:`caputo_derivative`,
:func:`rl_derivative`) act along the last axis, so a Galerkin coefficient
trajectory of shape ``(m, n_steps + 1)`` is processed in one call.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .csvio import matrix_to_csv
from .errors import DomainError, PreconditionError, ShapeError

__all__ = [
    "TimeGrid",
    "TimeSeries",
    "ConvolutionKernel",
    "gamma_fn",
    "inject_gamma_fault",
    "frac_integral",
    "caputo_derivative",
    "rl_derivative",
    "rl_integral_left",
    "rl_integral_right",
    "rl_derivative_left",
    "rl_derivative_right",
    "caputo_derivative_left",
    "caputo_derivative_right",
    "semigroup_check",
    "inverse_residual",
    "split_derivative_residual",
    "ibp_derivative_residual",
    "ibp_integral_residual",
    "trapezoid_weights",
]


# ---------------------------------------------------------------------------
# Gamma function
# ---------------------------------------------------------------------------

# Lanczos approximation, g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Multiplicative fault used by the verify command's self-test hook.
_gamma_fault = 1.0


def _lanczos(x: float) -> float:
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * _lanczos(1.0 - x))
    x -= 1.0
    s = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        s += _LANCZOS_COEF[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return _SQRT_2PI * math.pow(t, x + 0.5) * math.exp(-t) * s


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"gamma_fn requires a positive finite argument, got {x!r}")
    if x == int(x) and x <= 21:
        value = float(math.factorial(int(x) - 1))
    else:
        value = _lanczos(x)
    return value * _gamma_fault


@contextlib.contextmanager
def inject_gamma_fault(factor: float = 1.01):
    """Temporarily scale every :func:`gamma_fn` value by ``factor``.

    Exists so self-verification suites can prove they detect a broken
    special function.
    """
    global _gamma_fault
    previous = _gamma_fault
    _gamma_fault = float(factor)
    try:
        yield
    finally:
        _gamma_fault = previous


# ---------------------------------------------------------------------------
# Grids and series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_j = t_start + j*dt`` for ``j = 0..n_steps``."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise DomainError("time grid endpoints must be finite")
        if not self.t_end > self.t_start:
            raise DomainError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = self.t_start + self.dt * np.arange(self.n_steps + 1)
        nodes[-1] = self.t_end
        nodes.flags.writeable = False
        return nodes

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_start, self.t_end, self.n_steps * factor)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Samples of a scalar function at the nodes of a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] != self.grid.n_nodes:
            raise ShapeError(
                f"expected {self.grid.n_nodes} samples, got array of shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("time series samples must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: TimeGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "TimeSeries":
        return cls(grid, np.broadcast_to(fn(grid.nodes), grid.nodes.shape))

    @classmethod
    def constant(cls, grid: TimeGrid, value: float = 1.0) -> "TimeSeries":
        return cls(grid, np.full(grid.n_nodes, float(value)))

    def reversed(self) -> "TimeSeries":
        return TimeSeries(self.grid, self.values[::-1])

    def __len__(self):
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# Quadrature weights
# ---------------------------------------------------------------------------


def _integral_coefficients(n: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Unscaled product-integration weights for the left integral of order beta.

    Returns ``(c, e)`` with ``w[j, k] = c[j - k]`` for ``1 <= k <= j`` and
    ``w[j, 0] = e[j]``; the common factor is ``dt**beta / Gamma(beta + 2)``.
    """
    ell = np.arange(n + 1, dtype=float)
    c = np.empty(n + 1)
    c[0] = 1.0
    p = beta + 1.0
    c[1:] = (ell[1:] + 1.0) ** p - 2.0 * ell[1:] ** p + (ell[1:] - 1.0) ** p
    e = np.zeros(n + 1)
    j = ell[1:]
    e[1:] = (j - 1.0) ** p - (j - 1.0 - beta) * j**beta
    return c, e


def _l1_coefficients(n: int, alpha: float) -> np.ndarray:
    """L1 coefficients ``b_l = (l+1)^(1-alpha) - l^(1-alpha)``, l = 0..n-1."""
    ell = np.arange(max(n, 1), dtype=float)
    return (ell + 1.0) ** (1.0 - alpha) - ell ** (1.0 - alpha)


def _causal_convolve(coeffs: np.ndarray, values: np.ndarray) -> np.ndarray:
    """``out[..., j] = sum_{k<=j} coeffs[j-k] * values[..., k]`` (direct sum)."""
    n = values.shape[-1]
    flat = values.reshape(-1, n)
    out = np.empty_like(flat)
    for i, row in enumerate(flat):
        out[i] = np.convolve(row, coeffs[:n])[:n]
    return out.reshape(values.shape)


def _check_integral_order(beta: float) -> float:
    beta = float(beta)
    if not math.isfinite(beta) or beta < 0.0:
        raise DomainError(f"integral order must be >= 0, got {beta!r}")
    return beta


def _check_derivative_order(alpha: float) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha < 0.0 or alpha >= 1.0:
        raise DomainError(f"derivative order must lie in [0, 1), got {alpha!r}")
    return alpha


def _check_side(side: str) -> str:
    if side not in ("left", "right"):
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    return side


def _as_samples(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] < 2:
        raise ShapeError("need at least two time samples")
    if not np.all(np.isfinite(values)):
        raise DomainError("input samples must be finite")
    return values


def frac_integral(values, dt: float, beta: float, side: str = "left") -> np.ndarray:
    """Riemann-Liouville integral of order ``beta`` along the last axis."""
    beta = _check_integral_order(beta)
    side = _check_side(side)
    values = _as_samples(values)
    if beta == 0.0:
        return values.copy()
    if side == "right":
        return frac_integral(values[..., ::-1], dt, beta)[..., ::-1].copy()
    n = values.shape[-1] - 1
    c, e = _integral_coefficients(n, beta)
    u0 = values[..., :1]
    out = _causal_convolve(c, values) + (e - c) * u0
    out[..., 0] = 0.0
    return out * (dt**beta / gamma_fn(beta + 2.0))


def caputo_derivative(values, dt: float, alpha: float, side: str = "left") -> np.ndarray:
    """L1 approximation of the Caputo derivative of order ``alpha``.

    Order zero is the identity.
    """
    alpha = _check_derivative_order(alpha)
    side = _check_side(side)
    values = _as_samples(values)
    if alpha == 0.0:
        return values.copy()
    if side == "right":
        return caputo_derivative(values[..., ::-1], dt, alpha)[..., ::-1].copy()
    n = values.shape[-1] - 1
    b = _l1_coefficients(n, alpha)
    out = np.zeros_like(values)
    out[..., 1:] = _causal_convolve(b, np.diff(values, axis=-1))
    return out * (dt ** (-alpha) / gamma_fn(2.0 - alpha))


def _endpoint_term(endpoint_value, dt: float, n: int, alpha: float) -> np.ndarray:
    """``u(a) / (Gamma(1-alpha) (t-a)^alpha)`` on the nodes; node 0 is 0 when
    ``u(a) = 0`` and signed infinity otherwise."""
    endpoint_value = np.asarray(endpoint_value, dtype=float)[..., None]
    tau = dt * np.arange(n + 1, dtype=float)
    shape = np.broadcast_shapes(endpoint_value.shape, tau.shape)
    out = np.zeros(shape)
    out[..., 1:] = endpoint_value / (gamma_fn(1.0 - alpha) * tau[1:] ** alpha)
    out[..., 0] = np.where(endpoint_value[..., 0] == 0.0, 0.0, np.copysign(np.inf, endpoint_value[..., 0]))
    return out


def rl_derivative(values, dt: float, alpha: float, side: str = "left", endpoint_value=None) -> np.ndarray:
    """Riemann-Liouville derivative of order ``alpha`` in ``[0, 1)``.

    ``endpoint_value`` is ``u(a)`` for the left derivative and ``u(b)`` for
    the right one; it defaults to the corresponding sample.
    """
    alpha = _check_derivative_order(alpha)
    side = _check_side(side)
    values = _as_samples(values)
    if alpha == 0.0:
        return values.copy()
    if side == "right":
        ev = values[..., -1] if endpoint_value is None else endpoint_value
        return rl_derivative(values[..., ::-1], dt, alpha, "left", ev)[..., ::-1].copy()
    if endpoint_value is None:
        endpoint_value = values[..., 0]
    n = values.shape[-1] - 1
    return caputo_derivative(values, dt, alpha) + _endpoint_term(endpoint_value, dt, n, alpha)


def trapezoid_weights(n_nodes: int, dt: float) -> np.ndarray:
    w = np.full(n_nodes, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvolutionKernel:
    """Quadrature weights ``w[j, k]`` of a fractional operator on a grid.

    For ``kind="derivative"`` the weights are those of the L1 (Caputo) part;
    the Riemann-Liouville endpoint term is analytic and not part of the
    matrix.
    """

    order: float
    side: str
    kind: str
    grid: TimeGrid

    def __post_init__(self):
        _check_side(self.side)
        if self.kind == "integral":
            _check_integral_order(self.order)
        elif self.kind == "derivative":
            _check_derivative_order(self.order)
        else:
            raise DomainError(f"kind must be 'integral' or 'derivative', got {self.kind!r}")

    @cached_property
    def weights(self) -> np.ndarray:
        n = self.grid.n_steps
        dt = self.grid.dt
        w = np.zeros((n + 1, n + 1))
        if self.order == 0.0:
            np.fill_diagonal(w, 1.0)
        elif self.kind == "integral":
            c, e = _integral_coefficients(n, self.order)
            for j in range(1, n + 1):
                w[j, 1 : j + 1] = c[j - 1 :: -1][: j]
                w[j, 0] = e[j]
            w *= dt**self.order / gamma_fn(self.order + 2.0)
        else:
            b = _l1_coefficients(n, self.order)
            for j in range(1, n + 1):
                w[j, j] += b[0]
                k = np.arange(1, j)
                w[j, k] = b[j - k] - b[j - k - 1]
                w[j, 0] = -b[j - 1]
            w *= dt ** (-self.order) / gamma_fn(2.0 - self.order)
        if self.side == "right":
            w = w[::-1, ::-1].copy()
        w.flags.writeable = False
        return w

    def apply(self, values) -> np.ndarray:
        if self.kind == "integral":
            return frac_integral(values, self.grid.dt, self.order, self.side)
        return caputo_derivative(values, self.grid.dt, self.order, self.side)

    def to_csv(self, path):
        """Rows are target nodes j, columns source nodes k; missing entries 0."""
        return matrix_to_csv(path, self.weights, prefix="k")


# ---------------------------------------------------------------------------
# TimeSeries operators
# ---------------------------------------------------------------------------


def rl_integral_left(u: TimeSeries, beta: float) -> TimeSeries:
    return TimeSeries(u.grid, frac_integral(u.values, u.grid.dt, beta, "left"))


def rl_integral_right(u: TimeSeries, beta: float) -> TimeSeries:
    return TimeSeries(u.grid, frac_integral(u.values, u.grid.dt, beta, "right"))


def _series(grid, values) -> TimeSeries:
    # Derivative output may carry a non-finite value at the singular endpoint.
    out = object.__new__(TimeSeries)
    values = np.asarray(values, dtype=float)
    values.flags.writeable = False
    object.__setattr__(out, "grid", grid)
    object.__setattr__(out, "values", values)
    return out


def rl_derivative_left(u: TimeSeries, alpha: float, u_at_a: float | None = None) -> TimeSeries:
    """Left Riemann-Liouville derivative.

    The value at ``t_start`` is 0 when ``u(a) = 0`` and a signed infinity
    otherwise, mirroring the analytic endpoint term.
    """
    return _series(u.grid, rl_derivative(u.values, u.grid.dt, alpha, "left", u_at_a))


def rl_derivative_right(u: TimeSeries, alpha: float, u_at_b: float | None = None) -> TimeSeries:
    return _series(u.grid, rl_derivative(u.values, u.grid.dt, alpha, "right", u_at_b))


def caputo_derivative_left(u: TimeSeries, alpha: float, u_at_a: float | None = None) -> TimeSeries:
    """Left Caputo derivative, computed as the RL derivative of ``u - u(a)``.

    At order zero this is the identity on ``u``.
    """
    alpha = _check_derivative_order(alpha)
    if alpha == 0.0:
        return TimeSeries(u.grid, u.values)
    values = np.asarray(u.values)
    if u_at_a is None or u_at_a == values[0]:
        return TimeSeries(u.grid, caputo_derivative(values, u.grid.dt, alpha))
    shifted = values - u_at_a
    return _series(u.grid, rl_derivative(shifted, u.grid.dt, alpha, "left", shifted[0]))


def caputo_derivative_right(u: TimeSeries, alpha: float, u_at_b: float | None = None) -> TimeSeries:
    alpha = _check_derivative_order(alpha)
    if alpha == 0.0:
        return TimeSeries(u.grid, u.values)
    values = np.asarray(u.values)
    if u_at_b is None or u_at_b == values[-1]:
        return TimeSeries(u.grid, caputo_derivative(values, u.grid.dt, alpha, "right"))
    shifted = values - u_at_b
    return _series(u.grid, rl_derivative(shifted, u.grid.dt, alpha, "right", shifted[-1]))


# ---------------------------------------------------------------------------
# Identity residuals
# ---------------------------------------------------------------------------


def semigroup_check(u: TimeSeries, beta: float, gamma: float) -> float:
    """Max-norm of ``I^beta I^gamma u - I^(beta+gamma) u`` on the grid."""
    dt = u.grid.dt
    lhs = frac_integral(frac_integral(u.values, dt, gamma), dt, beta)
    rhs = frac_integral(u.values, dt, beta + gamma)
    return float(np.max(np.abs(lhs - rhs)))


def _require_vanishing(values: np.ndarray, where: str, rtol: float = 1e-12):
    scale = max(float(np.max(np.abs(values))), np.finfo(float).tiny)
    ends = {"left": [values[0]], "right": [values[-1]], "both": [values[0], values[-1]]}[where]
    if any(abs(v) > rtol * scale for v in ends):
        raise PreconditionError(f"series must vanish at the {where} endpoint(s)")


def inverse_residual(u: TimeSeries, order: float) -> float:
    """Max-norm of ``I^order D^order u - u`` for ``u`` vanishing at ``t_start``."""
    _require_vanishing(u.values, "left")
    dt = u.grid.dt
    d = rl_derivative(u.values, dt, order, "left", 0.0)
    return float(np.max(np.abs(frac_integral(d, dt, order) - u.values)))


def split_derivative_residual(u: TimeSeries, alpha: float) -> float:
    """Max-norm of ``D^(alpha/2) D^(alpha/2) u - D^alpha u`` for ``u(a) = 0``."""
    _require_vanishing(u.values, "left")
    dt = u.grid.dt
    half = rl_derivative(u.values, dt, alpha / 2, "left", 0.0)
    twice = rl_derivative(half, dt, alpha / 2, "left", 0.0)
    full = rl_derivative(u.values, dt, alpha, "left", 0.0)
    return float(np.max(np.abs(twice - full)))


def ibp_derivative_residual(u: TimeSeries, v: TimeSeries, order: float) -> float:
    """``|int (D_a u) v - int u (D_b v)|`` for series vanishing at both ends."""
    _require_vanishing(u.values, "both")
    _require_vanishing(v.values, "both")
    dt = u.grid.dt
    w = trapezoid_weights(u.grid.n_nodes, dt)
    left = rl_derivative(u.values, dt, order, "left", 0.0)
    right = rl_derivative(v.values, dt, order, "right", 0.0)
    return float(abs(np.sum(w * left * v.values) - np.sum(w * u.values * right)))


def ibp_integral_residual(u: TimeSeries, v: TimeSeries, order: float) -> float:
    """``|int (I_a u) v - int u (I_b v)|`` (trapezoid in time)."""
    dt = u.grid.dt
    w = trapezoid_weights(u.grid.n_nodes, dt)
    left = frac_integral(u.values, dt, order, "left")
    right = frac_integral(v.values, dt, order, "right")
    return float(abs(np.sum(w * left * v.values) - np.sum(w * u.values * right)))
