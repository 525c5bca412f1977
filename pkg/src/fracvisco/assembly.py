"""Galerkin discretization in space on (0, L) with homogeneous Dirichlet ends.

Two bases are provided: the Dirichlet Laplacian eigenfunctions
``w_k = sqrt(2/L) sin(k pi x / L)`` and P1 hat functions on interior nodes.
All integrals use composite two-point Gauss quadrature on the cells of a
uniform :class:`SpaceGrid`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .csvio import matrix_to_csv
from .errors import AssemblyError, ConfigError, DataError, DomainError, HypothesisError
from .fracops import TimeGrid

__all__ = [
    "SpaceGrid",
    "MaterialModel",
    "ProblemSpec",
    "GalerkinBasis",
    "GalerkinSystem",
    "HypothesisCheck",
    "HypothesisReport",
    "build_basis",
    "assemble",
    "verify_hypotheses",
    "BASIS_KINDS",
]

BASIS_KINDS = ("sine_spectral", "p1_fem")
_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def _field(fn, *args) -> np.ndarray:
    """Evaluate a user field and broadcast it to the argument shape."""
    shape = np.broadcast_shapes(*(np.shape(a) for a in args))
    with np.errstate(all="ignore"):
        out = np.asarray(fn(*args), dtype=float)
    return np.broadcast_to(out, shape).astype(float)


@dataclass(frozen=True)
class SpaceGrid:
    length: float
    n_cells: int

    def __post_init__(self):
        if not self.length > 0:
            raise DomainError(f"length must be positive, got {self.length!r}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise DomainError(f"n_cells must be a positive integer, got {self.n_cells!r}")

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_cells + 1)

    @cached_property
    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Composite two-point Gauss points and weights."""
        mid = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        points = (mid[:, None] + 0.5 * self.h * _GAUSS[None, :]).ravel()
        weights = np.full(points.shape, 0.5 * self.h)
        return points, weights

    def refined(self, factor: int = 2) -> "SpaceGrid":
        return SpaceGrid(self.length, self.n_cells * factor)


@dataclass(frozen=True)
class MaterialModel:
    rho: Callable
    a_coef: Callable
    b_coef: Callable
    nu: float
    rho0: float

    def __post_init__(self):
        if not 0 < self.nu <= 1:
            raise DomainError(f"nu must lie in (0, 1], got {self.nu!r}")
        if not 0 < self.rho0 <= 1:
            raise DomainError(f"rho0 must lie in (0, 1], got {self.rho0!r}")

    @classmethod
    def constant(cls, rho=1.0, a=1.0, b=1.0, nu=None, rho0=None) -> "MaterialModel":
        if nu is None:
            nu = min(a, b, 1.0 / a if a else 1.0, 1.0 / b if b else 1.0)
        if rho0 is None:
            rho0 = min(rho, 1.0 / rho)
        return cls(lambda x: rho, lambda x: a, lambda x: b, nu, rho0)


def _zero_field(*args):
    return 0.0


@dataclass(frozen=True)
class ProblemSpec:
    length: float
    horizon: float
    alpha: float
    material: MaterialModel
    forcing: Callable = _zero_field
    initial_displacement: Callable = _zero_field
    initial_velocity: Callable = _zero_field

    def __post_init__(self):
        if not self.length > 0 or not self.horizon > 0:
            raise DomainError("length and horizon must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")

    def scaled(self, s: float) -> "ProblemSpec":
        """Same problem with (f, g, h) multiplied by ``s``."""
        f, g, h = self.forcing, self.initial_displacement, self.initial_velocity
        return ProblemSpec(
            self.length,
            self.horizon,
            self.alpha,
            self.material,
            lambda x, t: s * _field(f, x, t),
            lambda x: s * _field(g, x),
            lambda x: s * _field(h, x),
        )


@dataclass(frozen=True, eq=False)
class GalerkinBasis:
    kind: str
    m: int
    grid: SpaceGrid

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ConfigError(f"unknown basis kind {self.kind!r}; expected one of {BASIS_KINDS}")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"basis dimension must be a positive integer, got {self.m!r}")
        if self.kind == "sine_spectral" and self.grid.n_cells < 4 * self.m:
            raise ConfigError(
                f"grid with {self.grid.n_cells} cells under-resolves mode {self.m}; "
                f"need at least {4 * self.m} cells (8 per wavelength)"
            )
        if self.kind == "p1_fem" and self.m != self.grid.n_cells - 1:
            raise ConfigError(
                f"p1_fem dimension must equal n_cells - 1 = {self.grid.n_cells - 1}, got {self.m}"
            )

    def evaluate(self, x) -> np.ndarray:
        """Basis values, shape ``(m, len(x))``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        L = self.grid.length
        if self.kind == "sine_spectral":
            k = np.arange(1, self.m + 1)[:, None]
            return np.sqrt(2.0 / L) * np.sin(k * np.pi * x[None, :] / L)
        nodes = self.grid.nodes[1:-1][:, None]
        return np.clip(1.0 - np.abs(x[None, :] - nodes) / self.grid.h, 0.0, None)

    def derivative(self, x) -> np.ndarray:
        """Basis derivatives, shape ``(m, len(x))``; one-sided at P1 kinks."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        L = self.grid.length
        if self.kind == "sine_spectral":
            k = np.arange(1, self.m + 1)[:, None]
            return np.sqrt(2.0 / L) * (k * np.pi / L) * np.cos(k * np.pi * x[None, :] / L)
        h = self.grid.h
        d = x[None, :] - self.grid.nodes[1:-1][:, None]
        return np.where((d > -h) & (d <= 0), 1.0 / h, 0.0) + np.where((d > 0) & (d < h), -1.0 / h, 0.0)

    @cached_property
    def tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(points, weights, values, derivatives)`` at the quadrature points."""
        x, w = self.grid.quadrature
        return x, w, self.evaluate(x), self.derivative(x)

    def weighted_gram(self, coef: np.ndarray, derivative: bool = False) -> np.ndarray:
        _, w, phi, dphi = self.tables
        b = dphi if derivative else phi
        out = (b * (w * coef)) @ b.T
        return 0.5 * (out + out.T)

    def project_load(self, values: np.ndarray) -> np.ndarray:
        """``(v, w_k)`` for samples ``v`` at the quadrature points (last axis)."""
        _, w, phi, _ = self.tables
        return phi @ (w[:, None] * values) if values.ndim == 2 else phi @ (w * values)

    def synthesize(self, coeffs: np.ndarray, x) -> np.ndarray:
        """Field values from coefficients of shape ``(m,)`` or ``(m, n)``."""
        return np.tensordot(np.asarray(coeffs, dtype=float), self.evaluate(x), axes=(0, 0))


def build_basis(kind: str, m: int, space_grid: SpaceGrid) -> GalerkinBasis:
    return GalerkinBasis(kind, m, space_grid)


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    message: str
    witness: float | None = None


@dataclass(frozen=True)
class HypothesisReport:
    checks: tuple[HypothesisCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[HypothesisCheck]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _bound_check(name, label, x, values, lo, hi) -> HypothesisCheck:
    bad = ~np.isfinite(values) | (values < lo) | (values > hi)
    if not np.any(bad):
        return HypothesisCheck(name, True, f"{label} within [{lo:.6g}, {hi:.6g}]")
    # The worst offender is the witness.
    excess = np.where(np.isfinite(values), np.maximum(lo - values, values - hi), np.inf)
    i = int(np.argmax(excess))
    return HypothesisCheck(
        name, False, f"{label}({x[i]:.6g}) = {values[i]:.6g} outside [{lo:.6g}, {hi:.6g}]", float(x[i])
    )


def verify_hypotheses(spec: ProblemSpec, n_samples: int = 2001, extra_points=None) -> HypothesisReport:
    """Sample H1 (ellipticity of a and b), H2 (density bounds) and H3 (data)."""
    x = np.linspace(0.0, spec.length, n_samples)
    if extra_points is not None:
        x = np.union1d(x, np.asarray(extra_points, dtype=float))
    mat = spec.material
    nu, r0 = mat.nu, mat.rho0
    a_chk = _bound_check("H1", "a_coef", x, _field(mat.a_coef, x), nu, 1.0 / nu)
    b_chk = _bound_check("H1", "b_coef", x, _field(mat.b_coef, x), nu, 1.0 / nu)
    h1 = a_chk if not a_chk.passed else b_chk
    if a_chk.passed and b_chk.passed:
        h1 = HypothesisCheck("H1", True, f"a_coef, b_coef within [{nu:.6g}, {1 / nu:.6g}]")
    h2 = _bound_check("H2", "rho", x, _field(mat.rho, x), r0, 1.0 / r0)

    g = _field(spec.initial_displacement, x)
    h = _field(spec.initial_velocity, x)
    t = np.linspace(0.0, spec.horizon, 65)
    f = _field(spec.forcing, x[:, None], t[None, :])
    scale = max(1.0, float(np.max(np.abs(g[np.isfinite(g)]), initial=0.0)))
    if not np.all(np.isfinite(g)) or not np.all(np.isfinite(h)) or not np.all(np.isfinite(f)):
        h3 = HypothesisCheck("H3", False, "forcing or initial data not finite on the sample grid")
    elif abs(g[0]) > 1e-12 * scale:
        h3 = HypothesisCheck("H3", False, f"initial displacement g(0) = {g[0]:.6g} != 0", 0.0)
    elif abs(g[-1]) > 1e-12 * scale:
        h3 = HypothesisCheck("H3", False, f"initial displacement g(L) = {g[-1]:.6g} != 0", float(spec.length))
    else:
        h3 = HypothesisCheck("H3", True, "f, h finite; g vanishes at both ends")
    return HypothesisReport((h1, h2, h3))


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """Matrices and data of ``M d'' + V cD^alpha d + K d = F``."""

    basis: GalerkinBasis
    tgrid: TimeGrid
    alpha: float
    M: np.ndarray
    K: np.ndarray
    V: np.ndarray
    gram: np.ndarray
    stiffness0: np.ndarray
    F: np.ndarray
    c: np.ndarray
    d0: np.ndarray
    h_load: np.ndarray
    rho_h_load: np.ndarray
    hypotheses: HypothesisReport | None = field(default=None, compare=False)

    @property
    def m(self) -> int:
        return self.M.shape[0]

    @classmethod
    def from_matrices(cls, tgrid: TimeGrid, alpha: float, M, K, V, F=None, c=None, d0=None) -> "GalerkinSystem":
        """System without a spatial basis, e.g. a scalar fractional ODE."""
        M, K, V = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (M, K, V))
        m = M.shape[0]
        F = np.zeros((m, tgrid.n_nodes)) if F is None else np.atleast_2d(np.asarray(F, dtype=float))
        if F.shape != (m, tgrid.n_nodes):
            F = np.broadcast_to(F, (m, tgrid.n_nodes)).copy()
        c = np.zeros(m) if c is None else np.atleast_1d(np.asarray(c, dtype=float))
        d0 = np.zeros(m) if d0 is None else np.atleast_1d(np.asarray(d0, dtype=float))
        eye = np.eye(m)
        return cls(None, tgrid, float(alpha), M, K, V, eye, eye, F, c, d0, d0.copy(), M @ d0)

    def with_load(self, F=None, c=None, d0=None) -> "GalerkinSystem":
        """Copy with replaced data; loads derived from h are rescaled consistently only if d0 is unchanged."""
        return GalerkinSystem(
            self.basis,
            self.tgrid,
            self.alpha,
            self.M,
            self.K,
            self.V,
            self.gram,
            self.stiffness0,
            self.F if F is None else np.asarray(F, dtype=float),
            self.c if c is None else np.asarray(c, dtype=float),
            self.d0 if d0 is None else np.asarray(d0, dtype=float),
            self.h_load if d0 is None else self.gram @ np.asarray(d0, dtype=float),
            self.rho_h_load if d0 is None else self.M @ np.asarray(d0, dtype=float),
            self.hypotheses,
        )

    def export_csv(self, directory) -> list:
        from pathlib import Path

        directory = Path(directory)
        return [
            matrix_to_csv(directory / f"{name}.csv", getattr(self, name), prefix="col")
            for name in ("M", "K", "V", "F")
        ]


def assemble(spec: ProblemSpec, basis: GalerkinBasis, tgrid: TimeGrid, enforce: bool = True) -> GalerkinSystem:
    """Assemble mass, stiffness, viscous matrices, loads and projected data.

    With ``enforce=False`` bound violations of H1/H2 are recorded but not
    raised (used for the inviscid limit b = 0). Non-finite data always
    raises :class:`DataError`.
    """
    if abs(basis.grid.length - spec.length) > 1e-12 * spec.length:
        raise AssemblyError("basis grid length differs from the problem length")
    x, w, phi, dphi = basis.tables
    report = verify_hypotheses(spec, extra_points=x)
    mat = spec.material
    rho = _field(mat.rho, x)
    a = _field(mat.a_coef, x)
    b = _field(mat.b_coef, x)
    g = _field(spec.initial_displacement, x)
    h = _field(spec.initial_velocity, x)
    f = _field(spec.forcing, x[:, None], tgrid.nodes[None, :])
    for label, arr in (("rho", rho), ("a_coef", a), ("b_coef", b), ("g", g), ("h", h), ("f", f)):
        if not np.all(np.isfinite(arr)):
            raise DataError(f"non-finite values in field {label}", hypothesis="data")
    if enforce and not report.passed:
        bad = report.failures()[0]
        raise HypothesisError(f"{bad.name} violated: {bad.message}", hypothesis=bad.name, witness=bad.witness)

    M = basis.weighted_gram(rho)
    K = basis.weighted_gram(a, derivative=True)
    V = basis.weighted_gram(b, derivative=True)
    gram = basis.weighted_gram(np.ones_like(x))
    stiffness0 = basis.weighted_gram(np.ones_like(x), derivative=True)
    F = basis.project_load(f)
    h_load = basis.project_load(h)
    rho_h_load = basis.project_load(rho * h)
    try:
        c = np.linalg.solve(gram, basis.project_load(g))
        d0 = np.linalg.solve(gram, h_load)
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError(f"singular mass or Gram matrix: {exc}") from exc
    return GalerkinSystem(basis, tgrid, spec.alpha, M, K, V, gram, stiffness0, F, c, d0, h_load, rho_h_load, report)
