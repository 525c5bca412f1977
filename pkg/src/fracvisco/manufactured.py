"""Manufactured solution ``u*(x, t) = sin(pi x / L) (1 + t^2)``.

The forcing is obtained by applying the strong operator to ``u*`` with the
closed form ``cD^alpha t^2 = 2 t^(2-alpha) / Gamma(3-alpha)``. Coefficient
derivatives are taken by fourth-order central differences so arbitrary
coefficient callables can be used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import GalerkinBasis, MaterialModel, ProblemSpec, _field
from .volterra import FieldHistory

__all__ = ["ManufacturedProblem"]


def _derivative(fn, x: np.ndarray, step: float) -> np.ndarray:
    f = lambda s: _field(fn, s)  # noqa: E731
    return (8.0 * (f(x + step) - f(x - step)) - (f(x + 2 * step) - f(x - 2 * step))) / (12.0 * step)


@dataclass(frozen=True)
class ManufacturedProblem:
    length: float
    horizon: float
    alpha: float
    material: MaterialModel

    @property
    def wavenumber(self) -> float:
        return math.pi / self.length

    def exact(self, x, t):
        return np.sin(self.wavenumber * np.asarray(x)) * (1.0 + np.asarray(t) ** 2)

    def forcing(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        k = self.wavenumber
        mat = self.material
        step = 1e-3 * self.length
        s, ds, d2s = np.sin(k * x), k * np.cos(k * x), -k * k * np.sin(k * x)
        elastic = _derivative(mat.a_coef, x, step) * ds + _field(mat.a_coef, x) * d2s
        viscous = _derivative(mat.b_coef, x, step) * ds + _field(mat.b_coef, x) * d2s
        caputo = 2.0 * t ** (2.0 - self.alpha) / math.gamma(3.0 - self.alpha)
        return _field(mat.rho, x) * s * 2.0 - elastic * (1.0 + t * t) - viscous * caputo

    def spec(self) -> ProblemSpec:
        k = self.wavenumber
        return ProblemSpec(
            self.length,
            self.horizon,
            self.alpha,
            self.material,
            self.forcing,
            lambda x: np.sin(k * np.asarray(x)),
            lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        )

    def l2_errors(self, history: FieldHistory, basis: GalerkinBasis) -> np.ndarray:
        """``||u_h(t_j) - u*(t_j)||_{L2}`` at every node."""
        x, w, phi, _ = basis.tables
        approx = history.coeffs.T @ phi
        exact = self.exact(x[None, :], history.tgrid.nodes[:, None])
        return np.sqrt(np.sum(w * (approx - exact) ** 2, axis=1))
