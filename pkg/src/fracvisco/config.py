"""Run configuration: TOML with dotted sections and safe field expressions.

Example::

    [problem]
    length = 1.0
    horizon = 1.0
    alpha = 0.5
    rho = "1"
    a = "1 + 0.5*sin(2*pi*x)"
    b = "1"
    nu = 0.4
    rho0 = 0.5
    f = "0"
    g = "sin(pi*x)"
    h = "0"

    [discretization]
    basis = "sine_spectral"
    m = 8
    n_cells = 64
    n_steps = 512

Field expressions are arithmetic over ``x`` (and ``t`` for ``f``) with the
functions in :data:`FUNCTIONS` and the constants ``pi`` and ``e``. Every
error raised while reading a file carries the line of the offending key.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import tomli

from .assembly import BASIS_KINDS, GalerkinBasis, MaterialModel, ProblemSpec, SpaceGrid, build_basis
from .errors import ConfigError, FracViscoError
from .fracops import TimeGrid
from .volterra import SCHEMES, SolverConfig

__all__ = ["FieldExpr", "RunConfig", "load_config", "parse_config", "FUNCTIONS"]

FUNCTIONS = {
    name: getattr(np, name)
    for name in (
        "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "sinh", "cosh",
        "arcsin", "arccos", "arctan", "minimum", "maximum", "where", "heaviside",
    )
}
CONSTANTS = {"pi": np.pi, "e": np.e}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Load, ast.Call,
    ast.Compare, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod, ast.USub, ast.UAdd,
    ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq,
)


@dataclass(frozen=True)
class FieldExpr:
    """A validated expression compiled to a vectorized callable."""

    source: str
    variables: tuple[str, ...]
    fn: Callable = field(repr=False, compare=False)

    @classmethod
    def parse(cls, source, variables=("x",), line=None) -> "FieldExpr":
        if isinstance(source, (int, float)) and not isinstance(source, bool):
            source = repr(float(source))
        if not isinstance(source, str):
            raise ConfigError(f"field expression must be a string or number, got {source!r}", line)
        try:
            tree = ast.parse(source.strip(), mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"invalid expression {source!r}: {exc.msg}", line) from None
        for node in ast.walk(tree):
            if not isinstance(node, _ALLOWED_NODES):
                raise ConfigError(f"disallowed construct {type(node).__name__} in {source!r}", line)
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ConfigError(f"only numeric literals are allowed in {source!r}", line)
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords:
                    raise ConfigError(f"unknown function in {source!r}", line)
            elif isinstance(node, ast.Name):
                if node.id not in variables and node.id not in CONSTANTS and node.id not in FUNCTIONS:
                    allowed = ", ".join(variables)
                    raise ConfigError(f"unknown name {node.id!r} in {source!r} (variables: {allowed})", line)
        code = compile(tree, "<field>", "eval")
        namespace = {"__builtins__": {}, **FUNCTIONS, **CONSTANTS}

        def fn(*args):
            return eval(code, namespace, dict(zip(variables, args)))

        return cls(source, tuple(variables), fn)

    def __call__(self, *args):
        return self.fn(*args)


def _key_lines(text: str) -> dict[str, int]:
    """Map dotted key paths to their 1-based line numbers."""
    lines = {}
    section = ""
    header = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\- ]+?)\s*\]")
    key = re.compile(r"^\s*([A-Za-z0-9_.\-]+)\s*=")
    for i, raw in enumerate(text.splitlines(), start=1):
        m = header.match(raw)
        if m:
            section = m.group(1).replace(" ", "")
            lines.setdefault(section, i)
            continue
        m = key.match(raw)
        if m:
            path = f"{section}.{m.group(1)}" if section else m.group(1)
            lines[path] = i
    return lines


_SCHEMA = {
    "problem": {
        "length": float, "horizon": float, "alpha": float, "rho": "x", "a": "x", "b": "x",
        "nu": float, "rho0": float, "f": "xt", "g": "x", "h": "x", "enforce_hypotheses": bool,
    },
    "discretization": {"basis": str, "m": int, "n_cells": int, "n_steps": int},
    "solver": {
        "scheme": str, "picard_tol": float, "picard_max_iter": int, "picard_window": int,
        "regularity_note": bool,
    },
    "output": {"directory": str, "reports": list},
    "converge": {"study": str, "levels": int},
}
_DEFAULTS = {
    "problem": {
        "length": 1.0, "horizon": 1.0, "alpha": 0.5, "rho": "1", "a": "1", "b": "1",
        "nu": 0.5, "rho0": 0.5, "f": "0", "g": "0", "h": "0", "enforce_hypotheses": True,
    },
    "discretization": {"basis": "sine_spectral", "m": 8, "n_cells": 64, "n_steps": 256},
    "solver": {
        "scheme": "marching", "picard_tol": 1e-12, "picard_max_iter": 500, "picard_window": 32,
        "regularity_note": False,
    },
    "output": {"directory": "out", "reports": ["solution", "energy", "apriori", "summary"]},
    "converge": {"study": "temporal", "levels": 3},
}
REPORTS = ("solution", "energy", "apriori", "matrices", "summary")
STUDIES = ("temporal", "spatial", "space_time")


@dataclass(frozen=True)
class RunConfig:
    problem: dict
    discretization: dict
    solver: dict
    output: dict
    converge: dict
    fields: dict
    source: str = ""

    def material(self) -> MaterialModel:
        p = self.problem
        return MaterialModel(self.fields["rho"], self.fields["a"], self.fields["b"], p["nu"], p["rho0"])

    def spec(self) -> ProblemSpec:
        p = self.problem
        return ProblemSpec(
            p["length"], p["horizon"], p["alpha"], self.material(),
            self.fields["f"], self.fields["g"], self.fields["h"],
        )

    def time_grid(self, n_steps: int | None = None) -> TimeGrid:
        return TimeGrid(0.0, self.problem["horizon"], n_steps or self.discretization["n_steps"])

    def basis(self, n_cells: int | None = None, m: int | None = None) -> GalerkinBasis:
        d = self.discretization
        n_cells = n_cells or d["n_cells"]
        if d["basis"] == "p1_fem":
            m = n_cells - 1
        return build_basis(d["basis"], m or d["m"], SpaceGrid(self.problem["length"], n_cells))

    def solver_config(self) -> SolverConfig:
        s = self.solver
        return SolverConfig(
            s["scheme"], s["picard_tol"], s["picard_max_iter"], s["picard_window"], s["regularity_note"]
        )


def _coerce(value, kind, where, line):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}", line)
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}", line)
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false, got {value!r}", line)
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}", line)
        return value
    if kind is list:
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{where} must be a list of strings", line)
        return value
    return value


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed configuration: {exc}", int(m.group(1)) if m else None) from None
    lines = _key_lines(text)
    sections = {}
    for name, value in raw.items():
        if name not in _SCHEMA:
            raise ConfigError(f"unknown section [{name}]", lines.get(name))
        if not isinstance(value, dict):
            raise ConfigError(f"[{name}] must be a table", lines.get(name))
    fields = {}
    for name, schema in _SCHEMA.items():
        given = raw.get(name, {})
        merged = dict(_DEFAULTS[name])
        for key, value in given.items():
            where = f"{name}.{key}"
            line = lines.get(where)
            if key not in schema:
                raise ConfigError(f"unknown key {where}", line)
            kind = schema[key]
            if kind in ("x", "xt"):
                fields[key] = FieldExpr.parse(value, tuple(kind), line)
                merged[key] = fields[key].source
            else:
                merged[key] = _coerce(value, kind, where, line)
        sections[name] = merged
    for key, kind in _SCHEMA["problem"].items():
        if kind in ("x", "xt") and key not in fields:
            fields[key] = FieldExpr.parse(_DEFAULTS["problem"][key], tuple(kind))

    def check(cond, where, message):
        if not cond:
            raise ConfigError(f"{where} {message}", lines.get(where))

    p, d, s, o, c = (sections[k] for k in ("problem", "discretization", "solver", "output", "converge"))
    check(p["length"] > 0, "problem.length", "must be positive")
    check(p["horizon"] > 0, "problem.horizon", "must be positive")
    check(0 < p["alpha"] < 1, "problem.alpha", "must lie in (0, 1)")
    check(0 < p["nu"] <= 1, "problem.nu", "must lie in (0, 1]")
    check(0 < p["rho0"] <= 1, "problem.rho0", "must lie in (0, 1]")
    check(d["basis"] in BASIS_KINDS, "discretization.basis", f"must be one of {BASIS_KINDS}")
    check(d["m"] >= 1, "discretization.m", "must be >= 1")
    check(d["n_cells"] >= 2, "discretization.n_cells", "must be >= 2")
    check(d["n_steps"] >= 4, "discretization.n_steps", "must be >= 4")
    if d["basis"] == "sine_spectral":
        check(d["n_cells"] >= 4 * d["m"], "discretization.n_cells", "must be at least 4*m for the sine basis")
    check(s["scheme"] in SCHEMES, "solver.scheme", f"must be one of {SCHEMES}")
    check(s["picard_tol"] > 0, "solver.picard_tol", "must be positive")
    check(s["picard_max_iter"] >= 1, "solver.picard_max_iter", "must be >= 1")
    check(s["picard_window"] >= 1, "solver.picard_window", "must be >= 1")
    for r in o["reports"]:
        check(r in REPORTS, "output.reports", f"entry {r!r} must be one of {REPORTS}")
    check(c["study"] in STUDIES, "converge.study", f"must be one of {STUDIES}")
    check(c["levels"] >= 3, "converge.levels", "must be >= 3")
    return RunConfig(p, d, s, o, c, fields, text)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from None
    try:
        return parse_config(text)
    except ConfigError:
        raise
    except FracViscoError as exc:
        raise ConfigError(str(exc)) from None
