"""Shear profiles on [0, 2pi] and their derivative-nondegeneracy certification.

A profile is a function ``phi`` on ``[0, 2pi]`` vanishing at both ends, extended
by zero to the whole circle.  The alternating shear flow places rescaled copies
``phi(N x)`` of it on intervals of length ``2pi/N``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .errors import DegenerateProfile

TWO_PI = 2.0 * np.pi

# dense grid used for norms of profiles without closed forms
_NORM_GRID = 2**16 + 1


@dataclass(frozen=True)
class ShearProfile:
    """Immutable profile with derivative oracles.

    All callables are vectorized over numpy arrays of points in ``[0, 2pi]``.
    ``c1_norm`` is ``sup|phi| + sup|phi'|``; ``d1_sup`` is ``sup|phi'|`` alone,
    which is what the velocity-gradient bounds use.
    """

    name: str
    eval: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]
    d3: Callable[[np.ndarray], np.ndarray]
    sup_norm: float
    l1_norm: float
    d1_sup: float
    c1_norm: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "c1_norm", self.sup_norm + self.d1_sup)


@dataclass(frozen=True)
class AssumptionReport:
    a1_ok: bool
    a2_ok: bool
    zeros_d1: list
    zeros_d2: list
    min_d2_at_zeros_d1: float
    min_d3_at_zeros_d2: float


def _dense_norms(f, d1):
    x = np.linspace(0.0, TWO_PI, _NORM_GRID)
    v = np.abs(f(x))
    return float(v.max()), float(simpson(v, x=x)), float(np.abs(d1(x)).max())


def make_cosine_bump() -> ShearProfile:
    """The default profile ``(1 - cos x)/2`` with exact derivatives and norms."""
    return ShearProfile(
        name="cosine_bump",
        eval=lambda x: 0.5 * (1.0 - np.cos(x)),
        d1=lambda x: 0.5 * np.sin(x),
        d2=lambda x: 0.5 * np.cos(x),
        d3=lambda x: -0.5 * np.sin(x),
        sup_norm=1.0,
        l1_norm=np.pi,
        d1_sup=0.5,
    )


def make_quartic_bump() -> ShearProfile:
    """``x^2 (2pi - x)^2 / pi^4``, normalized so its maximum (at pi) is 1."""
    c = np.pi**-4
    L = TWO_PI

    def f(x):
        return c * x**2 * (L - x) ** 2

    def d1(x):
        return c * 2.0 * x * (L - x) * (L - 2.0 * x)

    def d2(x):
        return c * (2.0 * L**2 - 12.0 * L * x + 12.0 * x**2)

    def d3(x):
        return c * (-12.0 * L + 24.0 * x)

    sup, l1, lip = _dense_norms(f, d1)
    return ShearProfile("quartic_bump", f, d1, d2, d3, sup, l1, lip)


def load_tabulated(path, name: str | None = None) -> ShearProfile:
    """Load a profile from CSV columns ``x, phi, d1, d2, d3`` on a uniform x-grid.

    Values between nodes are linearly interpolated, column by column.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    try:
        data = np.array([[float(v) for v in r[:5]] for r in rows], dtype=float)
    except ValueError:
        # header row
        data = np.array([[float(v) for v in r[:5]] for r in rows[1:]], dtype=float)
    if data.ndim != 2 or data.shape[1] != 5 or len(data) < 3:
        raise ValueError(f"{path}: expected at least 3 rows of 5 columns")
    x = data[:, 0]
    steps = np.diff(x)
    if not np.allclose(steps, steps[0], rtol=1e-8, atol=1e-12):
        raise ValueError(f"{path}: x-grid is not uniform")

    def interp(col):
        ys = data[:, col].copy()
        return lambda p: np.interp(p, x, ys)

    f, d1 = interp(1), interp(2)
    sup = float(np.abs(data[:, 1]).max())
    l1 = float(simpson(np.abs(data[:, 1]), x=x))
    lip = float(np.abs(data[:, 2]).max())
    return ShearProfile(name or str(path), f, d1, interp(3), interp(4), sup, l1, lip)


PROFILES = {
    "cosine_bump": make_cosine_bump,
    "quartic_bump": make_quartic_bump,
}


def get_profile(name: str) -> ShearProfile:
    """Resolve a profile by registry name, or load it from a CSV path."""
    if name in PROFILES:
        return PROFILES[name]()
    if name.endswith(".csv"):
        return load_tabulated(name)
    raise KeyError(f"unknown profile {name!r}; known: {sorted(PROFILES)}")


def _roots(g, grid_points, tol):
    """Roots of ``g`` on [0, 2pi]: sign-change scan followed by bisection.

    Grid values with ``|g| <= tol`` count as roots too, which is how zeros that
    sit exactly on a node (including the endpoints) are caught.
    """
    x = np.linspace(0.0, TWO_PI, grid_points + 1)
    v = g(x)
    roots = []
    on_node = np.abs(v) <= tol
    roots.extend(x[on_node].tolist())
    s = np.sign(v)
    s[on_node] = 0.0
    for j in np.flatnonzero(s[:-1] * s[1:] < 0):
        a, b = x[j], x[j + 1]
        ga = v[j]
        while b - a > tol:
            m = 0.5 * (a + b)
            gm = g(np.array(m))
            if gm == 0:
                a = b = m
                break
            if np.sign(gm) == np.sign(ga):
                a, ga = m, gm
            else:
                b = m
        roots.append(0.5 * (a + b))
    roots.sort()
    # collapse a node root and an adjacent bracketed root found twice
    out = []
    for r in roots:
        if not out or r - out[-1] > 10 * TWO_PI / grid_points:
            out.append(float(r))
    return out


def check_assumptions(p: ShearProfile, grid_points: int = 10_000, tol: float = 1e-10) -> AssumptionReport:
    """Certify that phi' and phi'' have finitely many, non-degenerate zeros."""
    if grid_points < 1000:
        raise ValueError("grid_points must be at least 1000")
    z1 = _roots(p.d1, grid_points, tol)
    z2 = _roots(p.d2, grid_points, tol)
    d2_at = np.abs(p.d2(np.asarray(z1))) if z1 else np.array([np.inf])
    d3_at = np.abs(p.d3(np.asarray(z2))) if z2 else np.array([np.inf])
    bad = [z for z, v in zip(z1, d2_at) if v < tol]
    if bad:
        raise DegenerateProfile(f"phi' and phi'' vanish together near x = {bad}")
    m2, m3 = float(d2_at.min()), float(d3_at.min())
    return AssumptionReport(
        a1_ok=bool(m2 > 0),
        a2_ok=bool(m3 > 0),
        zeros_d1=z1,
        zeros_d2=z2,
        min_d2_at_zeros_d1=m2,
        min_d3_at_zeros_d2=m3,
    )


def eval_scaled(p: ShearProfile, n_kappa: int, x) -> np.ndarray:
    """``phi(N x)`` on the support ``[0, 2pi/N]`` (x taken mod 2pi), zero elsewhere."""
    y = n_kappa * np.mod(x, TWO_PI)
    inside = y <= TWO_PI
    return np.where(inside, p.eval(np.where(inside, y, 0.0)), 0.0)


def eval_scaled_d1(p: ShearProfile, n_kappa: int, x) -> np.ndarray:
    """Derivative of :func:`eval_scaled` in x."""
    y = n_kappa * np.mod(x, TWO_PI)
    inside = y <= TWO_PI
    return np.where(inside, n_kappa * p.d1(np.where(inside, y, 0.0)), 0.0)
