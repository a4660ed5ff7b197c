"""Closed-form dissipation-time bounds on the torus [0, 2pi]^2 (lambda_1 = 1).

Every function is pure.  ``grad_u_sup`` always means the space-time sup of the
velocity gradient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NoRoot

LAMBDA_1 = 1.0
TAU_CAP = 1e6


@dataclass(frozen=True)
class RateParams:
    """Mixing rate of the form ``h(s, t) = D (1 + s**p_poly) exp(-gamma t)``."""

    D: float
    gamma: float
    p_poly: float = 0.0

    def __post_init__(self):
        if not (self.D >= 1 and self.gamma > 0 and self.p_poly >= 0):
            raise ValueError(f"invalid rate parameters {self}")
        if not all(math.isfinite(v) for v in (self.D, self.gamma, self.p_poly)):
            raise ValueError(f"non-finite rate parameters {self}")

    def __call__(self, s, t):
        return self.D * (1.0 + np.power(s, self.p_poly)) * np.exp(-self.gamma * np.asarray(t))

    def H(self, T: float) -> float:
        """``sup_{0 <= s <= T/3 <= t <= T} h(s, t)``, attained at s = t = T/3."""
        return float(self.D * (1.0 + (T / 3.0) ** self.p_poly) * math.exp(-self.gamma * T / 3.0))


@dataclass(frozen=True)
class PropQuantities:
    H_of_T: Callable[[float], float]
    tau_kappa: float
    A_kappa: float
    B_kappa: float
    clamped: bool


def poincare_bound(kappa: float) -> float:
    """``log 2 / (lambda_1 kappa)``: no mean-zero datum survives longer at half norm."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    return math.log(2.0) / (LAMBDA_1 * kappa)


def no_enhancement_constant(C0: float) -> float:
    """Constant ``C1`` in ``t_dis >= C1/kappa`` for a stream function bounded by ``C0 kappa``."""
    if not C0 > 0:
        raise ValueError("C0 must be positive")
    return min(math.log(4.0 / 3.0) / 2.0, 1.0 / (8.0 * C0 * C0))


def _sup_H(h, T, n=257):
    # sup over the triangle 0 <= s <= T/3 <= t <= T of a tabulated rate
    s = np.linspace(0.0, T / 3.0, n)
    t = np.linspace(T / 3.0, T, n)
    S, Tt = np.meshgrid(s, t, indexing="ij")
    return float(np.max(h(S, Tt)))


def prop_quantities(rate, grad_u_sup: float, kappa: float) -> PropQuantities:
    """Time scale ``tau_kappa`` and decay fraction ``A_kappa`` for a mixing rate.

    ``rate`` is a :class:`RateParams` or any callable ``h(s, t)``.  ``tau_kappa``
    is the first ``t >= 2`` with ``t**-2 H(t) <= 2**8 (grad_u_sup + 1) kappa``.
    """
    if isinstance(rate, RateParams):
        H = rate.H
    else:
        def H(T):
            return _sup_H(rate, T)
    g1 = grad_u_sup + 1.0
    level = 2.0**8 * g1 * kappa

    def f(t):
        return H(t) / (t * t) - level

    if f(2.0) <= 0:
        tau, clamped = 2.0, True
    else:
        # first crossing: coarse geometric scan, then bisection inside the bracket
        ts = np.geomspace(2.0, TAU_CAP, 2000)
        j = next((i for i, t in enumerate(ts) if f(t) <= 0), None)
        if j is None:
            raise NoRoot(f"t^-2 H(t) stays above {level:.3g} on [2, {TAU_CAP:g}]")
        lo, hi = ts[j - 1], ts[j]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * hi:
                break
        tau, clamped = hi, False
    A = 1.0 / (2.0**15 * g1 * tau)
    B = 1.0 / (H(tau) * math.sqrt(3.0 * A / (2.0 * kappa * tau)))
    return PropQuantities(H, tau, A, B, clamped)


def corollary_bound(rate: RateParams, grad_u_sup: float, kappa: float) -> float:
    """Upper bound on ``t_dis^0`` for a flow mixing at rate ``D (1 + s^p) e^{-gamma t}``."""
    g1 = grad_u_sup + 1.0
    p, gam, D = rate.p_poly, rate.gamma, rate.D
    return 2.0**24 * g1 * (
        1.0 + 2.0**24 * (p / gam) ** 4 * g1 + (math.log(D) ** 2 + math.log(kappa) ** 2) / gam**2
    )


def heuristic_bound(rate: RateParams, C_delta: float, delta: float, d: int, kappa: float) -> float:
    """The logarithmic dissipation time ``|log(C_delta D / kappa^(d/2 + delta))| / gamma``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return abs(math.log(C_delta * rate.D) - (d / 2.0 + delta) * math.log(kappa)) / rate.gamma
