"""Exact Lagrangian maps of the alternating shear flow (pure transport, no diffusion).

Within a leg the velocity is a steady shear, so the flow map over a fraction
``f`` of leg ``m`` is explicit:

    horizontal:  (x1, x2) -> (x1 + f * psi_m(x2), x2)
    vertical:    (x1, x2) -> (x1, x2 + f * psi_m(x1))

Everything here is a composition of these maps; no time stepping is involved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HorizonExceeded
from .flow import FlowRealization, shear_speed
from .spectral import SpectralField, check_resolution, grid

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TrigPolynomial:
    """Real trigonometric polynomial ``sum_k c_k exp(i k.x)``.

    ``modes`` is an (n, 2) integer array and ``coefs`` the matching complex
    amplitudes; the set is closed under ``k -> -k`` with conjugate coefficients.
    """

    modes: np.ndarray
    coefs: np.ndarray

    @classmethod
    def from_modes(cls, amplitudes: dict) -> "TrigPolynomial":
        """Build from ``{(k1, k2): c}``; missing conjugate partners are filled in."""
        table = {}
        for k, c in amplitudes.items():
            k = (int(k[0]), int(k[1]))
            table[k] = table.get(k, 0) + complex(c)
        for k, c in list(table.items()):
            nk = (-k[0], -k[1])
            if nk not in amplitudes:
                table[nk] = np.conj(c)
        for k, c in table.items():
            nk = (-k[0], -k[1])
            if not np.isclose(table[nk], np.conj(c)):
                raise ValueError(f"coefficients at {k} and {nk} are not conjugate")
        keys = sorted(table)
        return cls(np.array(keys, dtype=np.int64).reshape(-1, 2), np.array([table[k] for k in keys], dtype=complex))

    @classmethod
    def sin_x1(cls) -> "TrigPolynomial":
        return cls.from_modes({(1, 0): -0.5j})

    @classmethod
    def random(cls, seed: int, k_max: int, normalize: bool = True) -> "TrigPolynomial":
        """Mean-zero, iid Gaussian coefficients on ``0 < |k| <= k_max``."""
        rng = np.random.default_rng(seed)
        amps = {}
        for k1 in range(-k_max, k_max + 1):
            for k2 in range(-k_max, k_max + 1):
                if (k1, k2) <= (0, 0) or k1 * k1 + k2 * k2 > k_max * k_max:
                    continue
                amps[(k1, k2)] = complex(rng.standard_normal(), rng.standard_normal())
        p = cls.from_modes(amps)
        if normalize:
            p = p.scaled(1.0 / p.l2_norm())
        return p

    @property
    def k_max(self) -> float:
        return float(np.sqrt((self.modes**2).sum(axis=1)).max())

    @property
    def mean_zero(self) -> bool:
        return not any((k == 0).all() and abs(c) > 0 for k, c in zip(self.modes, self.coefs))

    def scaled(self, a: float) -> "TrigPolynomial":
        return TrigPolynomial(self.modes, self.coefs * a)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefs) ** 2)))

    def sobolev_norm(self, s: float) -> float:
        ksq = (self.modes**2).sum(axis=1).astype(float)
        nz = ksq > 0
        return float(np.sqrt(np.sum(ksq[nz] ** s * np.abs(self.coefs[nz]) ** 2)))

    def __call__(self, x1, x2) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = np.zeros(np.broadcast(x1, x2).shape)
        # pair k with -k: c e^{ik.x} + conj(c) e^{-ik.x} = 2 Re(c e^{ik.x})
        for (k1, k2), c in zip(self.modes, self.coefs):
            if (k1, k2) < (0, 0):
                continue
            w = 1.0 if k1 == 0 and k2 == 0 else 2.0
            out += w * (c * np.exp(1j * (k1 * x1 + k2 * x2))).real
        return out

    def to_field(self, M: int) -> SpectralField:
        return SpectralField.from_function(self, M)


def leg_map(r: FlowRealization, leg: int, x, fraction: float = 1.0, inverse: bool = False) -> np.ndarray:
    """Advance points ``x`` (shape ``(..., 2)``) through a fraction of leg ``leg``."""
    x = np.array(x, dtype=float)
    step = -fraction if inverse else fraction
    if leg % 2 == 0:
        x[..., 0] = np.mod(x[..., 0] + step * shear_speed(r, leg, x[..., 1]), TWO_PI)
    else:
        x[..., 1] = np.mod(x[..., 1] + step * shear_speed(r, leg, x[..., 0]), TWO_PI)
    return x


def _pieces(start: float, stop: float):
    """Split [start, stop] at integer leg boundaries into (leg, fraction) pieces."""
    out = []
    a = start
    while a < stop - 1e-15:
        leg = int(np.floor(a + 1e-12))
        b = min(stop, leg + 1.0)
        out.append((leg, b - a))
        a = b
    return out


def _check_horizon(r, stop):
    if stop > r.horizon + 1e-12:
        raise HorizonExceeded(f"time {stop} beyond horizon {r.horizon}")


def flow_map(r: FlowRealization, t: float, x, start: float = 0.0) -> np.ndarray:
    """Flow map from time ``start`` to ``start + t`` applied to ``x``."""
    _check_horizon(r, start + t)
    x = np.array(x, dtype=float)
    for leg, frac in _pieces(start, start + t):
        x = leg_map(r, leg, x, frac)
    return x


def inverse_flow_map(r: FlowRealization, t: float, x, start: float = 0.0) -> np.ndarray:
    """Inverse of :func:`flow_map`: the map from ``start + t`` back to ``start``."""
    _check_horizon(r, start + t)
    x = np.array(x, dtype=float)
    for leg, frac in reversed(_pieces(start, start + t)):
        x = leg_map(r, leg, x, frac, inverse=True)
    return x


def lipschitz_product_bound(r: FlowRealization, n_legs: int) -> float:
    """``(1 + 3 A N |phi'|_inf) ** n_legs``, a Lipschitz bound for ``n_legs`` legs."""
    return float((1.0 + r.grad_sup) ** n_legs)


def pullback_solution(r: FlowRealization, n: int, init: TrigPolynomial, M: int, s: int = 0) -> SpectralField:
    """Samples of the transported field ``init(Phi_{s,s+n}^{-1}(x))`` on the M x M grid.

    Exact at the nodes; the only error is what the final sampling aliases.
    """
    M = check_resolution(M)
    _check_horizon(r, s + n)
    x1, x2 = grid(M)
    pts = np.stack([x1, x2], axis=-1)
    pts = inverse_flow_map(r, float(n), pts, start=float(s))
    return SpectralField(init(pts[..., 0], pts[..., 1]))
