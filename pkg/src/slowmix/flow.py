"""Random alternating shear flows on the torus [0, 2pi)^2.

During leg ``m`` (time ``[m, m+1)``) the velocity is a shear: for even ``m``
it is ``(psi_m(x2), 0)``, for odd ``m`` it is ``(0, psi_m(x1))``, with

    psi_m(c) = A * sum_i phi_N(c - alpha_i^m),   i = 0 .. 2N-1,

``phi_N(y) = phi(N y)`` supported on ``[0, 2pi/N]`` and the phase ``alpha_i^m``
uniform on ``[pi i/N, pi (i+1)/N]``.  Phases are a pure function of
``(seed, m, i)`` so realizations never store history.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import HorizonExceeded, InvalidKappa, QuadratureTooCoarse
from .profile import ShearProfile, eval_scaled, eval_scaled_d1, get_profile

TWO_PI = 2.0 * np.pi
MAX_N_KAPPA = 2**20
DEFAULT_AMPLITUDE = 50.0


class LegKind(enum.Enum):
    HORIZONTAL = 0
    VERTICAL = 1

    @classmethod
    def of(cls, leg: int) -> "LegKind":
        return cls(leg % 2)


def n_kappa_of(kappa: float) -> int:
    # the relative slack keeps 1/(1/64) style inputs from rounding up
    return int(math.ceil((1.0 / kappa) * (1.0 - 1e-13)))


def phase_stream(seed: int, leg: int, block: int = 0) -> np.random.Generator:
    """Counter-based generator for leg ``leg``; ``block`` separates batch streams."""
    bitgen = np.random.Philox(key=int(seed) % 2**64, counter=[0, int(leg), int(block), 0])
    return np.random.Generator(bitgen)


@lru_cache(maxsize=4096)
def _leg_phases(seed: int, leg: int, n_kappa: int) -> np.ndarray:
    u = phase_stream(seed, leg).random(2 * n_kappa)
    out = np.pi * (np.arange(2 * n_kappa) + u) / n_kappa
    out.setflags(write=False)
    return out


def shear_from_phases(profile: ShearProfile, n_kappa: int, amplitude: float, phases, coord, derivative=False):
    """Evaluate ``A * sum_i phi_N(coord - phases_i)``.

    Only the three copies whose support can reach ``coord`` are summed.  ``phases``
    is either one array of ``2N`` phases shared by all points, or an array of shape
    ``coord.shape + (2N,)`` giving each point its own realization.
    """
    coord = np.mod(np.asarray(coord, dtype=float), TWO_PI)
    phases = np.asarray(phases, dtype=float)
    n2 = 2 * n_kappa
    j = np.minimum(np.floor(coord * n_kappa / np.pi).astype(np.int64), n2 - 1)
    idx = np.mod(j[..., None] + np.array([-2, -1, 0]), n2)
    if phases.ndim == 1:
        alpha = phases[idx]
    else:
        alpha = np.take_along_axis(phases, idx, axis=-1)
    y = coord[..., None] - alpha
    g = eval_scaled_d1 if derivative else eval_scaled
    return amplitude * g(profile, n_kappa, y).sum(axis=-1)


def contributing_count(profile: ShearProfile, n_kappa: int, phases, coord) -> np.ndarray:
    """Brute-force count of copies with nonzero value at each coordinate."""
    coord = np.mod(np.asarray(coord, dtype=float), TWO_PI)
    vals = eval_scaled(profile, n_kappa, coord[..., None] - np.asarray(phases)[None, :])
    return (vals != 0).sum(axis=-1)


@dataclass(frozen=True)
class FlowRealization:
    """One sampled realization of the alternating shear field.

    Immutable; phases are regenerated on demand from ``seed``.  ``horizon`` is
    the number of unit legs the realization is meant to cover.
    """

    kappa: float
    amplitude: float
    profile: ShearProfile
    seed: int
    horizon: int
    n_kappa: int = field(init=False)

    leg_duration = 1.0
    speed_scale = 1.0

    def __post_init__(self):
        object.__setattr__(self, "n_kappa", n_kappa_of(self.kappa))

    def phases(self, leg: int) -> np.ndarray:
        """The ``2N`` phases of leg ``leg`` (read-only array)."""
        return _leg_phases(int(self.seed), int(leg), self.n_kappa)

    @property
    def horizon_time(self) -> float:
        return float(self.horizon)

    @property
    def grad_sup(self) -> float:
        """Upper bound ``3 A N |phi'|_inf`` for the velocity gradient."""
        return 3.0 * self.amplitude * self.n_kappa * self.profile.d1_sup

    @property
    def sup_bound(self) -> float:
        return 3.0 * self.amplitude * self.profile.sup_norm

    def leg_shear_grid(self, leg: int, M: int) -> np.ndarray:
        """Velocity magnitude of leg ``leg`` at the M uniform grid nodes."""
        return shear_speed(self, leg, TWO_PI * np.arange(M) / M)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kappa": self.kappa,
                "amplitude": self.amplitude,
                "seed": int(self.seed),
                "horizon": int(self.horizon),
                "profile_name": self.profile.name,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "FlowRealization":
        d = json.loads(text)
        return realize(d["kappa"], d["amplitude"], get_profile(d["profile_name"]), d["seed"], d["horizon"])


def realize(kappa: float, amplitude: float, p: ShearProfile, seed: int, horizon: int) -> FlowRealization:
    if not kappa > 0:
        raise InvalidKappa(f"kappa must be positive, got {kappa}")
    if kappa > 0.25:
        raise InvalidKappa(f"kappa must be at most 1/4, got {kappa}")
    if n_kappa_of(kappa) > MAX_N_KAPPA:
        raise InvalidKappa(f"N_kappa = ceil(1/{kappa}) exceeds {MAX_N_KAPPA}")
    if horizon < 2:
        raise ValueError("horizon must be at least 2 legs")
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    return FlowRealization(float(kappa), float(amplitude), p, int(seed), int(horizon))


def shear_speed(r: FlowRealization, leg: int, coord) -> np.ndarray:
    """``psi_leg`` at the transverse coordinate(s) ``coord``."""
    return shear_from_phases(r.profile, r.n_kappa, r.amplitude, r.phases(leg), coord)


def shear_speed_d1(r: FlowRealization, leg: int, coord) -> np.ndarray:
    return shear_from_phases(r.profile, r.n_kappa, r.amplitude, r.phases(leg), coord, derivative=True)


def velocity(r: FlowRealization, t: float, x) -> np.ndarray:
    """Velocity at time ``t`` and points ``x`` of shape ``(..., 2)``."""
    if t < 0 or t > r.horizon:
        raise HorizonExceeded(f"t = {t} outside [0, {r.horizon}]")
    leg = min(int(np.floor(t)), r.horizon - 1)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    if leg % 2 == 0:
        out[..., 0] = shear_speed(r, leg, x[..., 1])
    else:
        out[..., 1] = shear_speed(r, leg, x[..., 0])
    return out


def stream_function(r: FlowRealization, leg: int, quadrature_points: int, copies=None, remove_mean=True):
    """Cumulative integral ``H(c) = int_0^c psi`` on ``quadrature_points + 1`` nodes.

    With ``remove_mean`` the constant part of ``psi`` (a rigid translation, which
    has no periodic stream function) is removed first, so ``H`` is periodic.
    ``copies`` restricts the sum to a subset of the translated profiles.
    Returns ``(c, H)``.
    """
    if quadrature_points < 2**10 * r.n_kappa:
        raise QuadratureTooCoarse(
            f"{quadrature_points} points gives fewer than 2^10 per support interval (N = {r.n_kappa})"
        )
    c = np.linspace(0.0, TWO_PI, quadrature_points + 1)
    phases = r.phases(leg)
    if copies is None:
        psi = shear_speed(r, leg, c)
    else:
        sel = phases[np.asarray(copies)]
        psi = r.amplitude * eval_scaled(r.profile, r.n_kappa, c[:, None] - sel[None, :]).sum(axis=1)
    H = cumulative_simpson(psi, x=c, initial=0.0)
    if remove_mean:
        H = H - H[-1] * c / TWO_PI
    return c, H


def stream_sup_norm(r: FlowRealization, leg: int, quadrature_points: int | None = None, copies=None, remove_mean=True) -> float:
    """Sup norm of the stream function of leg ``leg``.

    For the mean-removed (periodic) stream function the additive constant is
    free, so the optimal one is used: the result is half the oscillation of H.
    """
    if quadrature_points is None:
        quadrature_points = 2**11 * r.n_kappa
    _, H = stream_function(r, leg, quadrature_points, copies, remove_mean)
    if remove_mean:
        return 0.5 * float(H.max() - H.min())
    return float(np.abs(H).max())


@dataclass(frozen=True)
class RescaledFlow:
    """The time-rescaled family ``v_t(x) = eps * u_{eps t}(x)``.

    ``base`` is a realization built at construction parameter ``eps``; the
    rescaled field is meant to be run with diffusivity ``eps**2``.  Each leg of
    ``v`` lasts ``1/eps`` time units.
    """

    base: FlowRealization

    @property
    def eps(self) -> float:
        return self.base.kappa

    @property
    def kappa_target(self) -> float:
        return self.base.kappa ** 2

    @property
    def leg_duration(self) -> float:
        return 1.0 / self.eps

    @property
    def speed_scale(self) -> float:
        return self.eps

    @property
    def horizon(self) -> int:
        return self.base.horizon

    @property
    def horizon_time(self) -> float:
        return self.base.horizon / self.eps

    @property
    def amplitude(self) -> float:
        return self.base.amplitude

    @property
    def grad_sup(self) -> float:
        return self.eps * self.base.grad_sup

    @property
    def sup_bound(self) -> float:
        return self.eps * self.base.sup_bound

    def leg_shear_grid(self, leg: int, M: int) -> np.ndarray:
        return self.eps * self.base.leg_shear_grid(leg, M)

    def velocity(self, t: float, x) -> np.ndarray:
        return self.eps * velocity(self.base, self.eps * t, x)


def rescale(r: FlowRealization) -> RescaledFlow:
    return RescaledFlow(r)
