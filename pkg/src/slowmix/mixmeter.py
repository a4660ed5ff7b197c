"""Estimators: transport mixing rates and dissipation times.

Mixing is measured on the pure transport problem through the ratio
``|phi_{s+n}|_{H^-1} / |phi_s|_{H^1}`` at even legs.  The dissipation time is
the first ``t`` with ``|T_{s,s+t}| <= 1/2`` on mean-zero fields, where the
operator norm comes from power iteration on ``T* T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .advdiff import EvolveSpec, DEFAULT_SUBSTEPS, adjoint_samples, evolve, evolve_samples
from .errors import HorizonExceeded, InsufficientData, NoDecayWithinHorizon
from .spectral import SpectralField, is_aliased, sobolev_norm
from .transport import TrigPolynomial, pullback_solution

POWER_MAX_ITERS = 20
POWER_RTOL = 1e-4


@dataclass(frozen=True)
class MixRecord:
    s: int
    n: int
    hminus1: float
    h1_init: float
    ratio: float
    aliased: bool


@dataclass(frozen=True)
class RateFit:
    gamma_hat: float
    prefactor_hat: float
    fit_window: tuple
    residual: float
    gamma_stderr: float = 0.0

    def as_rate(self) -> bounds.RateParams:
        """The fit as ``h(s, t) = D exp(-gamma t)`` with ``D >= 1``."""
        return bounds.RateParams(max(1.0, self.prefactor_hat), self.gamma_hat, 0.0)


@dataclass(frozen=True)
class TdisResult:
    s: float
    kappa: float
    t_dis_hat: float
    op_norm_at_t: float
    power_iters: int
    bisection_tol: float
    history: tuple = field(default=(), compare=False)


def _mean_free(f: SpectralField) -> SpectralField:
    # a sampled pullback carries an O(aliasing) grid mean; drop it before H^-1
    return SpectralField(f.samples - f.samples.mean())


def mix_records(r, init: TrigPolynomial, s: int, n_max: int, M: int) -> list[MixRecord]:
    """Mix-norm ratios at ``n = 0, 2, ..., n_max`` legs after leg ``s``."""
    if s % 2 or n_max % 2 or s < 0 or n_max < 0:
        raise ValueError("s and n_max must be non-negative even integers")
    if s + n_max > r.horizon:
        raise HorizonExceeded(f"s + n_max = {s + n_max} beyond horizon {r.horizon}")
    h1 = init.sobolev_norm(1.0)
    out = []
    for n in range(0, n_max + 1, 2):
        f = pullback_solution(r, n, init, M, s=s) if n else init.to_field(M)
        hm = sobolev_norm(_mean_free(f), -1.0)
        out.append(MixRecord(s, n, hm, h1, hm / h1, is_aliased(f)))
    return out


def fit_rate(records, window: tuple | None = None) -> RateFit:
    """Least-squares fit of ``log ratio = log D - gamma n`` over usable records."""
    use = [
        rec for rec in records
        if not rec.aliased and rec.ratio > 0 and (window is None or window[0] <= rec.n <= window[1])
    ]
    if len(use) < 4:
        raise InsufficientData(f"{len(use)} usable records, need 4")
    n = np.array([rec.n for rec in use], dtype=float)
    y = np.log([rec.ratio for rec in use])
    (slope, icpt), cov = np.polyfit(n, y, 1, cov="unscaled")
    res = y - (slope * n + icpt)
    rms = float(np.sqrt(np.mean(res**2)))
    dof = max(len(n) - 2, 1)
    stderr = float(np.sqrt(cov[0, 0] * np.sum(res**2) / dof))
    return RateFit(float(-slope), float(np.exp(icpt)), (int(n.min()), int(n.max())), rms, stderr)


class _NormEstimator:
    """``N(t) = |T_{s,s+t}|`` by power iteration, warm-started across calls."""

    def __init__(self, r, kappa, s, M, substeps, seed):
        self.r, self.kappa, self.s, self.substeps = r, kappa, s, substeps
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((M, M))
        self.v = self._unit(v)
        self.iters = 0
        self.history = []

    @staticmethod
    def _unit(v):
        v = v - v.mean()
        return v / np.sqrt(np.mean(v * v))

    def __call__(self, t):
        if t <= 0:
            return 1.0
        spec = EvolveSpec(self.r, self.kappa, self.s, self.s + t, self.substeps)
        v, lam_old = self.v, None
        for _ in range(POWER_MAX_ITERS):
            w = evolve_samples(spec, v)
            lam = float(np.mean(w * w))
            self.iters += 1
            if lam == 0.0:
                break
            # T* T has eigenvalue 1 on constants; keep the iterate mean-free
            v = self._unit(adjoint_samples(spec, w / math.sqrt(lam)))
            if lam_old is not None and abs(lam - lam_old) <= POWER_RTOL * lam:
                break
            lam_old = lam
        self.v = v
        N = math.sqrt(lam)
        self.history.append((t, N))
        return N


def dissipation_time(
    r,
    kappa: float,
    s: float = 0.0,
    M: int = 256,
    tol: float = 1e-3,
    substeps: int = DEFAULT_SUBSTEPS,
    seed: int = 0,
) -> TdisResult:
    """Smallest ``t`` (to relative ``tol``) with ``|T_{s,s+t}| <= 1/2``."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    norm = _NormEstimator(r, kappa, s, M, substeps, seed)
    room = float(r.horizon_time) - s
    cap = min(1.1 * bounds.poincare_bound(kappa), room)
    # expand from one leg by doubling; the Poincare time caps the search
    lo, n_lo = 0.0, 1.0
    hi = min(float(r.leg_duration), 0.5 * cap)
    while True:
        n_hi = norm(hi)
        if n_hi <= 0.5:
            break
        if hi >= cap:
            if cap < room:
                cap = room
            else:
                raise NoDecayWithinHorizon(f"|T| = {n_hi:.4g} > 1/2 at t = {hi:g}")
        lo, n_lo = hi, n_hi
        hi = min(2.0 * hi, cap)

    # Illinois false position on g(t) = log N(t) + log 2, with a bisection
    # fallback whenever the bracket fails to halve over two steps
    g_lo = math.log(n_lo) + math.log(2.0)
    g_hi = math.log(max(n_hi, 1e-300)) + math.log(2.0)
    side = 0
    widths = [hi - lo]
    while hi - lo > tol * hi:
        if len(widths) >= 3 and widths[-1] > 0.5 * widths[-3]:
            t = 0.5 * (lo + hi)
        else:
            t = (lo * g_hi - hi * g_lo) / (g_hi - g_lo)
            pad = 1e-3 * (hi - lo)
            t = min(max(t, lo + pad), hi - pad)
        n_t = norm(t)
        g_t = math.log(max(n_t, 1e-300)) + math.log(2.0)
        if g_t > 0:
            lo, g_lo = t, g_t
            if side == 1:
                g_hi *= 0.5
            side = 1
        else:
            hi, g_hi, n_hi = t, g_t, n_t
            if side == -1:
                g_lo *= 0.5
            side = -1
        widths.append(hi - lo)
    return TdisResult(s, kappa, hi, n_hi, norm.iters, tol, tuple(sorted(norm.history)))


@dataclass(frozen=True)
class PropCheck:
    tau_kappa: float
    A_kappa: float
    clamped: bool
    norm_ratio: float
    threshold: float
    holds: bool


def theorem3_quantities(rate, grad_u_sup: float, kappa: float, theta0: SpectralField, r, M: int | None = None,
                        substeps: int = DEFAULT_SUBSTEPS) -> PropCheck:
    """Evolve ``theta0`` to ``tau_kappa`` and test ``|theta| <= sqrt(1 - A_kappa) |theta0|``."""
    q = bounds.prop_quantities(rate, grad_u_sup, kappa)
    if q.tau_kappa > r.horizon_time:
        raise HorizonExceeded(f"tau_kappa = {q.tau_kappa:.4g} beyond horizon {r.horizon_time}")
    theta, _ = evolve(EvolveSpec(r, kappa, 0.0, q.tau_kappa, substeps), theta0, M)
    theta0 = theta0 if isinstance(theta0, SpectralField) else theta0.to_field(M)
    ratio = theta.l2_norm() / theta0.l2_norm()
    thr = math.sqrt(1.0 - q.A_kappa)
    return PropCheck(q.tau_kappa, q.A_kappa, q.clamped, ratio, thr, ratio <= thr)
