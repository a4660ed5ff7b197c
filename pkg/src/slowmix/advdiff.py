"""Split-step spectral solver for advection-diffusion by an alternating shear flow.

Each substep of length ``dt`` is the symmetric composition

    heat(dt/2) -> exact shear advection(dt) -> heat(dt/2)

The heat factor is the Fourier multiplier ``exp(-kappa |k|^2 dt/2)``.  Within a
horizontal leg the shear advection is a per-line phase shift: in the mixed
representation (k1, x2) the field is multiplied by ``exp(-i k1 dt psi(x2))``
(vertical legs swap the roles of the axes).  Both sub-flows are exact, so the
splitting is the only time-discretization error.

During a leg the state is kept as a half spectrum: real FFT along the sheared
axis, full FFT along the transverse axis.  The Nyquist line of the sheared
axis is projected out when a leg starts; the projection is applied identically
in the adjoint.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import HorizonExceeded, NotMeanZero
from .spectral import SpectralField, check_resolution
from .transport import TrigPolynomial, pullback_solution

DEFAULT_SUBSTEPS = 64


@dataclass(frozen=True)
class EvolveSpec:
    """What to integrate: ``flow`` over ``[s, t]`` with diffusivity ``kappa_solver``.

    ``flow`` is a :class:`~slowmix.flow.FlowRealization` or a
    :class:`~slowmix.flow.RescaledFlow`; ``kappa_solver`` may differ from the
    diffusivity the flow was built for.
    """

    flow: object
    kappa_solver: float
    s: float
    t: float
    substeps_per_leg: int = DEFAULT_SUBSTEPS
    record_every: int = 1

    def __post_init__(self):
        if self.t < self.s:
            raise ValueError("need s <= t")
        if self.substeps_per_leg < 1 or self.record_every < 1:
            raise ValueError("substeps_per_leg and record_every must be >= 1")
        if self.kappa_solver < 0:
            raise ValueError("kappa_solver must be non-negative")


@dataclass
class EnergyTrace:
    times: np.ndarray
    l2_sq: np.ndarray
    h1_sq: np.ndarray
    dissipated: float = field(init=False)

    def __post_init__(self):
        self.dissipated = float(self.l2_sq[0] - self.l2_sq[-1]) if len(self.l2_sq) else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "l2_sq", "h1_sq"])
            for row in zip(self.times, self.l2_sq, self.h1_sq):
                w.writerow([repr(float(v)) for v in row])


def pieces(spec: EvolveSpec):
    """Substep pieces ``(leg, dt)`` covering ``[s, t]``.

    Pieces end on the global substep grid ``q * L / n`` (``L`` the leg duration),
    so evolutions over adjacent intervals compose exactly at shared grid times.
    """
    L = float(spec.flow.leg_duration)
    n = spec.substeps_per_leg
    delta = L / n
    q0 = int(np.floor(spec.s / delta + 1e-9)) + 1
    q1 = int(np.ceil(spec.t / delta - 1e-9))
    cuts = [spec.s] + [q * delta for q in range(q0, q1)] + [spec.t]
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 1e-13 * max(1.0, L):
            continue
        leg = int(np.floor((a + 0.5 * (b - a)) / L))
        out.append((leg, a, b))
    return out


class _LegStepper:
    """Strang substeps for one leg in the half-spectrum representation."""

    def __init__(self, M, kappa, psi, horizontal, sign):
        self.M = M
        self.kappa = kappa
        self.horizontal = horizontal
        self.psi = psi
        self.still = not np.any(psi)
        self.sign = sign
        kh = np.arange(M // 2 + 1, dtype=float)  # sheared axis, non-negative half
        kf = np.fft.fftfreq(M, d=1.0 / M)         # transverse axis, full
        if horizontal:
            self.k_shear = kh[:, None]
            ksq = kh[:, None] ** 2 + kf[None, :] ** 2
        else:
            self.k_shear = kh[None, :]
            ksq = kf[:, None] ** 2 + kh[None, :] ** 2
        self.ksq = ksq
        w = np.full(ksq.shape, 2.0)
        if horizontal:
            w[0, :] = 1.0
        else:
            w[:, 0] = 1.0
        self.weights = w / float(M) ** 4
        self._heat = {}
        self._phase = {}

    # representation changes ------------------------------------------------
    def to_half(self, samples):
        if self.horizontal:
            S = sfft.fft(sfft.rfft(samples, axis=0), axis=1)
        else:
            S = sfft.fft(sfft.rfft(samples, axis=1), axis=0)
        self._zero_nyquist(S)
        return S

    def to_physical(self, S):
        self._zero_nyquist(S)
        M = self.M
        if self.horizontal:
            return sfft.irfft(sfft.ifft(S, axis=1), n=M, axis=0)
        return sfft.irfft(sfft.ifft(S, axis=0), n=M, axis=1)

    def _zero_nyquist(self, S):
        # the Nyquist line of the sheared axis has no consistent phase shift
        h = self.M // 2
        if self.horizontal:
            S[h, :] = 0.0
        else:
            S[:, h] = 0.0

    # sub-flows -------------------------------------------------------------
    def heat(self, dt):
        key = round(dt, 15)
        if key not in self._heat:
            self._heat[key] = np.exp(-self.kappa * self.ksq * dt)
        return self._heat[key]

    def phase(self, dt):
        key = round(dt, 15)
        if key not in self._phase:
            if self.horizontal:
                arg = self.k_shear * self.psi[None, :]
            else:
                arg = self.psi[:, None] * self.k_shear
            self._phase[key] = np.exp(-1j * self.sign * dt * arg)
        return self._phase[key]

    def step(self, S, dt):
        if self.kappa > 0:
            S *= self.heat(0.5 * dt)
        if not self.still:
            ax = 1 if self.horizontal else 0
            G = sfft.ifft(S, axis=ax, overwrite_x=True)
            G *= self.phase(dt)
            S = sfft.fft(G, axis=ax, overwrite_x=True)
        if self.kappa > 0:
            S *= self.heat(0.5 * dt)
        return S

    def energies(self, S):
        a = np.abs(S) ** 2
        return float(np.sum(self.weights * a)), float(np.sum(self.weights * self.ksq * a))


def _as_samples(init, M=None):
    if isinstance(init, SpectralField):
        return init.samples
    if isinstance(init, TrigPolynomial):
        return init.to_field(M).samples
    return np.asarray(init, dtype=float)


def _check(spec, samples):
    horizon = float(spec.flow.horizon_time)
    if spec.t > horizon + 1e-9:
        raise HorizonExceeded(f"t = {spec.t} beyond horizon {horizon}")
    m = float(np.mean(samples))
    if abs(m) > 1e-10 * max(1.0, float(np.sqrt(np.mean(samples**2)))):
        raise NotMeanZero(f"initial datum has mean {m:.3g}")


def _run(spec, samples, adjoint=False, record=False):
    M = check_resolution(samples.shape[0])
    steps = pieces(spec)
    if adjoint:
        steps = steps[::-1]
    # group consecutive pieces by leg
    groups = []
    for leg, a, b in steps:
        if groups and groups[-1][0] == leg:
            groups[-1][1].append((a, b))
        else:
            groups.append((leg, [(a, b)]))

    theta = np.array(samples, dtype=float)
    times, l2s, h1s = [], [], []
    count = 0
    sign = -1.0 if adjoint else 1.0
    S, rep = None, None
    for leg, segs in groups:
        psi = spec.flow.leg_shear_grid(leg, M)
        # a motionless leg is pure heat; it runs in the vertical layout so that
        # consecutive motionless legs need no transforms in between
        horizontal = leg % 2 == 0 and bool(np.any(psi))
        stepper = _LegStepper(M, spec.kappa_solver, psi, horizontal, sign)
        if rep == horizontal:
            stepper._zero_nyquist(S)
        else:
            if S is not None:
                theta = prev.to_physical(S)
            S = stepper.to_half(theta)
        rep, prev = horizontal, stepper
        if record and not times:
            e2, h2 = stepper.energies(S)
            times.append(segs[0][0]); l2s.append(e2); h1s.append(h2)
        if stepper.still and not record:
            if spec.kappa_solver > 0:
                S *= stepper.heat(sum(b - a for a, b in segs))
            continue
        for a, b in segs:
            S = stepper.step(S, b - a)
            count += 1
            if record and count % spec.record_every == 0:
                e2, h2 = stepper.energies(S)
                times.append(b); l2s.append(e2); h1s.append(h2)
    if S is not None:
        theta = prev.to_physical(S)
    trace = None
    if record:
        trace = EnergyTrace(np.array(times), np.array(l2s), np.array(h1s))
    return theta, trace


def evolve(spec: EvolveSpec, init, M: int | None = None):
    """Integrate from ``spec.s`` to ``spec.t``; returns ``(field, EnergyTrace)``.

    ``init`` is a mean-zero :class:`SpectralField` (or a
    :class:`TrigPolynomial` together with the grid size ``M``).
    """
    samples = _as_samples(init, M)
    _check(spec, samples)
    if spec.t == spec.s:
        e = float(np.mean(samples**2))
        f = SpectralField(samples)
        from .spectral import sobolev_norm
        return f, EnergyTrace(np.array([spec.s]), np.array([e]), np.array([sobolev_norm(f, 1) ** 2]))
    theta, trace = _run(spec, samples, adjoint=False, record=True)
    return SpectralField(theta), trace


def evolve_samples(spec: EvolveSpec, samples: np.ndarray) -> np.ndarray:
    """Trace-free forward solve on raw sample arrays (used by the estimators)."""
    return _run(spec, samples)[0]


def adjoint_evolve(spec: EvolveSpec, init, M: int | None = None) -> SpectralField:
    """Apply the exact adjoint of :func:`evolve` (pieces reversed, velocity negated)."""
    samples = _as_samples(init, M)
    _check(spec, samples)
    return SpectralField(_run(spec, samples, adjoint=True)[0])


def adjoint_samples(spec: EvolveSpec, samples: np.ndarray) -> np.ndarray:
    return _run(spec, samples, adjoint=True)[0]


def energy_identity_defect(trace: EnergyTrace, kappa: float) -> float:
    """Largest relative mismatch in ``d|theta|^2/dt = -2 kappa |grad theta|^2``.

    Each recorded interval compares the energy change with the trapezoidal
    dissipation ``2 kappa dt (h1_a + h1_b)/2``, normalized by ``l2_sq * dt``.
    """
    dt = np.diff(trace.times)
    if dt.size == 0:
        return 0.0
    d_e = np.diff(trace.l2_sq)
    diss = kappa * dt * (trace.h1_sq[:-1] + trace.h1_sq[1:])
    return float(np.max(np.abs(d_e + diss) / (trace.l2_sq[:-1] * dt)))


def _as_trig(init):
    if isinstance(init, TrigPolynomial):
        return init
    f = init if isinstance(init, SpectralField) else SpectralField(init)
    c = f.coefficients
    k = np.fft.fftfreq(f.M, d=1.0 / f.M).astype(int)
    idx = np.argwhere(np.abs(c) > 1e-14)
    return TrigPolynomial(np.array([[k[i], k[j]] for i, j in idx], dtype=np.int64).reshape(-1, 2), c[idx[:, 0], idx[:, 1]])


@dataclass(frozen=True)
class ClosenessReport:
    lhs: float
    rhs: float
    slack: float
    grad_init: float
    grad_integral: float
    grad_u_sup: float


def closeness_check(r, kappa: float, init, t: float, M: int = 256, substeps: int = DEFAULT_SUBSTEPS) -> ClosenessReport:
    """Compare the diffusive solution with the exact transport solution at time ``t``.

    ``lhs = |theta^kappa_t - theta^0_t|``; ``rhs`` is the a-priori bound
    ``e^3 sqrt(kappa) (|grad theta_0| + sqrt(|grad u| + 1) int_0^t |grad theta^kappa|)``
    with ``|grad u|`` the flow's ``3 A N |phi'|_inf`` bound and the time integral by
    the trapezoid rule on the recorded trace.  ``slack = rhs - lhs``.
    """
    poly = _as_trig(init)
    f0 = poly.to_field(M)
    spec = EvolveSpec(r, kappa, 0.0, t, substeps)
    theta_k, trace = evolve(spec, f0)
    if r.amplitude == 0:
        # u = 0: transport is the identity
        theta_0 = f0
    else:
        theta_0 = pullback_solution_t(r, t, poly, M)
    lhs = (theta_k - theta_0).l2_norm()
    grad = np.sqrt(np.maximum(trace.h1_sq, 0.0))
    integral = float(np.trapezoid(grad, trace.times)) if len(grad) > 1 else 0.0
    g = r.grad_sup
    rhs = np.e**3 * np.sqrt(kappa) * (float(np.sqrt(trace.h1_sq[0])) + np.sqrt(g + 1.0) * integral)
    return ClosenessReport(lhs, rhs, rhs - lhs, float(np.sqrt(trace.h1_sq[0])), integral, g)


def pullback_solution_t(r, t, poly, M):
    """Exact transport solution at a possibly fractional time ``t``."""
    if float(t).is_integer():
        return pullback_solution(r, int(t), poly, M)
    from .spectral import grid
    from .transport import inverse_flow_map

    x1, x2 = grid(M)
    pts = inverse_flow_map(r, t, np.stack([x1, x2], axis=-1))
    return SpectralField(poly(pts[..., 0], pts[..., 1]))
