"""Two-point motion of the random shear flow and its Lyapunov function.

One step of the two-point chain advances a pair of points through two unit
legs (one horizontal, one vertical shear) of the same realization.  The
Monte Carlo estimators below are annealed: every sample pair sees its own
independent phases, drawn as one ``(samples, 2N)`` array per leg.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OnDiagonal
from .flow import DEFAULT_AMPLITUDE, n_kappa_of, phase_stream, shear_from_phases
from .profile import get_profile
from .transport import leg_map

TWO_PI = 2.0 * np.pi
DEFAULT_P = 1.0 / 16.0
DEFAULT_S_STAR = 0.5
DEFAULT_ETA = 0.5
BOOTSTRAP_RESAMPLES = 2000

# phase-stream block ids, one per estimator, so their draws never overlap
_BLOCK_DRIFT = 1
_BLOCK_FOSTER = 2
_BLOCK_MINOR = 3


def torus_dist(a, b):
    # |a - b| is bit-for-bit symmetric in (a, b); a signed difference is not after mod
    d = np.mod(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def sep_inf(x, y):
    """``max(d(x1, y1), d(x2, y2))`` for points of shape ``(..., 2)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.maximum(torus_dist(x[..., 0], y[..., 0]), torus_dist(x[..., 1], y[..., 1]))


@dataclass(frozen=True)
class PointPair:
    x: tuple
    y: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))

    @property
    def sep_inf(self) -> float:
        return float(sep_inf(self.x, self.y))

    def swapped(self) -> "PointPair":
        return PointPair(self.y, self.x)


def _v(sep, p):
    return np.power(sep, -p)


def lyapunov_v(pair: PointPair, p: float = DEFAULT_P) -> float:
    """``V(x, y) = |x - y|_inf ** -p``."""
    if not 0 < p < 1.0 / 12.0:
        raise ValueError("p must lie in (0, 1/12)")
    d = pair.sep_inf
    if d <= 4.0 * np.finfo(float).eps:
        raise OnDiagonal(f"points coincide (separation {d:.3g})")
    return float(_v(d, p))


def two_point_advance(r, pair: PointPair, legs: int, start: int = 0) -> PointPair:
    """Advance both points through ``legs`` unit legs of the same realization."""
    if start + legs > r.horizon:
        from .errors import HorizonExceeded

        raise HorizonExceeded(f"leg {start + legs} beyond horizon {r.horizon}")
    pts = np.array([pair.x, pair.y], dtype=float)
    for leg in range(start, start + legs):
        pts = leg_map(r, leg, pts)
    return PointPair(pts[0], pts[1])


def advance_with_phases(profile, n_kappa, amplitude, phases, x, y):
    """Advance point batches ``x, y`` (shape ``(S, 2)``) through legs given as phases.

    ``phases`` is a sequence with one entry per leg, either ``(2N,)`` shared by
    all samples or ``(S, 2N)`` per sample.  Leg ``j`` of the sequence is
    horizontal when ``j`` is even.
    """
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    for j, ph in enumerate(phases):
        a, b = (0, 1) if j % 2 == 0 else (1, 0)
        for z in (x, y):
            z[:, a] = np.mod(z[:, a] + shear_from_phases(profile, n_kappa, amplitude, ph, z[:, b]), TWO_PI)
    return x, y


def _batch_phases(seed, leg, block, samples, n_kappa):
    u = phase_stream(seed, leg, block).random((samples, 2 * n_kappa))
    return np.pi * (np.arange(2 * n_kappa) + u) / n_kappa


def _run_chain(kappa, amplitude, profile, x, y, n_legs, seed, block):
    n = n_kappa_of(kappa)
    phases = (_batch_phases(seed, leg, block, x.shape[0], n) for leg in range(n_legs))
    return advance_with_phases(profile, n, amplitude, phases, x, y)


def _start_pairs(rng, samples, lo, hi):
    """Uniform base points and offsets with ``|x - y|_inf`` uniform on ``[lo, hi]``."""
    x = rng.uniform(0.0, TWO_PI, (samples, 2))
    d = rng.uniform(lo, hi, samples)
    axis = rng.integers(0, 2, samples)
    off = np.empty((samples, 2))
    other = rng.uniform(-1.0, 1.0, samples) * d
    sign = rng.choice([-1.0, 1.0], samples)
    off[:, 0] = np.where(axis == 0, sign * d, other)
    off[:, 1] = np.where(axis == 1, sign * d, other)
    return x, np.mod(x + off, TWO_PI)


def _bootstrap_upper(values, seed, resamples=BOOTSTRAP_RESAMPLES):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB007]))
    n = values.size
    means = np.empty(resamples)
    chunk = max(1, 2_000_000 // n)
    for i in range(0, resamples, chunk):
        k = min(chunk, resamples - i)
        idx = rng.integers(0, n, (k, n))
        means[i:i + k] = values[idx].mean(axis=1)
    return float(np.percentile(means, 97.5))


@dataclass(frozen=True)
class DriftEstimate:
    p: float
    n_legs: int
    samples: int
    mean_ratio: float
    ci95_upper: float
    region: str


def drift_estimate(
    kappa: float,
    A: float = DEFAULT_AMPLITUDE,
    p: float = DEFAULT_P,
    band: float | None = None,
    samples: int = 10_000,
    legs: int = 1,
    seed: int = 0,
    profile_name: str = "cosine_bump",
) -> DriftEstimate:
    """Monte Carlo estimate of ``E[V(after legs chain steps)] / V(before)``.

    Start pairs have ``|x - y|_inf`` uniform on ``[band/10, band]``; the default
    band is the near-diagonal width ``s*/N``.
    """
    n = n_kappa_of(kappa)
    if band is None:
        band = DEFAULT_S_STAR / n
    if not 0 < band <= np.pi:
        raise ValueError("band must lie in (0, pi]")
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = np.random.default_rng(np.random.SeedSequence([seed, _BLOCK_DRIFT]))
    x, y = _start_pairs(rng, samples, band / 10.0, band)
    v0 = _v(sep_inf(x, y), p)
    x1, y1 = _run_chain(kappa, A, get_profile(profile_name), x, y, 2 * legs, seed, _BLOCK_DRIFT)
    ratio = _v(np.maximum(sep_inf(x1, y1), np.finfo(float).tiny), p) / v0
    mean = float(ratio.mean())
    upper = max(mean, _bootstrap_upper(ratio, seed))
    return DriftEstimate(p, 2 * legs, samples, mean, upper, f"sep in [{band / 10:.6g}, {band:.6g}]")


@dataclass(frozen=True)
class FosterFit:
    gamma1_hat: float
    K_hat: float
    edges: np.ndarray
    v_before: np.ndarray
    v_after: np.ndarray
    slack: np.ndarray
    near: np.ndarray


def foster_lyapunov_check(
    kappa: float,
    A: float = DEFAULT_AMPLITUDE,
    p: float = DEFAULT_P,
    samples: int = 10_000,
    seed: int = 0,
    strata: int = 8,
    steps: int = 3,
    s_star: float = DEFAULT_S_STAR,
    eta: float = DEFAULT_ETA,
    profile_name: str = "cosine_bump",
) -> FosterFit:
    """Fit ``E[V after steps] <= gamma1 V + K`` over separation strata.

    Strata are log-spaced on ``[eta/N^3, pi]`` with ``samples`` pairs each.
    ``gamma1_hat`` is the worst ratio among strata inside the near-diagonal band
    ``s*/N``; ``K_hat`` is the smallest additive constant that then covers every
    stratum.
    """
    n = n_kappa_of(kappa)
    edges = np.geomspace(eta / n**3, np.pi, strata + 1)
    prof = get_profile(profile_name)
    rng = np.random.default_rng(np.random.SeedSequence([seed, _BLOCK_FOSTER]))
    vb, va = np.empty(strata), np.empty(strata)
    for j in range(strata):
        x, y = _start_pairs(rng, samples, edges[j], edges[j + 1])
        vb[j] = _v(sep_inf(x, y), p).mean()
        x1, y1 = _run_chain(kappa, A, prof, x, y, 2 * steps, seed + 7919 * (j + 1), _BLOCK_FOSTER)
        va[j] = _v(np.maximum(sep_inf(x1, y1), np.finfo(float).tiny), p).mean()
    near = edges[1:] <= s_star / n
    if not near.any():
        near[0] = True
    gamma1 = float(np.max(va[near] / vb[near]))
    K = float(max(0.0, np.max(va - gamma1 * vb)))
    slack = gamma1 * vb + K - va
    return FosterFit(gamma1, K, edges, vb, va, slack, near)


@dataclass(frozen=True)
class MinorizationResult:
    alpha_hat: float
    ci_low: float
    ci_high: float
    cells_used: int
    start_pairs: int


def _cell_ok(bins, width):
    """Mask of coarse cells (i1, i2, j1, j2) lying entirely outside ``|x - y|_inf < width``."""
    h = TWO_PI / bins
    i = np.arange(bins)
    # smallest torus distance between the intervals [i h, (i+1) h] and [j h, (j+1) h]
    gap = np.abs(i[:, None] - i[None, :])
    gap = np.minimum(gap, bins - gap)
    dmin = np.maximum(gap - 1, 0) * h
    far1 = dmin >= width
    # both coordinates close means the cell touches the band
    return ~(~far1[:, None, :, None] & ~far1[None, :, None, :])


def minorization_probe(
    kappa: float,
    A: float = DEFAULT_AMPLITUDE,
    samples: int = 100_000,
    coarse_bins: int = 8,
    seed: int = 0,
    eta: float = DEFAULT_ETA,
    steps: int = 3,
    n_starts: int = 4,
    profile_name: str = "cosine_bump",
) -> MinorizationResult:
    """Smallest ratio of empirical ``steps``-step mass to uniform mass over coarse cells.

    Start pairs use separations log-spaced on ``[eta/N^3, pi]``.  Only cells of
    the ``bins^4`` partition that avoid the diagonal band of width ``eta/N`` are
    scored.
    """
    if coarse_bins > 16 or coarse_bins < 1:
        raise ValueError("coarse_bins must lie in [1, 16]")
    n = n_kappa_of(kappa)
    width = eta / n
    ok = _cell_ok(coarse_bins, width)
    off_diag = 1.0 - min(1.0, (2.0 * width / TWO_PI) ** 2)
    ref = (1.0 / coarse_bins**4) / off_diag
    prof = get_profile(profile_name)
    rng = np.random.default_rng(np.random.SeedSequence([seed, _BLOCK_MINOR]))
    seps = np.geomspace(eta / n**3, np.pi, n_starts)
    best = (np.inf, 0)
    for k, d in enumerate(seps):
        x0 = rng.uniform(0.0, TWO_PI, 2)
        x = np.tile(x0, (samples, 1))
        y = np.tile(np.mod(x0 + [d, 0.5 * d], TWO_PI), (samples, 1))
        x1, y1 = _run_chain(kappa, A, prof, x, y, 2 * steps, seed + 104729 * (k + 1), _BLOCK_MINOR)
        idx = np.minimum((np.concatenate([x1, y1], axis=1) / TWO_PI * coarse_bins).astype(int), coarse_bins - 1)
        flat = np.ravel_multi_index(idx.T, (coarse_bins,) * 4)
        counts = np.bincount(flat, minlength=coarse_bins**4).reshape((coarse_bins,) * 4)
        c = counts[ok]
        j = int(np.argmin(c))
        if c[j] / samples / ref < best[0]:
            best = (c[j] / samples / ref, int(c[j]))
    alpha, cnt = best
    half = 1.96 * np.sqrt(cnt) / samples / ref
    return MinorizationResult(float(alpha), float(max(0.0, alpha - half)), float(alpha + half), int(ok.sum()), n_starts)
