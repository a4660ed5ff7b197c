import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slowmix.errors import HorizonExceeded, OnDiagonal
from slowmix.flow import n_kappa_of, realize
from slowmix.transport import leg_map, lipschitz_product_bound
from slowmix.twopoint import (
    PointPair, advance_with_phases, drift_estimate, foster_lyapunov_check, lyapunov_v,
    minorization_probe, sep_inf, torus_dist, two_point_advance,
)

TWO_PI = 2 * np.pi
coord = st.floats(0.0, TWO_PI, exclude_max=True)


def test_v_at_maximal_separation():
    assert lyapunov_v(PointPair((0, 0), (np.pi, 0.3)), 1 / 16) == pytest.approx(0.930954, abs=1e-6)


@pytest.mark.parametrize("p", [0.01, 1 / 16, 0.08])
def test_v_is_one_at_unit_separation(p):
    assert lyapunov_v(PointPair((0.2, 0.1), (1.2, 0.5)), p) == pytest.approx(1.0, abs=1e-15)


def test_v_symmetric_on_random_pairs():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, TWO_PI, (10_000, 4))
    for a in pts[:2000]:
        pair = PointPair(a[:2], a[2:])
        assert lyapunov_v(pair) == lyapunov_v(pair.swapped())
    assert np.array_equal(sep_inf(pts[:, :2], pts[:, 2:]), sep_inf(pts[:, 2:], pts[:, :2]))


def test_v_errors():
    with pytest.raises(OnDiagonal):
        lyapunov_v(PointPair((1.0, 2.0), (1.0, 2.0)))
    with pytest.raises(ValueError):
        lyapunov_v(PointPair((0, 0), (1, 1)), p=0.1)


@settings(max_examples=200, deadline=None)
@given(coord, coord, coord, coord, st.floats(0.5, 40.0))
def test_v_level_sets(a, b, c, d, R):
    pair = PointPair((a, b), (c, d))
    if pair.sep_inf <= 1e-12:
        return
    p = 1 / 16
    sep = pair.sep_inf
    thr = R ** (-1 / p)
    if abs(sep - thr) > 1e-9 * max(sep, thr):
        assert (lyapunov_v(pair, p) <= R) == (sep >= thr)


@settings(max_examples=100, deadline=None)
@given(coord, coord)
def test_sep_inf_bounded(a, b):
    assert 0 <= torus_dist(a, b) <= np.pi


def test_horizontal_leg_preserves_transverse_separation(strong_flow):
    pair = PointPair((0.3, 1.7), (2.9, 1.7))
    out = two_point_advance(strong_flow, pair, 1)
    assert out.x[1] == pair.x[1] and out.y[1] == pair.y[1]


def test_pair_equals_separate_points(strong_flow):
    pair = PointPair((0.3, 1.1), (4.0, 5.2))
    out = two_point_advance(strong_flow, pair, 6, start=2)
    for p, q in ((pair.x, out.x), (pair.y, out.y)):
        z = np.array(p)
        for leg in range(2, 8):
            z = leg_map(strong_flow, leg, z)
        assert np.array_equal(z, np.array(q))


def test_separation_growth_within_lipschitz_bound(strong_flow):
    rng = np.random.default_rng(3)
    lip = lipschitz_product_bound(strong_flow, 2)
    for _ in range(200):
        x = rng.uniform(0, TWO_PI, 2)
        y = np.mod(x + rng.uniform(-1e-4, 1e-4, 2), TWO_PI)
        pair = PointPair(x, y)
        out = two_point_advance(strong_flow, pair, 2)
        assert out.sep_inf <= lip * pair.sep_inf * (1 + 1e-9)


def test_advance_horizon(strong_flow):
    with pytest.raises(HorizonExceeded):
        two_point_advance(strong_flow, PointPair((0, 0), (1, 1)), strong_flow.horizon + 1)


def test_swap_commutes_with_advance(cosine):
    kappa, A = 1 / 16, 50.0
    n = n_kappa_of(kappa)
    r = realize(kappa, A, cosine, 4, 6)
    rng = np.random.default_rng(1)
    x = rng.uniform(0, TWO_PI, (500, 2))
    y = rng.uniform(0, TWO_PI, (500, 2))
    ph = [r.phases(j) for j in range(6)]
    x1, y1 = advance_with_phases(r.profile, n, A, ph, x, y)
    y2, x2 = advance_with_phases(r.profile, n, A, ph, y, x)
    assert np.array_equal(x1, x2) and np.array_equal(y1, y2)


@pytest.mark.parametrize("axis", [0, 1])
def test_translation_equivariance(cosine, axis):
    # shifting x_a by k pi/N is undone by rolling the phases of the legs that read x_a
    kappa, A = 1 / 16, 50.0
    n = n_kappa_of(kappa)
    r = realize(kappa, A, cosine, 9, 2)
    k = 3
    tau = k * np.pi / n
    # two legs only: at A = 50 longer chains amplify rounding past 1e-9
    ph = [r.phases(j) for j in range(2)]
    reads = 1 if axis == 0 else 0  # legs that take x_axis as their argument
    shifted = [np.roll(np.mod(p + tau, TWO_PI), k) if j % 2 == reads else p for j, p in enumerate(ph)]
    rng = np.random.default_rng(2)
    x = rng.uniform(0, TWO_PI, (300, 2))
    y = rng.uniform(0, TWO_PI, (300, 2))
    shift = np.zeros(2)
    shift[axis] = tau
    xa, ya = advance_with_phases(cosine, n, A, ph, x, y)
    xb, yb = advance_with_phases(cosine, n, A, shifted, np.mod(x + shift, TWO_PI), np.mod(y + shift, TWO_PI))
    assert torus_dist(xb, np.mod(xa + shift, TWO_PI)).max() < 1e-9
    assert torus_dist(yb, np.mod(ya + shift, TWO_PI)).max() < 1e-9


def test_drift_frozen_flow_is_exact():
    d = drift_estimate(1 / 16, A=0.0, samples=2000)
    assert d.mean_ratio == 1.0
    assert d.ci95_upper >= d.mean_ratio


def test_drift_near_diagonal_contracts():
    d = drift_estimate(1 / 16, A=50.0, p=1 / 16, samples=10_000, legs=1, seed=0)
    assert d.ci95_upper < 1.0
    assert d.ci95_upper >= d.mean_ratio and d.samples == 10_000 and d.n_legs == 2


def test_drift_far_band_crude_bound(cosine):
    kappa, A, p = 1 / 16, 50.0, 1 / 16
    n = n_kappa_of(kappa)
    d = drift_estimate(kappa, A, p, band=np.pi, samples=2000, seed=1)
    assert d.mean_ratio <= (10 * A * n * cosine.c1_norm) ** (2 * p)


def test_drift_is_deterministic():
    a = drift_estimate(1 / 8, samples=1000, seed=5)
    b = drift_estimate(1 / 8, samples=1000, seed=5)
    assert a == b


def test_drift_argument_checks():
    with pytest.raises(ValueError):
        drift_estimate(1 / 16, samples=10)
    with pytest.raises(ValueError):
        drift_estimate(1 / 16, band=4.0)


def test_foster_zero_amplitude():
    f = foster_lyapunov_check(1 / 8, A=0.0, samples=1000)
    assert f.gamma1_hat == 1.0 and f.K_hat == 0.0


def test_foster_fit_covers_every_stratum():
    f = foster_lyapunov_check(1 / 8, A=50.0, samples=2000, seed=3)
    assert f.K_hat >= 0 and f.gamma1_hat > 0
    assert np.all(f.slack >= -1e-12)


def test_minorization_zero_amplitude():
    assert minorization_probe(1 / 8, A=0.0, samples=2000, n_starts=2).alpha_hat == 0.0


@pytest.mark.slow
def test_minorization_positive():
    m = minorization_probe(1 / 8, A=50.0, samples=100_000, coarse_bins=8, seed=0)
    assert m.alpha_hat > 0 and m.ci_low <= m.alpha_hat <= m.ci_high
    m2 = minorization_probe(1 / 8, A=50.0, samples=200_000, coarse_bins=8, seed=0)
    assert m2.alpha_hat >= m.alpha_hat - (m.ci_high - m.ci_low)


def test_minorization_bins_checked():
    with pytest.raises(ValueError):
        minorization_probe(1 / 8, coarse_bins=17)
