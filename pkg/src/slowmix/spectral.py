"""Real scalar fields on a uniform M x M grid over [0, 2pi]^2, with Fourier access.

Conventions: array axis 0 is x1, axis 1 is x2.  Coefficients use the normalized
measure dx/(2pi)^2, ``f(x) = sum_k fhat(k) exp(i k.x)``, so Parseval reads
``mean(f**2) == sum |fhat|**2`` and homogeneous Sobolev norms are

    |f|_{H^s}^2 = sum_{k != 0} |k|^{2s} |fhat(k)|^2.

All three of H^{-1}, L^2, H^1 coincide on the |k| = 1 shell.
"""
from __future__ import annotations

import csv
import json
from functools import lru_cache

import numpy as np

from .errors import NotMeanZero

TWO_PI = 2.0 * np.pi

# relative size of the top-octave energy beyond which a sampled field is
# considered polluted by aliasing
ALIAS_THRESHOLD = 1e-4


def check_resolution(M: int) -> int:
    M = int(M)
    if M < 4 or M & (M - 1):
        raise ValueError(f"grid size must be a power of two >= 4, got {M}")
    return M


@lru_cache(maxsize=32)
def wavenumbers(M: int):
    """Integer wavenumber grids ``(k1, k2)`` in FFT order, shape (M, M)."""
    k = np.fft.fftfreq(M, d=1.0 / M)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    k1.setflags(write=False)
    k2.setflags(write=False)
    return k1, k2


@lru_cache(maxsize=32)
def k_squared(M: int) -> np.ndarray:
    k1, k2 = wavenumbers(M)
    out = k1**2 + k2**2
    out.setflags(write=False)
    return out


def grid(M: int):
    """Node coordinates ``(x1, x2)`` of shape (M, M)."""
    x = TWO_PI * np.arange(M) / M
    return np.meshgrid(x, x, indexing="ij")


class SpectralField:
    """Value-like wrapper around grid samples with cached Fourier coefficients."""

    __slots__ = ("_samples", "_coef")

    def __init__(self, samples):
        samples = np.array(samples, dtype=float)
        if samples.ndim != 2 or samples.shape[0] != samples.shape[1]:
            raise ValueError("samples must be a square 2-D array")
        check_resolution(samples.shape[0])
        self._samples = samples
        self._samples.setflags(write=False)
        self._coef = None

    @classmethod
    def from_coefficients(cls, coef) -> "SpectralField":
        coef = np.asarray(coef, dtype=complex)
        M = coef.shape[0]
        f = cls(np.fft.ifft2(coef).real * M * M)
        return f

    @classmethod
    def from_function(cls, fn, M: int) -> "SpectralField":
        x1, x2 = grid(check_resolution(M))
        return cls(fn(x1, x2))

    @property
    def M(self) -> int:
        return self._samples.shape[0]

    @property
    def samples(self) -> np.ndarray:
        return self._samples

    @property
    def coefficients(self) -> np.ndarray:
        if self._coef is None:
            c = np.fft.fft2(self._samples) / self.M**2
            c.setflags(write=False)
            self._coef = c
        return self._coef

    @property
    def mean(self) -> float:
        return float(self.coefficients[0, 0].real)

    @property
    def mean_zero(self) -> bool:
        return abs(self.coefficients[0, 0]) <= 1e-12 * max(1.0, self.l2_norm())

    def l2_norm(self) -> float:
        return float(np.sqrt(np.mean(self._samples**2)))

    def __add__(self, other):
        return SpectralField(self._samples + other.samples)

    def __sub__(self, other):
        return SpectralField(self._samples - other.samples)

    def __mul__(self, a):
        return SpectralField(self._samples * a)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SpectralField(M={self.M}, l2={self.l2_norm():.6g})"


def inner(f: SpectralField, g: SpectralField) -> float:
    """L^2 inner product with the normalized measure."""
    return float(np.mean(f.samples * g.samples))


def sobolev_norm(f: SpectralField, s: float) -> float:
    c = f.coefficients
    if s < 0 and abs(c[0, 0]) > 1e-10:
        raise NotMeanZero(f"H^{s} norm needs a mean-zero field (mean = {c[0, 0].real:.3g})")
    k2 = k_squared(f.M)
    w = np.zeros_like(k2)
    nz = k2 > 0
    w[nz] = k2[nz] ** s
    return float(np.sqrt(np.sum(w * np.abs(c) ** 2)))


def project_low(f: SpectralField, R: float) -> SpectralField:
    """Keep the modes with Euclidean ``|k| <= R``."""
    keep = k_squared(f.M) <= R * R
    return SpectralField.from_coefficients(np.where(keep, f.coefficients, 0.0))


def project_high(f: SpectralField, R: float) -> SpectralField:
    """Keep the modes with ``|k| > R``; complementary to :func:`project_low`."""
    keep = k_squared(f.M) > R * R
    return SpectralField.from_coefficients(np.where(keep, f.coefficients, 0.0))


def top_octave_fraction(f: SpectralField) -> float:
    """Share of L^2 energy carried by modes with ``|k| > M/4``."""
    e = np.abs(f.coefficients) ** 2
    total = e.sum()
    if total == 0:
        return 0.0
    return float(e[k_squared(f.M) > (f.M / 4) ** 2].sum() / total)


def is_aliased(f: SpectralField, threshold: float = ALIAS_THRESHOLD) -> bool:
    return top_octave_fraction(f) > threshold


def random_bandlimited(seed: int, k_max: int, M: int) -> SpectralField:
    """Mean-zero real field, iid Gaussian coefficients on ``0 < |k| <= k_max``, unit L^2 norm."""
    M = check_resolution(M)
    if not 0 < k_max < M // 2:
        raise ValueError("need 0 < k_max < M/2")
    rng = np.random.default_rng(seed)
    ksq = k_squared(M)
    mask = (ksq > 0) & (ksq <= k_max * k_max)
    c = np.zeros((M, M), dtype=complex)
    n = int(mask.sum())
    c[mask] = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    f = np.fft.ifft2(c).real
    f -= f.mean()
    return SpectralField(f / np.sqrt(np.mean(f**2)))


def export_binary(f: SpectralField, path) -> None:
    """Write a one-line JSON header followed by the row-major float64 samples."""
    header = json.dumps({"M": f.M, "dtype": "float64", "order": "row-major", "axis0": "x1"})
    with open(path, "wb") as fh:
        fh.write(header.encode() + b"\n")
        fh.write(np.ascontiguousarray(f.samples, dtype="<f8").tobytes())


def load_binary(path) -> SpectralField:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f8")
    M = header["M"]
    return SpectralField(data.reshape(M, M).copy())


def export_spectrum_csv(f: SpectralField, path) -> None:
    k1, k2 = wavenumbers(f.M)
    c = f.coefficients
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k1", "k2", "re", "im"])
        for a, b, z in zip(k1.ravel(), k2.ravel(), c.ravel()):
            w.writerow([int(a), int(b), repr(float(z.real)), repr(float(z.imag))])
