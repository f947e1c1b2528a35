"""Gaussian noise with prescribed long-range correlation.

Fractional Gaussian noise is drawn exactly by circulant embedding (Davies and
Harte). Two-regime noise splices the circulant spectra of two fGn processes
at a corner frequency and synthesises from the spliced spectrum the same way.
"""

from __future__ import annotations

import numpy as np

from .orderflow import InvalidInput


def fgn_autocovariance(H: float, k: np.ndarray) -> np.ndarray:
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * H
    direct = 0.5 * ((k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)
    # the second difference cancels catastrophically at large lags; there use
    # the even binomial series of (1 + x)^2H + (1 - x)^2H - 2 with x = 1/k
    big = k >= 64
    x2 = np.where(big, k, 64.0) ** -2.0
    series = np.zeros_like(k)
    coef, power = 1.0, np.ones_like(k)
    for j in range(1, 7):
        coef *= (h2 - 2 * j + 2) * (h2 - 2 * j + 1) / ((2 * j - 1) * (2 * j))
        power = power * x2
        series += coef * power
    stable = np.where(big, k, 64.0) ** h2 * series
    return np.where(big, stable, direct)


def _circulant_eigenvalues(H: float, n: int) -> np.ndarray:
    gamma = fgn_autocovariance(H, np.arange(n + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        raise InvalidInput(f"circulant embedding is not non-negative for H={H}, n={n}")
    return np.clip(lam, 0.0, None)


def _synthesise(lam: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    m = lam.size
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = np.fft.fft(np.sqrt(lam / m) * z)
    return y.real[:n]


def fgn(n: int, H: float, rng: np.random.Generator | int | None = None) -> np.ndarray:
    """Unit-variance fractional Gaussian noise of length ``n``."""
    if not 0 < H < 1:
        raise InvalidInput(f"Hurst exponent must lie in (0, 1), got {H}")
    if n < 1:
        raise InvalidInput("n must be positive")
    rng = np.random.default_rng(rng)
    if H == 0.5:
        return rng.standard_normal(n)
    return _synthesise(_circulant_eigenvalues(H, n), n, rng)


def spliced_noise(
    n: int,
    H1: float,
    H2: float,
    l_cross: float,
    rng: np.random.Generator | int | None = None,
    width: float = 0.1,
) -> np.ndarray:
    """Noise scaling like fGn(H1) below ``l_cross`` and fGn(H2) above it.

    The two spectra are crossfaded around the corner frequency 1/l_cross with
    a logistic weight of ``width`` decades; the low-frequency branch is
    rescaled so the spectrum is continuous at the corner. Output is scaled to
    unit variance.
    """
    for H in (H1, H2):
        if not 0 < H < 1:
            raise InvalidInput(f"Hurst exponent must lie in (0, 1), got {H}")
    if not 1 < l_cross < n:
        raise InvalidInput("crossover scale must lie inside the series")
    rng = np.random.default_rng(rng)
    lam1 = _circulant_eigenvalues(H1, n)
    lam2 = _circulant_eigenvalues(H2, n)
    m = lam1.size
    k = np.arange(m)
    freq = np.minimum(k, m - k) / m
    fc = 1.0 / l_cross
    kc = int(round(fc * m))
    scale = lam1[kc] / lam2[kc]
    with np.errstate(divide="ignore"):
        t = (np.log10(np.where(freq > 0, freq, 1.0 / m)) - np.log10(fc)) / width
    w_high = 1.0 / (1.0 + np.exp(-t))
    lam = w_high * lam1 + (1.0 - w_high) * scale * lam2
    x = _synthesise(lam, n, rng)
    return x / np.sqrt(lam.sum() / m)
