"""Detrended fluctuation analysis: F(l), Hurst exponents and crossovers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .orderflow import InvalidInput

MAX_ORDER = 3
# largest scale used for single-exponent fits, as a fraction of N
FIT_MAX_FRACTION = 1 / 16


@dataclass(frozen=True)
class FluctuationFunction:
    scales: np.ndarray
    values: np.ndarray
    n: int
    order: int

    @property
    def degenerate(self) -> bool:
        return bool(np.any(self.values <= 0))


@dataclass(frozen=True)
class ScalingFit:
    H: float
    stderr: float
    l_min: int
    l_max: int
    intercept: float


@dataclass(frozen=True)
class CrossoverFit:
    H1: float
    H2: float
    l_cross: float
    split_scale: int
    residual: float
    left: ScalingFit
    right: ScalingFit


@dataclass(frozen=True)
class DailyHurst:
    H_D: float
    per_day: tuple[float, ...]
    n_days: int
    skipped: tuple[int, ...] = field(default=())


def log_scales(n: int, l_min: int = 10, per_decade: int = 20, l_max: int | None = None) -> np.ndarray:
    """Integer scales roughly log-spaced between ``l_min`` and ``n // 4``."""
    if l_max is None:
        l_max = n // 4
    if l_max < l_min:
        return np.array([], dtype=np.int64)
    count = int(np.ceil(np.log10(l_max / l_min) * per_decade)) + 1
    raw = np.logspace(np.log10(l_min), np.log10(l_max), count)
    return np.unique(np.round(raw).astype(np.int64))


def _window_projector(l: int, order: int) -> np.ndarray:
    # orthonormal basis of polynomials of degree <= order on l points
    t = np.linspace(-1.0, 1.0, l)
    vander = np.vander(t, order + 1, increasing=True)
    q, _ = np.linalg.qr(vander)
    return q


def fluctuation_function(
    series: Sequence[float], scales: Sequence[int] | None = None, order: int = 1
) -> FluctuationFunction:
    """Root-mean-square detrended fluctuation of the profile at each scale.

    The profile has N + 1 points (a leading zero), which makes windowing from
    both ends an exact mirror of windowing the time-reversed series. Windows of
    length ``l`` tile the profile from the front and again from the back.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise InvalidInput("series must be one-dimensional")
    if not 1 <= order <= MAX_ORDER:
        raise InvalidInput(f"detrend order must be in 1..{MAX_ORDER}")
    n = x.size
    if scales is None:
        scales = log_scales(n)
    scales = np.asarray(scales, dtype=np.int64)
    if scales.size == 0:
        raise InvalidInput(f"series of length {n} admits no scales")
    if np.any(np.diff(scales) <= 0):
        raise InvalidInput("scales must be strictly increasing")
    if scales[0] < order + 2:
        raise InvalidInput(f"smallest scale must be >= {order + 2}")
    if n < 4 * scales[0] or scales[-1] > n // 4:
        raise InvalidInput(f"series of length {n} too short for scales {scales[0]}..{scales[-1]}")

    profile = np.concatenate([[0.0], np.cumsum(x - x.mean())])
    m = profile.size
    values = np.empty(scales.size)
    for i, l in enumerate(scales):
        l = int(l)
        k = m // l
        front = profile[: k * l].reshape(k, l)
        back = profile[m - k * l :].reshape(k, l)
        windows = np.vstack([front, back])
        q = _window_projector(l, order)
        resid = windows - (windows @ q) @ q.T
        values[i] = np.sqrt(np.mean(resid * resid))
    return FluctuationFunction(scales=scales, values=values, n=n, order=order)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Slope, intercept, slope standard error and residual sum of squares."""
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    rss = float(np.sum((y - intercept - slope * x) ** 2))
    dof = x.size - 2
    stderr = float(np.sqrt(rss / dof / sxx)) if dof > 0 else 0.0
    return float(slope), float(intercept), stderr, rss


def hurst(F: FluctuationFunction, fit_range: tuple[float, float] | None = None) -> ScalingFit:
    """Log-log least-squares slope of F(l) over the scales inside ``fit_range``."""
    scales, values = F.scales, F.values
    if fit_range is not None:
        lo, hi = fit_range
        mask = (scales >= lo) & (scales <= hi)
        scales, values = scales[mask], values[mask]
    if scales.size < 5:
        raise InvalidInput(f"need at least 5 scales in the fit range, got {scales.size}")
    if np.any(values <= 0):
        raise InvalidInput("fluctuation function is degenerate (zero values)")
    slope, intercept, stderr, _ = _ols(np.log(scales), np.log(values))
    return ScalingFit(H=slope, stderr=stderr, l_min=int(scales[0]), l_max=int(scales[-1]), intercept=intercept)


def default_fit_range(F: FluctuationFunction) -> tuple[float, float]:
    """Scales up to N/16: beyond that only a handful of windows remain and the
    log-log points scatter. Falls back to all scales if fewer than 5 remain."""
    hi = F.n * FIT_MAX_FRACTION
    if np.count_nonzero(F.scales <= hi) < 5:
        hi = float(F.scales[-1])
    return float(F.scales[0]), hi


def crossover_fit(F: FluctuationFunction, min_side: int = 5) -> CrossoverFit:
    """Two power laws on disjoint scale ranges, split where the total squared
    log-residual is smallest.

    ``l_cross`` is where the two fitted lines intersect, clipped to the gap
    between the last scale of the left segment and the first of the right.
    """
    scales, values = F.scales, F.values
    if scales.size < max(12, 2 * min_side):
        raise InvalidInput(f"crossover fit needs at least 12 scales, got {scales.size}")
    if np.any(values <= 0):
        raise InvalidInput("fluctuation function is degenerate (zero values)")
    lx, ly = np.log(scales.astype(float)), np.log(values)

    best = None
    for k in range(min_side, scales.size - min_side + 1):
        left = _ols(lx[:k], ly[:k])
        right = _ols(lx[k:], ly[k:])
        total = left[3] + right[3]
        if best is None or total < best[0]:
            best = (total, k, left, right)
    total, k, left, right = best

    lo, hi = lx[k - 1], lx[k]
    dslope = left[0] - right[0]
    if abs(dslope) > 1e-12:
        cross = (right[1] - left[1]) / dslope
        cross = min(max(cross, lo), hi)
    else:
        cross = 0.5 * (lo + hi)
    l_cross = float(np.exp(cross))
    split = int(scales[k - 1] if cross - lo <= hi - cross else scales[k])

    def as_fit(fit, sl):
        return ScalingFit(H=fit[0], stderr=fit[2], l_min=int(sl[0]), l_max=int(sl[-1]), intercept=fit[1])

    return CrossoverFit(
        H1=left[0],
        H2=right[0],
        l_cross=l_cross,
        split_scale=split,
        residual=float(total),
        left=as_fit(left, scales[:k]),
        right=as_fit(right, scales[k:]),
    )


def single_fit_residual(F: FluctuationFunction) -> float:
    return _ols(np.log(F.scales.astype(float)), np.log(F.values))[3]


def daily_hurst(
    days: Sequence[Sequence[float]], order: int = 1, l_min: int = 10, per_decade: int = 20
) -> DailyHurst:
    """Average of per-day Hurst exponents; days too short for 5 scales are skipped."""
    per_day, skipped = [], []
    for j, day in enumerate(days):
        series = np.asarray(day, dtype=float)
        scales = log_scales(series.size, l_min=l_min, per_decade=per_decade)
        if scales.size < 5:
            skipped.append(j)
            continue
        F = fluctuation_function(series, scales, order)
        if F.degenerate:
            skipped.append(j)
            continue
        per_day.append(hurst(F).H)
    if not per_day:
        raise InvalidInput("no day is long enough for a Hurst estimate")
    return DailyHurst(
        H_D=float(np.mean(per_day)),
        per_day=tuple(per_day),
        n_days=len(per_day),
        skipped=tuple(skipped),
    )
