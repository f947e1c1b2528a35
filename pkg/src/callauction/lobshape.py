"""Average shape of the residual book: V(Δ), n(Δ), exponential decay rates
and periodic price-clustering peaks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .auction import LOBSnapshot
from .orderflow import InvalidInput, Side

DEFAULT_FIT_RANGE = (2, 200)


@dataclass(frozen=True)
class BookProfile:
    side: Side
    levels: np.ndarray  # 1..max_level
    volume: np.ndarray
    count: np.ndarray
    samples: np.ndarray  # snapshots contributing to each level

    def values(self, quantity: str) -> np.ndarray:
        if quantity == "volume":
            return self.volume
        if quantity == "count":
            return self.count
        raise ValueError(f"quantity must be 'volume' or 'count', got {quantity!r}")

    def as_rows(self) -> list[tuple[int, float, float, int]]:
        return [
            (int(d), float(v), float(n), int(s))
            for d, v, n, s in zip(self.levels, self.volume, self.count, self.samples)
        ]


@dataclass(frozen=True)
class DecayFit:
    rate: float
    stderr: float
    amplitude: float
    fit_range: tuple[int, int]
    n_levels: int


@dataclass(frozen=True)
class PeakReport:
    period: int
    phase: int
    phase_mean: float
    other_mean: float
    ratio: float
    flagged: bool
    threshold: float


def average_profiles(snapshots: Sequence[LOBSnapshot]) -> tuple[BookProfile, BookProfile]:
    """Mean volume and order count per price level over all snapshots.

    A snapshot contributes to levels 1..(its deepest occupied level), with
    unoccupied levels in that span counted as zero; deeper levels leave it
    out of the denominator.
    """
    if not snapshots:
        raise InvalidInput("no snapshots to average")
    return tuple(_side_profile(snapshots, side) for side in (Side.BUY, Side.SELL))


def _side_profile(snapshots: Sequence[LOBSnapshot], side: Side) -> BookProfile:
    depth = max((max(s.levels(side), default=0) for s in snapshots), default=0)
    vol = np.zeros(depth)
    cnt = np.zeros(depth)
    samples = np.zeros(depth, dtype=np.int64)
    for snap in snapshots:
        levels = snap.levels(side)
        if not levels:
            continue
        samples[: max(levels)] += 1
        for d, (v, n) in levels.items():
            vol[d - 1] += v
            cnt[d - 1] += n
    with np.errstate(invalid="ignore"):
        vol = np.where(samples > 0, vol / np.maximum(samples, 1), 0.0)
        cnt = np.where(samples > 0, cnt / np.maximum(samples, 1), 0.0)
    return BookProfile(side=side, levels=np.arange(1, depth + 1), volume=vol, count=cnt, samples=samples)


def _select(profile: BookProfile, quantity: str, fit_range):
    lo, hi = fit_range
    y = profile.values(quantity)
    d = profile.levels
    mask = (d >= lo) & (d <= hi)
    return d[mask].astype(float), y[mask]


def exp_decay_fit(
    profile: BookProfile, fit_range: tuple[int, int] = DEFAULT_FIT_RANGE, quantity: str = "volume"
) -> DecayFit:
    """Least-squares line through log V (or log n) against Δ; rate = -slope."""
    d, y = _select(profile, quantity, fit_range)
    pos = y > 0
    d, y = d[pos], y[pos]
    if d.size < 10:
        raise InvalidInput(f"need at least 10 positive levels in {fit_range}, got {d.size}")
    ly = np.log(y)
    dm = d.mean()
    sxx = np.sum((d - dm) ** 2)
    slope = np.sum((d - dm) * (ly - ly.mean())) / sxx
    intercept = ly.mean() - slope * dm
    rss = np.sum((ly - intercept - slope * d) ** 2)
    stderr = float(np.sqrt(rss / (d.size - 2) / sxx))
    return DecayFit(
        rate=float(-slope),
        stderr=stderr,
        amplitude=float(np.exp(intercept)),
        fit_range=(int(d[0]), int(d[-1])),
        n_levels=int(d.size),
    )


def periodic_peaks(
    profile: BookProfile,
    period: int = 5,
    phase: int = 1,
    threshold: float = 1.5,
    fit_range: tuple[int, int] = DEFAULT_FIT_RANGE,
    quantity: str = "volume",
) -> PeakReport:
    """Compare levels Δ ≡ phase (mod period) with the rest after removing the
    exponential trend.

    The trend is a log-linear fit with one offset per residue class, so the
    periodic modulation does not bias the slope. Detrended values are
    y / exp(baseline + slope Δ), the baseline being the mean offset of the
    non-phase classes. Class means are geometric means over the positive
    levels, which keeps sparse deep levels from dominating; on a noiseless
    profile they equal the arithmetic ones.
    """
    if period < 2:
        raise InvalidInput("period must be >= 2")
    d, y = _select(profile, quantity, fit_range)
    if d.size < 3 * period:
        raise InvalidInput(f"profile spans {d.size} levels in {fit_range}, need at least {3 * period}")
    pos = y > 0
    d, y = d[pos], y[pos]
    residue = d.astype(np.int64) % period
    target = residue == (phase % period)
    classes = np.unique(residue)
    if d.size < len(classes) + 2 or not target.any() or target.all():
        raise InvalidInput("not enough positive levels to detrend")
    design = np.column_stack([d] + [(residue == c).astype(float) for c in classes])
    coef, *_ = np.linalg.lstsq(design, np.log(y), rcond=None)
    slope = coef[0]
    offsets = dict(zip(classes, coef[1:]))
    base = np.mean([v for c, v in offsets.items() if c != phase % period])
    log_detrended = np.log(y) - base - slope * d
    phase_mean = float(np.exp(log_detrended[target].mean()))
    other_mean = float(np.exp(log_detrended[~target].mean()))
    ratio = phase_mean / other_mean
    return PeakReport(
        period=period,
        phase=phase,
        phase_mean=phase_mean,
        other_mean=other_mean,
        ratio=float(ratio),
        # inclusive, so a modulation of exactly (threshold - 1) is flagged
        flagged=bool(ratio >= threshold * (1 - 1e-9)),
        threshold=threshold,
    )
