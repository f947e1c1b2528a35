"""Order-flow events of the opening call and their descriptive statistics.

Prices are integer ticks (1 tick = 0.01 currency units), times are integer
centiseconds since midnight. Floating point only appears in ratios.
"""

from __future__ import annotations

import datetime as dt
import enum
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

AUCTION_OPEN_CS = 9 * 360000 + 15 * 6000  # 09:15:00.00
AUCTION_CLOSE_CS = 9 * 360000 + 25 * 6000  # 09:25:00.00
BOARD_LOT = 100


class InvalidInput(ValueError):
    """Raised when an operation receives data outside its contract."""


class Action(str, enum.Enum):
    SUBMIT = "submit"
    CANCEL = "cancel"


class Side(str, enum.Enum):
    BUY = "buy"
    SELL = "sell"


@dataclass(frozen=True, slots=True)
class OrderEvent:
    stock_id: str
    day: dt.date
    time_cs: int
    action: Action
    order_ref: int
    side: Side
    price: int
    size: int

    @property
    def is_submit(self) -> bool:
        return self.action is Action.SUBMIT


@dataclass(frozen=True)
class DayContext:
    """Per (stock, day) reference data: previous close, tick, limit band."""

    prev_close: int
    tick: int = 1
    limit_fraction: Fraction = Fraction(1, 10)

    def __post_init__(self):
        if self.prev_close <= 0:
            raise InvalidInput(f"prev_close must be positive, got {self.prev_close}")
        if self.tick <= 0:
            raise InvalidInput(f"tick must be positive, got {self.tick}")
        frac = Fraction(self.limit_fraction)
        if not 0 < frac < 1:
            raise InvalidInput(f"limit_fraction must lie in (0, 1), got {frac}")
        object.__setattr__(self, "limit_fraction", frac)

    @property
    def limit_band(self) -> tuple[int, int]:
        """Lowest and highest admissible price in ticks (round half up)."""
        lo = _round_half_up(self.prev_close * (1 - self.limit_fraction))
        hi = _round_half_up(self.prev_close * (1 + self.limit_fraction))
        return lo, hi

    def in_band(self, price: int) -> bool:
        lo, hi = self.limit_band
        return lo <= price <= hi


def _round_half_up(x: Fraction) -> int:
    return int((x + Fraction(1, 2)).__floor__())


@dataclass(frozen=True)
class FlowStats:
    n_sell: int
    n_buy: int
    ratio_n: float
    mean_size_sell: float
    mean_size_buy: float
    ratio_s: float
    n_cancel: int
    mean_daily_orders: int

    def as_row(self) -> dict:
        return {
            "N_s": self.n_sell,
            "N_b": self.n_buy,
            "R_N": self.ratio_n,
            "mean_s_s": self.mean_size_sell,
            "mean_s_b": self.mean_size_buy,
            "R_s": self.ratio_s,
            "N_c": self.n_cancel,
            "mean_N": self.mean_daily_orders,
        }


@dataclass
class SizeHistogram:
    lo: int
    hi: int
    counts: dict[int, int] = field(default_factory=dict)

    def count(self, size: int) -> int:
        return self.counts.get(size, 0)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class Spike:
    c: int
    size: int
    count: int
    neighbor_mean: float | None
    ratio: float | None
    flagged: bool


@dataclass(frozen=True)
class SpikeReport:
    k: int
    spikes: tuple[Spike, ...]
    threshold: float

    @property
    def n_flagged(self) -> int:
        return sum(s.flagged for s in self.spikes)

    @property
    def all_flagged(self) -> bool:
        return all(s.flagged for s in self.spikes)


def relative_price(e: OrderEvent, ctx: DayContext) -> float:
    """Signed relative distance of an order's price from the previous close.

    Positive values are aggressive on either side: a buy above the close or
    a sell below it.
    """
    if e.action is not Action.SUBMIT:
        raise InvalidInput("relative price is only defined for submitted orders")
    pc = ctx.prev_close
    diff = e.price - pc if e.side is Side.BUY else pc - e.price
    return diff / pc


def relative_prices(events: Iterable[OrderEvent], contexts: dict) -> np.ndarray:
    """Relative prices of all submits, in input order.

    ``contexts`` maps ``(stock_id, day)`` to a :class:`DayContext`.
    """
    return np.array(
        [relative_price(e, contexts[(e.stock_id, e.day)]) for e in events if e.is_submit],
        dtype=float,
    )


def relative_price_pdf(x: np.ndarray, width: float = 0.0025, limit: float = 0.1):
    """Histogram density of relative prices on bins centred at multiples of ``width``.

    Returns ``(centers, density)``; x=0 and x=-limit fall on bin centres.
    """
    x = np.asarray(x, dtype=float)
    n_half = int(round(limit / width))
    centers = np.arange(-n_half, n_half + 1) * width
    edges = np.concatenate([centers - width / 2, [centers[-1] + width / 2]])
    counts, _ = np.histogram(x, bins=edges)
    total = max(len(x), 1)
    return centers, counts / (total * width)


def flow_stats(events: Sequence[OrderEvent], days: int) -> FlowStats:
    stocks = {e.stock_id for e in events}
    if len(stocks) > 1:
        raise InvalidInput(f"flow_stats expects a single stock, got {sorted(stocks)}")
    if days <= 0:
        raise InvalidInput("days must be positive")
    sell_sizes = [e.size for e in events if e.is_submit and e.side is Side.SELL]
    buy_sizes = [e.size for e in events if e.is_submit and e.side is Side.BUY]
    n_cancel = sum(1 for e in events if e.action is Action.CANCEL)
    n_s, n_b = len(sell_sizes), len(buy_sizes)
    if n_b == 0:
        raise InvalidInput("no buy orders: N_s/N_b is undefined")
    # integer sums keep the statistics independent of event order
    mean_s = sum(sell_sizes) / n_s if n_s else float("nan")
    mean_b = sum(buy_sizes) / n_b
    return FlowStats(
        n_sell=n_s,
        n_buy=n_b,
        ratio_n=n_s / n_b,
        mean_size_sell=mean_s,
        mean_size_buy=mean_b,
        ratio_s=mean_s / mean_b,
        n_cancel=n_cancel,
        mean_daily_orders=_round_half_up(Fraction(n_s + n_b, days)),
    )


def size_histogram(events: Iterable[OrderEvent], lo: int = 1, hi: int = 10**4) -> SizeHistogram:
    if lo < 1:
        raise InvalidInput("histogram range must start at size >= 1")
    if hi < lo:
        raise InvalidInput("empty histogram range")
    counts = Counter(e.size for e in events if e.is_submit and lo <= e.size <= hi)
    return SizeHistogram(lo=lo, hi=hi, counts=dict(sorted(counts.items())))


def clustering_spikes(
    h: SizeHistogram, k: int, m: int = 5, threshold: float = 2.0
) -> SpikeReport:
    """Compare counts at round sizes c*10**k (c = 1..10) with nearby sizes.

    The neighbourhood of each round size is the ``m`` closest sizes on each
    side that are not themselves multiples of 10**k and lie inside the
    histogram range.
    """
    if k < 1:
        raise InvalidInput("k must be >= 1")
    if not h.counts:
        raise InvalidInput("empty histogram")
    base = 10**k
    spikes = []
    for c in range(1, 11):
        s = c * base
        neigh = _neighbors(s, base, m, h.lo, h.hi)
        count = h.count(s) if h.lo <= s <= h.hi else 0
        if not neigh:
            spikes.append(Spike(c, s, count, None, None, False))
            continue
        nmean = sum(h.count(x) for x in neigh) / len(neigh)
        if nmean > 0:
            ratio = count / nmean
        elif count > 0:
            ratio = float("inf")
        else:
            ratio = None
        flagged = ratio is not None and ratio > threshold
        spikes.append(Spike(c, s, count, nmean, ratio, flagged))
    return SpikeReport(k=k, spikes=tuple(spikes), threshold=threshold)


def _neighbors(s: int, base: int, m: int, lo: int, hi: int) -> list[int]:
    out = []
    for step in (-1, 1):
        x, got = s, 0
        while got < m:
            x += step
            if x < lo or x > hi:
                break
            if x % base:
                out.append(x)
                got += 1
    return out


def normalize_sizes(events: Iterable[OrderEvent]) -> np.ndarray:
    """Submit sizes divided by their mean size."""
    sizes = np.array([e.size for e in events if e.is_submit], dtype=float)
    if sizes.size == 0:
        raise InvalidInput("no submitted orders to normalise")
    return sizes / sizes.mean()
