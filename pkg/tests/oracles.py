"""Independent reference implementations used as test oracles."""

import numpy as np

from callauction.auction import LOBSnapshot
from callauction.orderflow import Side


def brute_force_clear(orders, prev_close, lo, hi):
    """Scan every tick in [lo, hi] with plain loops.

    ``orders`` are (side, price, size) tuples. Returns (price, volume,
    imbalance) or (None, 0, 0) when nothing crosses.
    """
    best = None
    for p in range(lo, hi + 1):
        demand = sum(q for s, pr, q in orders if s is Side.BUY and pr >= p)
        supply = sum(q for s, pr, q in orders if s is Side.SELL and pr <= p)
        vol = min(demand, supply)
        key = (-vol, abs(demand - supply), abs(p - prev_close), p)
        if best is None or key < best[0]:
            best = (key, p, vol, abs(demand - supply))
    if best is None or best[2] == 0:
        return None, 0, 0
    return best[1], best[2], best[3]


def exponential_book(rate, depth, amplitude=2000.0, modulation=None, period=5, phase=1):
    """One snapshot per side holding amplitude*exp(-rate*(d-1)) shares at level d.

    ``modulation`` multiplies levels with d % period == phase by (1 + modulation).
    Volumes are left as floats so the decay is exact.
    """
    levels = {}
    for d in range(1, depth + 1):
        v = amplitude * np.exp(-rate * (d - 1))
        if modulation is not None and d % period == phase % period:
            v *= 1.0 + modulation
        levels[d] = (v, v / 100.0)
    return levels


def snapshot(buy_levels, sell_levels, best_bid=1000, best_ask=1001):
    return LOBSnapshot(best_bid, best_ask, dict(buy_levels), dict(sell_levels))


def poisson_books(rate, n_snapshots, lam1, rng, depth=400, mean_size=1000.0, modulation=None, period=5, phase=1):
    """Random residual books: Poisson(lam1 * exp(-rate*(d-1))) orders at level d,
    exponential sizes. Returns a list of LOBSnapshot with identical buy and
    sell sides."""
    d = np.arange(1, depth + 1)
    lam = lam1 * np.exp(-rate * (d - 1))
    if modulation is not None:
        lam = np.where(d % period == phase % period, lam * (1 + modulation), lam)
    books = []
    for _ in range(n_snapshots):
        counts = rng.poisson(lam)
        levels = {}
        for level, n in zip(d, counts):
            if n:
                levels[int(level)] = (int(np.ceil(rng.exponential(mean_size, n)).sum()), int(n))
        books.append(LOBSnapshot(1000, 1001, levels, levels))
    return books
