"""Batch clearing of the opening call and the residual limit-order book."""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .orderflow import Action, DayContext, InvalidInput, OrderEvent, Side

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EffectiveOrder:
    order_ref: int
    side: Side
    price: int
    size: int
    time_cs: int


@dataclass
class AuctionBatch:
    stock_id: str
    day: dt.date | None
    ctx: DayContext
    orders: list[EffectiveOrder] = field(default_factory=list)
    n_rejected: int = 0
    rejected_volume: dict[Side, int] = field(default_factory=lambda: {Side.BUY: 0, Side.SELL: 0})
    canceled_volume: dict[Side, int] = field(default_factory=lambda: {Side.BUY: 0, Side.SELL: 0})
    warnings: list[str] = field(default_factory=list)

    def side(self, side: Side) -> list[EffectiveOrder]:
        return [o for o in self.orders if o.side is side]


@dataclass(frozen=True)
class ClearingResult:
    clearing_price: int | None
    executed_volume: int
    fills: dict[int, int]
    imbalance: int


@dataclass(frozen=True)
class LOBSnapshot:
    best_bid: int | None
    best_ask: int | None
    buy_levels: dict[int, tuple[int, int]]
    sell_levels: dict[int, tuple[int, int]]

    def levels(self, side: Side) -> dict[int, tuple[int, int]]:
        return self.buy_levels if side is Side.BUY else self.sell_levels


def build_batch(events: Sequence[OrderEvent], ctx: DayContext) -> AuctionBatch:
    """Apply cancels and the price-limit rule to one (stock, day) event stream."""
    keys = {(e.stock_id, e.day) for e in events}
    if len(keys) > 1:
        raise InvalidInput(f"events span several (stock, day) pairs: {sorted(keys, key=str)}")
    stock_id, day = next(iter(keys)) if keys else ("", None)
    batch = AuctionBatch(stock_id=stock_id, day=day, ctx=ctx)

    live: dict[int, EffectiveOrder] = {}
    seen: set[int] = set()
    for e in events:
        if e.action is Action.SUBMIT:
            if e.order_ref in seen:
                raise InvalidInput(f"duplicate submit for order_ref {e.order_ref}")
            seen.add(e.order_ref)
            if not ctx.in_band(e.price):
                batch.n_rejected += 1
                batch.rejected_volume[e.side] += e.size
                continue
            live[e.order_ref] = EffectiveOrder(e.order_ref, e.side, e.price, e.size, e.time_cs)
        else:
            order = live.pop(e.order_ref, None)
            if order is None:
                msg = f"{stock_id} {day}: cancel of unknown order_ref {e.order_ref} skipped"
                log.warning(msg)
                batch.warnings.append(msg)
                continue
            batch.canceled_volume[order.side] += order.size
    batch.orders = list(live.values())
    return batch


def price_grid(ctx: DayContext) -> np.ndarray:
    lo, hi = ctx.limit_band
    return np.arange(lo, hi + 1, ctx.tick, dtype=np.int64)


def demand_supply(batch: AuctionBatch, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative buy volume at or above, and sell volume at or below, each grid price."""
    buys = batch.side(Side.BUY)
    sells = batch.side(Side.SELL)
    bp = np.array([o.price for o in buys], dtype=np.int64)
    bs = np.array([o.size for o in buys], dtype=np.int64)
    sp = np.array([o.price for o in sells], dtype=np.int64)
    ss = np.array([o.size for o in sells], dtype=np.int64)

    order = np.argsort(bp, kind="stable")
    bp, bs = bp[order], bs[order]
    # suffix sums: volume of buys priced >= p
    bsum = np.concatenate([np.cumsum(bs[::-1])[::-1], [0]])
    demand = bsum[np.searchsorted(bp, grid, side="left")]

    order = np.argsort(sp, kind="stable")
    sp, ss = sp[order], ss[order]
    ssum = np.concatenate([[0], np.cumsum(ss)])
    supply = ssum[np.searchsorted(sp, grid, side="right")]
    return demand, supply


def clear(batch: AuctionBatch) -> ClearingResult:
    """Single-price clearing of a batch.

    The price maximises executable volume over every tick in the limit band.
    Ties go to the smaller imbalance, then the price closest to the previous
    close, then the lower price. Fills follow price then time priority; the
    marginal order on the heavy side may be split.
    """
    grid = price_grid(batch.ctx)
    if not batch.orders or grid.size == 0:
        return ClearingResult(None, 0, {}, 0)
    demand, supply = demand_supply(batch, grid)
    volume = np.minimum(demand, supply)
    vmax = int(volume.max())
    if vmax == 0:
        return ClearingResult(None, 0, {}, 0)

    imbalance = np.abs(demand - supply)
    dist = np.abs(grid - batch.ctx.prev_close)
    # lexsort keys are applied last-to-first
    best = np.lexsort((grid, dist, imbalance, -volume))[0]
    price = int(grid[best])

    fills: dict[int, int] = {}
    buys = sorted(
        (o for o in batch.orders if o.side is Side.BUY and o.price >= price),
        key=lambda o: (-o.price, o.time_cs, o.order_ref),
    )
    sells = sorted(
        (o for o in batch.orders if o.side is Side.SELL and o.price <= price),
        key=lambda o: (o.price, o.time_cs, o.order_ref),
    )
    for queue in (buys, sells):
        left = vmax
        for o in queue:
            if left == 0:
                break
            q = min(o.size, left)
            fills[o.order_ref] = q
            left -= q
    return ClearingResult(price, vmax, fills, int(imbalance[best]))


def price_level(p: int, side: Side, best: int, tick: int = 1) -> int:
    """Distance in ticks from the best quote on the order's own side, plus one."""
    if side is Side.BUY:
        diff = best - p
    else:
        diff = p - best
    if diff < 0:
        raise InvalidInput(f"{side.value} price {p} lies beyond the best quote {best}")
    if diff % tick:
        raise InvalidInput(f"price {p} is off the tick grid of {tick}")
    return diff // tick + 1


def residual_book(batch: AuctionBatch, result: ClearingResult) -> LOBSnapshot:
    remaining = {Side.BUY: [], Side.SELL: []}
    for o in batch.orders:
        left = o.size - result.fills.get(o.order_ref, 0)
        if left < 0:
            raise InvalidInput(f"order {o.order_ref} overfilled")
        if left:
            remaining[o.side].append((o.price, left))

    best_bid = max((p for p, _ in remaining[Side.BUY]), default=None)
    best_ask = min((p for p, _ in remaining[Side.SELL]), default=None)
    levels = {}
    for side, best in ((Side.BUY, best_bid), (Side.SELL, best_ask)):
        acc: dict[int, list[int]] = {}
        for p, q in remaining[side]:
            d = price_level(p, side, best, batch.ctx.tick)
            slot = acc.setdefault(d, [0, 0])
            slot[0] += q
            slot[1] += 1
        levels[side] = {d: (v, n) for d, (v, n) in sorted(acc.items())}
    return LOBSnapshot(best_bid, best_ask, levels[Side.BUY], levels[Side.SELL])
