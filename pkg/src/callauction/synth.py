"""Synthetic opening-call order flow.

The generator is the test oracle for the rest of the package: every knob
maps onto a statistic that some analysis should recover (side ratio, price
memory, size distribution, round-size spikes, round-price clustering).
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from . import distfit, noise
from .flowio import OrderFlow
from .orderflow import (
    AUCTION_CLOSE_CS,
    AUCTION_OPEN_CS,
    BOARD_LOT,
    Action,
    DayContext,
    InvalidInput,
    OrderEvent,
    Side,
)

PROCESS_KINDS = ("iid", "fgn", "spliced")


@dataclass
class SynthConfig:
    stocks: list[str] = field(default_factory=lambda: ["000001"])
    n_days: int = 20
    start_date: str = "2003-01-02"
    orders_per_day: float = 500.0
    sell_buy_ratio: float = 2.13
    # latent price process, unit variance: {"kind": "iid"} | {"kind": "fgn", "H": h}
    # | {"kind": "spliced", "H1": h1, "H2": h2, "l_cross": l}
    price_process: dict = field(default_factory=lambda: {"kind": "iid"})
    price_mean: float = -0.01
    price_std: float = 0.02
    zero_mass: float = 0.0  # fraction of orders placed exactly at the previous close
    sell_limit_mass: float = 0.0  # fraction of sells placed at the upper limit price
    price_preference: float = 0.0  # fraction of prices snapped to multiples of 5 ticks
    size_process: dict = field(default_factory=lambda: {"kind": "iid"})
    buy_size: dict = field(default_factory=lambda: {"family": "qgamma", "theta": 0.216, "beta": 0.155, "q": 1.354})
    sell_size: dict = field(default_factory=lambda: {"family": "qgamma", "theta": 0.062, "beta": 1.585, "q": 1.237})
    size_scale: float = 2000.0  # shares per unit of the size distribution
    cluster_fraction: float = 0.0  # fraction of sizes snapped to c * 10**k
    cluster_layers: list[int] = field(default_factory=lambda: [1, 2, 3, 4])  # eligible k
    board_lot: bool = True
    cancel_fraction: float = 0.0
    prev_close: int = 1000
    prev_close_vol: float = 0.02
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("zero_mass", "sell_limit_mass", "price_preference", "cluster_fraction", "cancel_fraction"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise InvalidInput(f"{name} must lie in [0, 1], got {val}")
        if self.n_days < 1 or self.orders_per_day <= 0 or self.sell_buy_ratio <= 0:
            raise InvalidInput("n_days, orders_per_day and sell_buy_ratio must be positive")
        if not self.stocks:
            raise InvalidInput("at least one stock is required")
        if self.prev_close <= 0 or self.size_scale <= 0 or self.price_std < 0:
            raise InvalidInput("prev_close and size_scale must be positive, price_std non-negative")
        for proc in (self.price_process, self.size_process):
            _check_process(proc)
        self.size_params(Side.BUY)
        self.size_params(Side.SELL)

    def size_params(self, side: Side) -> distfit.DistParams:
        spec = dict(self.buy_size if side is Side.BUY else self.sell_size)
        return distfit.DistParams(**spec)

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _check_process(proc: dict):
    kind = proc.get("kind")
    if kind not in PROCESS_KINDS:
        raise InvalidInput(f"process kind must be one of {PROCESS_KINDS}, got {kind!r}")
    hs = {"fgn": ("H",), "spliced": ("H1", "H2")}.get(kind, ())
    for h in hs:
        if not 0 < proc.get(h, -1) < 1:
            raise InvalidInput(f"{kind} process needs {h} in (0, 1)")
    if kind == "spliced" and not proc.get("l_cross", 0) > 1:
        raise InvalidInput("spliced process needs l_cross > 1")


def latent_series(proc: dict, n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance Gaussian series from a process description."""
    _check_process(proc)
    kind = proc["kind"]
    if kind == "iid" or n < 2:
        return rng.standard_normal(n)
    if kind == "fgn":
        return noise.fgn(n, proc["H"], rng)
    l_cross = min(float(proc["l_cross"]), n - 1)
    return noise.spliced_noise(n, proc["H1"], proc["H2"], l_cross, rng)


def draw_sizes(cfg: SynthConfig, side: Side, u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Integer order sizes from uniform scores ``u`` (one per order)."""
    v = distfit.quantile(cfg.size_params(side), u)
    sizes = np.maximum(np.rint(v * cfg.size_scale), 1).astype(np.int64)
    n = sizes.size
    if cfg.cluster_fraction > 0 and n:
        # round-size preference: snap to one significant digit, c * 10**k
        k = np.floor(np.log10(sizes)).astype(np.int64)
        routed = (rng.random(n) < cfg.cluster_fraction) & np.isin(k, cfg.cluster_layers)
        unit = 10**k
        sizes = np.where(routed, np.rint(sizes / unit).astype(np.int64) * unit, sizes)
    if side is Side.BUY and cfg.board_lot:
        sizes = np.maximum(np.rint(sizes / BOARD_LOT), 1).astype(np.int64) * BOARD_LOT
    return sizes


def _trading_days(start: dt.date, n: int) -> list[dt.date]:
    days, d = [], start
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def _prices(cfg: SynthConfig, x: np.ndarray, sides: np.ndarray, pc: int, ctx: DayContext, rng) -> np.ndarray:
    lo, hi = ctx.limit_band
    is_sell = sides == 1
    raw = np.where(is_sell, pc * (1 - x), pc * (1 + x))
    prices = np.clip(np.rint(raw), lo, hi).astype(np.int64)
    snap = rng.random(x.size) < cfg.price_preference
    # orders pinned at the close or the limit keep their price
    snap &= (x != 0.0) & (np.abs(x) < 0.1)
    if snap.any():
        snapped = 5 * np.rint(prices / 5).astype(np.int64)
        snapped = np.where(snapped > hi, snapped - 5, snapped)
        snapped = np.where(snapped < lo, snapped + 5, snapped)
        prices = np.where(snap, snapped, prices)
    return prices


def synth_flow(cfg: SynthConfig) -> OrderFlow:
    """Generate a seeded order flow for every configured stock and day."""
    cfg.validate()
    root = np.random.default_rng(cfg.seed)
    stock_seeds = root.integers(0, 2**63 - 1, size=len(cfg.stocks))
    days = _trading_days(dt.date.fromisoformat(cfg.start_date), cfg.n_days)
    p_sell = cfg.sell_buy_ratio / (1.0 + cfg.sell_buy_ratio)
    flow = OrderFlow()

    for stock, sseed in zip(cfg.stocks, stock_seeds):
        rng = np.random.default_rng(int(sseed))
        counts = rng.poisson(cfg.orders_per_day, size=len(days))
        total = int(counts.sum())
        z = latent_series(cfg.price_process, total, rng)
        size_z = latent_series(cfg.size_process, total, rng)
        size_u = np.clip(special.ndtr(size_z), 1e-15, 1 - 1e-15)
        sides = (rng.random(total) < p_sell).astype(np.int8)

        x = cfg.price_mean + cfg.price_std * z
        x = np.where(rng.random(total) < cfg.zero_mass, 0.0, x)
        at_limit = (sides == 1) & (rng.random(total) < cfg.sell_limit_mass)
        x = np.clip(np.where(at_limit, -0.1, x), -0.1, 0.1)

        sizes = np.empty(total, dtype=np.int64)
        for side, code in ((Side.BUY, 0), (Side.SELL, 1)):
            mask = sides == code
            sizes[mask] = draw_sizes(cfg, side, size_u[mask], rng)

        pc = cfg.prev_close
        start = 0
        for day, n in zip(days, counts):
            ctx = DayContext(prev_close=int(pc))
            sl = slice(start, start + int(n))
            start += int(n)
            prices = _prices(cfg, x[sl], sides[sl], int(pc), ctx, rng)
            times = np.sort(rng.integers(AUCTION_OPEN_CS, AUCTION_CLOSE_CS, int(n)))
            events = _day_events(cfg, stock, day, times, sides[sl], prices, sizes[sl], rng)
            flow.events[(stock, day)] = events
            flow.contexts[(stock, day)] = ctx
            lo, hi = ctx.limit_band
            pc = int(np.clip(np.rint(pc * np.exp(cfg.prev_close_vol * rng.standard_normal())), lo, hi))
    return flow


def _day_events(cfg, stock, day, times, sides, prices, sizes, rng) -> list[OrderEvent]:
    rows = []
    for i, (t, s, p, q) in enumerate(zip(times, sides, prices, sizes)):
        side = Side.SELL if s else Side.BUY
        rows.append((int(t), 0, i, OrderEvent(stock, day, int(t), Action.SUBMIT, i + 1, side, int(p), int(q))))
    cancel = rng.random(len(rows)) < cfg.cancel_fraction
    for (t, _, i, e), c in zip(list(rows), cancel):
        if c and t + 1 < AUCTION_CLOSE_CS:
            tc = int(rng.integers(t + 1, AUCTION_CLOSE_CS))
            rows.append((tc, 1, i, dataclasses.replace(e, time_cs=tc, action=Action.CANCEL)))
    rows.sort(key=lambda r: r[:3])
    return [r[3] for r in rows]
