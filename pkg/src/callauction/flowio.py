"""Reading and writing order-flow CSV files.

``orders.csv``::

    stock_id,date,time_cs,action,order_ref,side,price_ticks,size

``prev_close.csv``::

    stock_id,date,prev_close_ticks

UTF-8, LF line endings, no quoting. ``action`` is ``submit`` or ``cancel``
and ``side`` is ``buy`` or ``sell``; dates are ISO ``YYYY-MM-DD``.
"""

from __future__ import annotations

import datetime as dt
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

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

log = logging.getLogger(__name__)

ORDERS_HEADER = "stock_id,date,time_cs,action,order_ref,side,price_ticks,size"
PREV_CLOSE_HEADER = "stock_id,date,prev_close_ticks"
ORDERS_FILE = "orders.csv"
PREV_CLOSE_FILE = "prev_close.csv"

DayKey = tuple[str, dt.date]


class DataError(ValueError):
    """Input that cannot be ingested at all."""


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass
class OrderFlow:
    """Events grouped by (stock, day) with their day contexts."""

    events: dict[DayKey, list[OrderEvent]] = field(default_factory=dict)
    contexts: dict[DayKey, DayContext] = field(default_factory=dict)
    errors: list[RowError] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def stocks(self) -> list[str]:
        return sorted({s for s, _ in self.events})

    def days(self, stock_id: str) -> list[dt.date]:
        return sorted(d for s, d in self.events if s == stock_id)

    def stock_events(self, stock_id: str) -> list[OrderEvent]:
        """All events of one stock, days in date order, each in time order."""
        out: list[OrderEvent] = []
        for day in self.days(stock_id):
            out.extend(self.events[(stock_id, day)])
        return out

    @property
    def n_events(self) -> int:
        return sum(len(v) for v in self.events.values())


def _parse_order_row(fields: list[str], board_lot: bool, window: tuple[int, int]) -> OrderEvent:
    if len(fields) != 8:
        raise InvalidInput(f"expected 8 fields, got {len(fields)}")
    stock_id, date_s, time_s, action_s, ref_s, side_s, price_s, size_s = fields
    if not stock_id:
        raise InvalidInput("empty stock_id")
    try:
        day = dt.date.fromisoformat(date_s)
    except ValueError:
        raise InvalidInput(f"bad date {date_s!r}") from None
    try:
        time_cs, ref, price, size = int(time_s), int(ref_s), int(price_s), int(size_s)
    except ValueError:
        raise InvalidInput("time_cs, order_ref, price_ticks and size must be integers") from None
    try:
        action, side = Action(action_s), Side(side_s)
    except ValueError:
        raise InvalidInput(f"bad action/side {action_s!r}/{side_s!r}") from None
    if not window[0] <= time_cs < window[1]:
        raise InvalidInput(f"time_cs {time_cs} outside the auction window")
    if price <= 0:
        raise InvalidInput(f"price must be positive, got {price}")
    if action is Action.SUBMIT:
        if size <= 0:
            raise InvalidInput(f"size must be positive, got {size}")
        if board_lot and side is Side.BUY and size % BOARD_LOT:
            raise InvalidInput(f"buy size {size} is not a multiple of the board lot {BOARD_LOT}")
    return OrderEvent(stock_id, day, time_cs, action, ref, side, price, size)


def read_prev_close(path: str | Path) -> dict[DayKey, int]:
    path = Path(path)
    out: dict[DayKey, int] = {}
    with path.open(encoding="utf-8", newline="\n") as fh:
        header = fh.readline().rstrip("\n")
        if header != PREV_CLOSE_HEADER:
            raise DataError(f"{path}: header must be {PREV_CLOSE_HEADER!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            try:
                if len(parts) != 3:
                    raise ValueError
                out[(parts[0], dt.date.fromisoformat(parts[1]))] = int(parts[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed prev_close row {line!r}") from None
    return out


def parse_orderflow(
    path: str | Path,
    prev_close_path: str | Path | None = None,
    board_lot: bool = True,
    window: tuple[int, int] = (AUCTION_OPEN_CS, AUCTION_CLOSE_CS),
) -> OrderFlow:
    """Parse and validate an orders file.

    ``path`` may be the orders CSV or a directory holding ``orders.csv`` and
    ``prev_close.csv``. Malformed rows are collected in ``errors`` with their
    line numbers; days without a previous close are dropped with a warning;
    a repeated Submit order_ref within a day raises :class:`DataError`.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file or directory")
    if path.is_dir():
        path = path / ORDERS_FILE
    if prev_close_path is None:
        prev_close_path = path.parent / PREV_CLOSE_FILE
    closes = read_prev_close(prev_close_path)

    flow = OrderFlow()
    grouped: dict[DayKey, list[OrderEvent]] = defaultdict(list)
    submits: dict[DayKey, set[int]] = defaultdict(set)
    with path.open(encoding="utf-8", newline="\n") as fh:
        header = fh.readline().rstrip("\n")
        if header != ORDERS_HEADER:
            raise DataError(f"{path}: header must be {ORDERS_HEADER!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                e = _parse_order_row(line.split(","), board_lot, window)
            except InvalidInput as exc:
                flow.errors.append(RowError(lineno, str(exc)))
                continue
            key = (e.stock_id, e.day)
            if e.action is Action.SUBMIT:
                if e.order_ref in submits[key]:
                    raise DataError(f"{path}:{lineno}: duplicate submit of order_ref {e.order_ref} on {key}")
                submits[key].add(e.order_ref)
            grouped[key].append(e)

    for key in sorted(grouped):
        if key not in closes:
            msg = f"no previous close for {key[0]} {key[1]}; day skipped"
            log.warning(msg)
            flow.warnings.append(msg)
            continue
        try:
            flow.contexts[key] = DayContext(prev_close=closes[key])
        except InvalidInput as exc:
            flow.warnings.append(f"{key[0]} {key[1]}: {exc}; day skipped")
            continue
        # stable sort keeps file order among equal stamps
        flow.events[key] = sorted(grouped[key], key=lambda e: e.time_cs)
    return flow


def serialize_orderflow(flow: OrderFlow, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``orders.csv`` and ``prev_close.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    orders = out_dir / ORDERS_FILE
    closes = out_dir / PREV_CLOSE_FILE
    with orders.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(ORDERS_HEADER + "\n")
        for key in sorted(flow.events):
            for e in flow.events[key]:
                fh.write(
                    f"{e.stock_id},{e.day.isoformat()},{e.time_cs},{e.action.value},"
                    f"{e.order_ref},{e.side.value},{e.price},{e.size}\n"
                )
    with closes.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(PREV_CLOSE_HEADER + "\n")
        for (stock, day), ctx in sorted(flow.contexts.items()):
            fh.write(f"{stock},{day.isoformat()},{ctx.prev_close}\n")
    return orders, closes
