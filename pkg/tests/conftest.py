import datetime as dt
import sys
from pathlib import Path

import pytest

from callauction.orderflow import AUCTION_OPEN_CS, Action, DayContext, OrderEvent, Side

sys.path.insert(0, str(Path(__file__).parent))

DAY = dt.date(2003, 1, 2)


def submit(ref, side, price, size, t=None, stock="000001", day=DAY):
    side = Side(side)
    return OrderEvent(stock, day, AUCTION_OPEN_CS + (ref if t is None else t), Action.SUBMIT, ref, side, price, size)


def cancel(ref, side, price, size, t, stock="000001", day=DAY):
    return OrderEvent(stock, day, AUCTION_OPEN_CS + t, Action.CANCEL, ref, Side(side), price, size)


@pytest.fixture
def ctx():
    return DayContext(prev_close=1000)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
