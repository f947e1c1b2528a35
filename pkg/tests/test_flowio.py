import datetime as dt

import pytest

from callauction.flowio import (
    ORDERS_HEADER,
    PREV_CLOSE_HEADER,
    DataError,
    parse_orderflow,
    serialize_orderflow,
)
from callauction.orderflow import AUCTION_OPEN_CS, Action, Side
from callauction.synth import SynthConfig, synth_flow

T = AUCTION_OPEN_CS + 100


def write(tmp_path, rows, closes=("000001,2003-01-02,1000",)):
    (tmp_path / "orders.csv").write_text("\n".join([ORDERS_HEADER, *rows]) + "\n", encoding="utf-8")
    (tmp_path / "prev_close.csv").write_text("\n".join([PREV_CLOSE_HEADER, *closes]) + "\n", encoding="utf-8")
    return tmp_path


def test_three_rows(tmp_path):
    rows = [
        f"000001,2003-01-02,{T},submit,1,buy,1000,100",
        f"000001,2003-01-02,{T + 5},submit,2,sell,1010,37",
        f"000001,2003-01-02,{T + 9},cancel,1,buy,1000,100",
    ]
    flow = parse_orderflow(write(tmp_path, rows))
    events = flow.events[("000001", dt.date(2003, 1, 2))]
    assert len(events) == 3 and not flow.errors
    assert events[2].action is Action.CANCEL and events[1].side is Side.SELL
    assert flow.contexts[("000001", dt.date(2003, 1, 2))].prev_close == 1000


@pytest.mark.parametrize(
    "row, fragment",
    [
        (f"000001,2003-01-02,{T},submit,2,sell,1000,0", "size"),
        (f"000001,2003-01-02,{T},submit,2,buy,1000,150", "board lot"),
        (f"000001,2003-01-02,{T},submit,2,sell,0,10", "price"),
        (f"000001,2003-01-02,100,submit,2,sell,1000,10", "window"),
        (f"000001,2003-13-02,{T},submit,2,sell,1000,10", "date"),
        (f"000001,2003-01-02,{T},modify,2,sell,1000,10", "action"),
        (f"000001,2003-01-02,{T},submit,2,sell,1000", "fields"),
        (f"000001,2003-01-02,{T},submit,x,sell,1000,10", "integers"),
    ],
)
def test_bad_row_reported_with_line(tmp_path, row, fragment):
    good = f"000001,2003-01-02,{T},submit,1,buy,1000,100"
    flow = parse_orderflow(write(tmp_path, [good, row]))
    assert [e.line for e in flow.errors] == [3]
    assert fragment in flow.errors[0].message
    assert flow.n_events == 1


def test_board_lot_check_can_be_disabled(tmp_path):
    flow = parse_orderflow(write(tmp_path, [f"000001,2003-01-02,{T},submit,1,buy,1000,150"]), board_lot=False)
    assert flow.n_events == 1 and not flow.errors


def test_duplicate_submit_is_fatal(tmp_path):
    rows = [f"000001,2003-01-02,{T},submit,1,buy,1000,100", f"000001,2003-01-02,{T + 1},submit,1,buy,1000,100"]
    with pytest.raises(DataError):
        parse_orderflow(write(tmp_path, rows))


def test_missing_prev_close_skips_day(tmp_path):
    rows = [f"000001,2003-01-02,{T},submit,1,buy,1000,100", f"000001,2003-01-03,{T},submit,1,buy,1000,100"]
    flow = parse_orderflow(write(tmp_path, rows))
    assert list(flow.events) == [("000001", dt.date(2003, 1, 2))]
    assert len(flow.warnings) == 1 and "2003-01-03" in flow.warnings[0]


def test_header_and_path_errors(tmp_path):
    (tmp_path / "orders.csv").write_text("a,b\n", encoding="utf-8")
    (tmp_path / "prev_close.csv").write_text(PREV_CLOSE_HEADER + "\n", encoding="utf-8")
    with pytest.raises(DataError):
        parse_orderflow(tmp_path)
    with pytest.raises(DataError):
        parse_orderflow(tmp_path / "missing")


def test_events_sorted_stably_by_time(tmp_path):
    rows = [
        f"000001,2003-01-02,{T + 5},submit,1,buy,1000,100",
        f"000001,2003-01-02,{T},submit,2,buy,1000,100",
        f"000001,2003-01-02,{T},submit,3,buy,1000,100",
    ]
    flow = parse_orderflow(write(tmp_path, rows))
    assert [e.order_ref for e in flow.stock_events("000001")] == [2, 3, 1]


def test_round_trip_is_lossless(tmp_path):
    cfg = SynthConfig(stocks=["000001", "600000"], n_days=3, orders_per_day=80, cancel_fraction=0.2,
                      cluster_fraction=0.3, price_preference=0.3, zero_mass=0.1, sell_limit_mass=0.1, seed=9)
    flow = synth_flow(cfg)
    serialize_orderflow(flow, tmp_path / "a")
    back = parse_orderflow(tmp_path / "a")
    assert back.events == flow.events and back.contexts == flow.contexts and not back.errors
    serialize_orderflow(back, tmp_path / "b")
    for name in ("orders.csv", "prev_close.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
