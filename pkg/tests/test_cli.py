import json

from callauction import cli
from callauction.flowio import ORDERS_HEADER, PREV_CLOSE_HEADER


def run(args, capsys):
    code = cli.main(args)
    return code, capsys.readouterr()


def test_synth_ingest_report(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_days": 3, "orders_per_day": 120, "cancel_fraction": 0.1}), encoding="utf-8")
    code, _ = run(["synth", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / "flow")], capsys)
    assert code == 0 and (tmp_path / "flow" / "orders.csv").exists()

    code, out = run(["ingest", str(tmp_path / "flow"), "--out", str(tmp_path / "norm")], capsys)
    assert code == 0 and "0 bad rows" in out.out
    assert (tmp_path / "norm" / "orders.csv").read_bytes() == (tmp_path / "flow" / "orders.csv").read_bytes()

    code, out = run(["report", str(tmp_path / "flow"), "--out", str(tmp_path / "rep")], capsys)
    report = json.loads((tmp_path / "rep" / "report.json").read_text())
    assert code == 0 and report["status"] == "ok"


def test_subcommands_print_json(capsys):
    for cmd, key in (("auction", "auction"), ("dfa", "price_hurst"), ("lobshape", "lob"), ("fit", "size_fits")):
        code, out = run([cmd], capsys)
        assert code == 0, cmd
        assert json.loads(out.out)[key]


def test_synth_config_feeds_analysis(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_days": 2, "orders_per_day": 60}), encoding="utf-8")
    code, out = run(["auction", "--config", str(cfg), "--seed", "3"], capsys)
    report = json.loads(out.out)
    assert code == 0 and report["meta"]["seed"] == 3 and report["meta"]["input"] == "synthetic"


def test_bad_rows_exit_one(tmp_path, capsys):
    (tmp_path / "orders.csv").write_text(
        ORDERS_HEADER + "\n000001,2003-01-02,3330000,submit,1,sell,1000,0\n000001,2003-01-02,3330001,submit,2,sell,1000,5\n",
        encoding="utf-8",
    )
    (tmp_path / "prev_close.csv").write_text(PREV_CLOSE_HEADER + "\n000001,2003-01-02,1000\n", encoding="utf-8")
    code, out = run(["ingest", str(tmp_path)], capsys)
    assert code == 1 and "line 2" in out.err


def test_empty_input_exit_one(tmp_path, capsys):
    (tmp_path / "orders.csv").write_text(ORDERS_HEADER + "\n", encoding="utf-8")
    (tmp_path / "prev_close.csv").write_text(PREV_CLOSE_HEADER + "\n", encoding="utf-8")
    code, _ = run(["report", str(tmp_path), "--out", str(tmp_path / "out")], capsys)
    assert code == 1
    assert json.loads((tmp_path / "out" / "report.json").read_text())["status"] == "no data"


def test_fatal_errors_exit_two(tmp_path, capsys):
    code, out = run(["report", str(tmp_path / "missing")], capsys)
    assert code == 2 and "error" in out.err
    (tmp_path / "bad.json").write_text('{"zero_mass": 4}', encoding="utf-8")
    code, _ = run(["synth", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path / "x")], capsys)
    assert code == 2
    code, _ = run(["synth"], capsys)
    assert code == 2
