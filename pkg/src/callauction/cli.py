"""Command-line entry point.

Exit codes: 0 success, 1 data errors or no data, 2 fatal.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .flowio import DataError, OrderFlow, parse_orderflow, serialize_orderflow
from .orderflow import InvalidInput
from .synth import SynthConfig, synth_flow

log = logging.getLogger("callauction")

SAMPLE_DIR = Path(__file__).parent / "data" / "sample"

STAGES_BY_COMMAND = {
    "auction": ("auction",),
    "dfa": ("dfa",),
    "fit": ("fit",),
    "lobshape": ("lobshape",),
    "report": pipeline.STAGES,
}


class Fatal(Exception):
    pass


def _synth_config(args) -> SynthConfig:
    data = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    if args.seed is not None:
        data["seed"] = args.seed
    return SynthConfig.from_dict(data)


def _load_flow(args) -> tuple[OrderFlow, dict]:
    """Input directory or file, else a flow generated from --config, else the
    bundled sample."""
    if args.input:
        return parse_orderflow(args.input, board_lot=not args.no_board_lot), {"input": str(args.input)}
    if args.config:
        cfg = _synth_config(args)
        return synth_flow(cfg), {"input": "synthetic", "seed": cfg.seed}
    return parse_orderflow(SAMPLE_DIR), {"input": "bundled sample"}


def _pipeline_config(args) -> pipeline.PipelineConfig:
    data = {}
    if args.pipeline_config:
        data = json.loads(Path(args.pipeline_config).read_text(encoding="utf-8"))
    if args.workers is not None:
        data["workers"] = args.workers
    return pipeline.PipelineConfig.from_dict(data)


def cmd_synth(args) -> int:
    cfg = _synth_config(args)
    if not args.out:
        raise Fatal("synth needs --out")
    flow = synth_flow(cfg)
    orders, _ = serialize_orderflow(flow, args.out)
    print(f"wrote {flow.n_events} events for {len(flow.stocks)} stocks to {orders.parent}")
    return 0


def cmd_ingest(args) -> int:
    flow, _ = _load_flow(args)
    for err in flow.errors:
        print(f"line {err.line}: {err.message}", file=sys.stderr)
    for w in flow.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{flow.n_events} events, {len(flow.stocks)} stocks, {len(flow.events)} stock-days, {len(flow.errors)} bad rows")
    if args.out:
        serialize_orderflow(flow, args.out)
        errors = [{"line": e.line, "message": e.message} for e in flow.errors]
        text = json.dumps({"errors": errors, "warnings": flow.warnings}, indent=2, sort_keys=True)
        (Path(args.out) / "ingest_errors.json").write_text(text + "\n", encoding="utf-8")
    if not flow.events or flow.errors:
        return 1
    return 0


def cmd_analyse(args) -> int:
    flow, meta = _load_flow(args)
    cfg = _pipeline_config(args)
    report = pipeline.run_pipeline(flow, cfg, args.out, STAGES_BY_COMMAND[args.command], meta)
    if args.out is None:
        print(json.dumps(pipeline._jsonable(report), indent=2, sort_keys=True))
    else:
        print(f"{report['status']}: report written to {Path(args.out) / pipeline.REPORT_FILE}")
    for err in report["errors"]:
        print(f"{err['stock_id']} [{err['stage']}]: {err['message']}", file=sys.stderr)
    return pipeline.exit_code(report)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="callauction", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_input=True):
        p.add_argument("--seed", type=int, default=None, help="generator seed (overrides the config)")
        p.add_argument("--config", help="JSON file mirroring SynthConfig")
        p.add_argument("--out", help="output directory")
        if with_input:
            p.add_argument("input", nargs="?", help="orders.csv or a directory with orders.csv and prev_close.csv")
            p.add_argument("--no-board-lot", action="store_true", help="skip the buy board-lot check")
        return p

    common(sub.add_parser("synth", help="generate a synthetic order flow"), with_input=False).set_defaults(
        func=cmd_synth
    )
    common(sub.add_parser("ingest", help="validate and normalise an order file")).set_defaults(func=cmd_ingest)
    helps = {
        "auction": "clear every stock-day and report prices and books",
        "dfa": "Hurst exponents of prices and sizes",
        "fit": "fit the normalised size density",
        "lobshape": "average residual-book profiles",
        "report": "run every analysis",
    }
    for name, text in helps.items():
        p = common(sub.add_parser(name, help=text))
        p.add_argument("--pipeline-config", help="JSON file mirroring PipelineConfig")
        p.add_argument("--workers", type=int, default=None, help="threads for per-stock stages")
        p.set_defaults(func=cmd_analyse)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DataError, InvalidInput, OSError, json.JSONDecodeError, TypeError, Fatal) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
