"""End-to-end analysis of an opening-call order flow.

Per stock: flow statistics, relative-price density, DFA of prices (single
exponent, crossover, daily average), DFA of sizes, size histogram spikes and
the auction of every day. Across stocks: fits of the normalised size density
and the averaged residual-book profiles.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import auction, dfa, distfit, lobshape
from .flowio import OrderFlow
from .orderflow import (
    InvalidInput,
    Side,
    clustering_spikes,
    flow_stats,
    normalize_sizes,
    relative_price_pdf,
    relative_prices,
    size_histogram,
)

log = logging.getLogger(__name__)

REPORT_FILE = "report.json"
STAGES = ("flow", "dfa", "sizes", "auction", "fit", "lobshape")


@dataclass
class PipelineConfig:
    dfa_order: int = 1
    dfa_min_scale: int = 10
    scales_per_decade: int = 20
    size_hist_range: tuple[int, int] = (1, 10**4)
    spike_layers: tuple[int, ...] = (1, 2, 3)
    spike_neighbors: int = 5
    spike_threshold: float = 2.0
    families: tuple[str, ...] = ("weibull", "qexponential", "qgamma", "qweibull")
    fit_weighting: str = "none"
    fit_starts: int = 8
    pdf_per_decade: int = 40
    pdf_min_count: int = 10
    lob_fit_range: tuple[int, int] = lobshape.DEFAULT_FIT_RANGE
    peak_period: int = 5
    peak_phase: int = 1
    peak_threshold: float = 1.5
    relprice_bin: float = 0.0025
    workers: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInput(f"unknown pipeline config keys: {sorted(unknown)}")
        out = cls(**data)
        for name in ("size_hist_range", "spike_layers", "families", "lob_fit_range"):
            setattr(out, name, tuple(getattr(out, name)))
        return out

    def to_dict(self) -> dict:
        """Analysis settings; ``workers`` is left out since it cannot change the result."""
        out = {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}
        out.pop("workers")
        return out


@dataclass
class StockResult:
    stock_id: str
    sections: dict = field(default_factory=dict)
    figures: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)
    sizes: dict = field(default_factory=lambda: {"buy": [], "sell": []})
    errors: list = field(default_factory=list)


def _stage(res: StockResult, name: str, fn: Callable[[], None]):
    try:
        fn()
    except Exception as exc:  # isolate per-stock failures
        log.warning("%s: stage %s failed: %s", res.stock_id, name, exc)
        res.errors.append({"stock_id": res.stock_id, "stage": name, "message": str(exc)})


def _scaling(fit: dfa.ScalingFit) -> dict:
    return {"H": fit.H, "stderr": fit.stderr, "l_min": fit.l_min, "l_max": fit.l_max}


def _dfa_section(series: np.ndarray, cfg: PipelineConfig):
    scales = dfa.log_scales(series.size, l_min=cfg.dfa_min_scale, per_decade=cfg.scales_per_decade)
    if scales.size < 5:
        return {"status": "insufficient data", "n": int(series.size)}, None
    F = dfa.fluctuation_function(series, scales, cfg.dfa_order)
    if F.degenerate:
        return {"status": "degenerate series", "n": int(series.size)}, F
    out = {"status": "ok", "n": int(series.size), "single": _scaling(dfa.hurst(F, dfa.default_fit_range(F)))}
    return out, F


def analyse_stock(flow: OrderFlow, stock: str, cfg: PipelineConfig, stages=STAGES) -> StockResult:
    res = StockResult(stock)
    days = flow.days(stock)
    events = flow.stock_events(stock)
    submits = [e for e in events if e.is_submit]

    def stats():
        res.sections["flow_stats"] = flow_stats(events, len(days)).as_row()

    def prices():
        x = relative_prices(events, flow.contexts)
        for side in Side:
            xs = np.array([xi for xi, e in zip(x, submits) if e.side is side])
            centers, dens = relative_price_pdf(xs, cfg.relprice_bin)
            res.figures[f"relprice_pdf_{stock}_{side.value}"] = (centers, dens)
        section, F = _dfa_section(x, cfg)
        if F is not None:
            res.figures[f"dfa_price_{stock}"] = (F.scales, F.values)
        if section["status"] == "ok":
            try:
                cf = dfa.crossover_fit(F)
                section["crossover"] = {
                    "H1": cf.H1,
                    "H1_stderr": cf.left.stderr,
                    "H2": cf.H2,
                    "H2_stderr": cf.right.stderr,
                    "l_cross": cf.l_cross,
                    "split_scale": cf.split_scale,
                }
            except InvalidInput as exc:
                section["crossover"] = {"status": "insufficient data", "reason": str(exc)}
        per_day = []
        for day in days:
            day_events = [e for e in flow.events[(stock, day)] if e.is_submit]
            per_day.append(relative_prices(day_events, flow.contexts))
        try:
            dh = dfa.daily_hurst(per_day, cfg.dfa_order, cfg.dfa_min_scale, cfg.scales_per_decade)
            section["daily"] = {"status": "ok", "H_D": dh.H_D, "days_used": dh.n_days, "days_skipped": len(dh.skipped)}
        except InvalidInput:
            section["daily"] = {"status": "insufficient days", "days_used": 0, "days_skipped": len(per_day)}
        res.sections["price_dfa"] = section

    def size_memory():
        s = np.array([e.size for e in submits], dtype=float)
        section, F = _dfa_section(s, cfg)
        if F is not None:
            res.figures[f"dfa_size_{stock}"] = (F.scales, F.values)
        res.sections["size_dfa"] = section

    def clustering():
        lo, hi = cfg.size_hist_range
        h = size_histogram(submits, lo, hi)
        sizes = np.array(sorted(h.counts), dtype=float)
        res.figures[f"size_counts_{stock}"] = (sizes, np.array([h.counts[int(s)] for s in sizes], dtype=float))
        layers = {}
        for k in cfg.spike_layers:
            if not h.counts:
                layers[str(k)] = {"status": "empty histogram"}
                continue
            rep = clustering_spikes(h, k, cfg.spike_neighbors, cfg.spike_threshold)
            layers[str(k)] = {
                "flagged": [s.size for s in rep.spikes if s.flagged],
                "ratios": {str(s.size): s.ratio for s in rep.spikes},
            }
        res.sections["size_clustering"] = layers

    def sizes():
        v = normalize_sizes(submits)
        for side in Side:
            res.sizes[side.value] = [vi for vi, e in zip(v, submits) if e.side is side]

    def auctions():
        rows = []
        for day in days:
            batch = auction.build_batch(flow.events[(stock, day)], flow.contexts[(stock, day)])
            result = auction.clear(batch)
            book = auction.residual_book(batch, result)
            res.snapshots.append(book)
            rows.append(
                {
                    "date": day.isoformat(),
                    "prev_close": batch.ctx.prev_close,
                    "clearing_price": result.clearing_price,
                    "executed_volume": result.executed_volume,
                    "imbalance": result.imbalance,
                    "orders": len(batch.orders),
                    "rejected": batch.n_rejected,
                    "best_bid": book.best_bid,
                    "best_ask": book.best_ask,
                }
            )
            res.errors.extend(
                {"stock_id": stock, "stage": "auction", "message": w} for w in batch.warnings
            )
        res.sections["auction"] = rows

    plan = [
        ("flow", "flow_stats", stats),
        ("dfa", "price_dfa", prices),
        ("dfa", "size_dfa", size_memory),
        ("sizes", "size_clustering", clustering),
        ("fit", "normalized_sizes", sizes),
        ("auction", "auction", auctions),
        ("lobshape", "auction", auctions),
    ]
    done = set()
    for stage, name, fn in plan:
        if stage in stages and name not in done:
            done.add(name)
            _stage(res, name, fn)
    return res


def _fit_sizes(samples: list[float], cfg: PipelineConfig, figures: dict, side: str) -> dict:
    if len(samples) < 100:
        return {"status": "insufficient data", "n": len(samples)}
    epdf = distfit.empirical_pdf(samples, per_decade=cfg.pdf_per_decade, min_count=cfg.pdf_min_count)
    figures[f"size_pdf_{side}"] = (epdf.centers, epdf.density)
    fits, failed = [], {}
    for fam in cfg.families:
        try:
            r = distfit.fit(epdf, fam, n_starts=cfg.fit_starts, weighting=cfg.fit_weighting)
        except distfit.FitError as exc:
            failed[fam] = str(exc)
            continue
        fits.append(r)
        figures[f"size_fit_{side}_{fam}"] = (epdf.centers, distfit.bin_density(r.params, epdf.edges))
    out = {"status": "ok", "n": len(samples), "bins": int(epdf.centers.size), "fits": [f.as_dict() for f in fits]}
    if len(fits) >= 2:
        out["ranking"] = [f.params.family.value for f in distfit.rank(fits)]
    if failed:
        out["failed"] = failed
    return out


def _lob_section(snapshots, cfg: PipelineConfig, figures: dict) -> dict:
    if not snapshots:
        return {"status": "no books"}
    out = {}
    for prof in lobshape.average_profiles(snapshots):
        side = prof.side.value
        figures[f"lob_profile_{side}_volume"] = (prof.levels, prof.volume)
        figures[f"lob_profile_{side}_count"] = (prof.levels, prof.count)
        sec = {"levels": int(prof.levels.size)}
        for quantity, key in (("volume", "beta"), ("count", "gamma")):
            try:
                fit = lobshape.exp_decay_fit(prof, cfg.lob_fit_range, quantity)
                sec[key] = {"rate": fit.rate, "stderr": fit.stderr, "amplitude": fit.amplitude, "levels": fit.n_levels}
            except InvalidInput as exc:
                sec[key] = {"status": "insufficient data", "reason": str(exc)}
            try:
                pk = lobshape.periodic_peaks(
                    prof, cfg.peak_period, cfg.peak_phase, cfg.peak_threshold, cfg.lob_fit_range, quantity
                )
                sec[f"peaks_{quantity}"] = {"ratio": pk.ratio, "flagged": pk.flagged}
            except InvalidInput as exc:
                sec[f"peaks_{quantity}"] = {"status": "insufficient data", "reason": str(exc)}
        out[side] = sec
    return out


def run_pipeline(
    flow: OrderFlow,
    cfg: PipelineConfig | None = None,
    out_dir: str | Path | None = None,
    stages=STAGES,
    meta: dict | None = None,
) -> dict:
    """Analyse ``flow``; if ``out_dir`` is given write ``report.json`` and the
    figure CSVs there. Returns the report as a dict.

    ``stages`` restricts the work to a subset of :data:`STAGES`. Stocks are
    analysed on ``cfg.workers`` threads and merged in stock-id order.
    """
    cfg = cfg or PipelineConfig()
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise InvalidInput(f"unknown stages {sorted(unknown)}")
    stocks = flow.stocks
    with ThreadPoolExecutor(max_workers=max(cfg.workers, 1)) as pool:
        results = list(pool.map(lambda s: analyse_stock(flow, s, cfg, stages), stocks))

    figures: dict = {}
    report = {
        "meta": {
            "stocks": stocks,
            "n_events": flow.n_events,
            "n_days": len(flow.events),
            "parse_errors": [{"line": e.line, "message": e.message} for e in flow.errors],
            "warnings": list(flow.warnings),
            "config": cfg.to_dict(),
            "stages": [s for s in STAGES if s in stages],
            **(meta or {}),
        },
        "flow_stats": {},
        "price_hurst": {},
        "size_hurst": {},
        "size_clustering": {},
        "auction": {},
        "errors": [],
    }
    pooled = {"buy": [], "sell": []}
    snapshots = []
    for r in results:
        figures.update(r.figures)
        report["errors"].extend(r.errors)
        for key, section in (
            ("flow_stats", "flow_stats"),
            ("price_hurst", "price_dfa"),
            ("size_hurst", "size_dfa"),
            ("size_clustering", "size_clustering"),
            ("auction", "auction"),
        ):
            if section in r.sections:
                report[key][r.stock_id] = r.sections[section]
        for side in pooled:
            pooled[side].extend(r.sizes[side])
        snapshots.extend(r.snapshots)

    if "fit" in stages:
        report["size_fits"] = {}
        for side in ("buy", "sell"):
            try:
                report["size_fits"][side] = _fit_sizes(pooled[side], cfg, figures, side)
            except Exception as exc:
                report["errors"].append({"stock_id": None, "stage": f"size_fits_{side}", "message": str(exc)})
    if "lobshape" in stages:
        try:
            report["lob"] = _lob_section(snapshots, cfg, figures)
        except Exception as exc:
            report["errors"].append({"stock_id": None, "stage": "lob", "message": str(exc)})

    report["status"] = status_of(report)
    if out_dir is not None:
        write_report(report, figures, out_dir)
    return report


def status_of(report: dict) -> str:
    if not report["meta"]["stocks"]:
        return "no data"
    if report["meta"]["parse_errors"] or report["errors"]:
        return "data errors"
    return "ok"


def exit_code(report: dict) -> int:
    return 0 if report.get("status") == "ok" else 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else None
    return obj


def write_report(report: dict, figures: dict, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / REPORT_FILE
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    for name in sorted(figures):
        xs, ys = figures[name]
        write_xy(out_dir / f"{name}.csv", xs, ys)
    _write_tables(report, out_dir)
    return path


def write_xy(path: Path, xs, ys):
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in zip(xs, ys):
            w.writerow([repr(float(x)), repr(float(y))])


def _write_tables(report: dict, out_dir: Path):
    def dump(name, header, rows):
        with (out_dir / name).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    t1 = ["N_s", "N_b", "R_N", "mean_s_s", "mean_s_b", "R_s", "N_c", "mean_N"]
    dump(
        "flow_stats.csv",
        ["stock_id"] + t1,
        [[s] + [row[k] for k in t1] for s, row in sorted(report["flow_stats"].items())],
    )

    rows = []
    for s, sec in sorted(report["price_hurst"].items()):
        cross = sec.get("crossover", {})
        daily = sec.get("daily", {})
        rows.append(
            [
                s,
                cross.get("H1", ""),
                cross.get("H1_stderr", ""),
                cross.get("H2", ""),
                cross.get("H2_stderr", ""),
                cross.get("l_cross", ""),
                daily.get("H_D", daily.get("status", "")),
            ]
        )
    dump("price_hurst.csv", ["stock_id", "H1", "H1_err", "H2", "H2_err", "l_cross", "H_D"], rows)

    rows = []
    for s, sec in sorted(report["size_hurst"].items()):
        single = sec.get("single", {})
        rows.append([s, single.get("H", sec.get("status", "")), single.get("stderr", "")])
    dump("size_hurst.csv", ["stock_id", "H", "H_err"], rows)
