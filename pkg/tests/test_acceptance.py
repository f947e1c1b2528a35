"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into the terminal summary, so they show up in
``pytest -v`` output without ``-s``.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from callauction import distfit, noise, pipeline
from callauction.auction import LOBSnapshot, build_batch, clear, residual_book
from callauction.cli import SAMPLE_DIR
from callauction.dfa import (
    FluctuationFunction,
    crossover_fit,
    default_fit_range,
    fluctuation_function,
    hurst,
    log_scales,
)
from callauction.flowio import parse_orderflow, serialize_orderflow
from callauction.lobshape import average_profiles, exp_decay_fit, periodic_peaks
from callauction.orderflow import DayContext, Side, flow_stats, relative_price_pdf, relative_prices
from callauction.synth import SynthConfig, synth_flow
from conftest import ACCEPTANCE_LINES, submit
from oracles import brute_force_clear, exponential_book, poisson_books

REFERENCE_SETS = {
    "weibull/buy": distfit.DistParams("weibull", 0.103, beta=0.317),
    "weibull/sell": distfit.DistParams("weibull", 0.149, beta=0.332),
    "qexponential/buy": distfit.DistParams("qexponential", 0.408, q=1.577),
    "qexponential/sell": distfit.DistParams("qexponential", 0.771, q=1.462),
    "qgamma/buy": distfit.DistParams("qgamma", 0.216, beta=0.155, q=1.354),
    "qgamma/sell": distfit.DistParams("qgamma", 0.062, beta=1.585, q=1.237),
    "qweibull/buy": distfit.DistParams("qweibull", 0.264, beta=1.161, q=1.414),
    "qweibull/sell": distfit.DistParams("qweibull", 0.282, beta=1.887, q=1.557),
}


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_1_clearing_oracle():
    rng = np.random.default_rng(20030102)
    t0 = time.perf_counter()
    mismatches, unconserved = 0, 0
    for _ in range(1000):
        pc = int(rng.integers(500, 1500))
        ctx = DayContext(pc)
        lo, hi = ctx.limit_band
        n = int(rng.integers(0, 21))
        events = [
            submit(i + 1, rng.choice(["buy", "sell"]), int(rng.integers(lo - 3, hi + 4)), int(rng.integers(1, 20)) * 100)
            for i in range(n)
        ]
        batch = build_batch(events, ctx)
        result = clear(batch)
        orders = [(o.side, o.price, o.size) for o in batch.orders]
        price, volume, _ = brute_force_clear(orders, pc, lo, hi)
        if (result.clearing_price, result.executed_volume) != (price, volume):
            mismatches += 1
        side_of = {o.order_ref: o.side for o in batch.orders}
        buys = sum(q for ref, q in result.fills.items() if side_of[ref] is Side.BUY)
        sells = sum(q for ref, q in result.fills.items() if side_of[ref] is Side.SELL)
        book = residual_book(batch, result)
        for side in Side:
            left = sum(v for v, _ in book.levels(side).values())
            submitted = sum(e.size for e in events if e.side is side)
            if left + result.executed_volume != submitted - batch.rejected_volume[side]:
                unconserved += 1
        if not buys == sells == result.executed_volume:
            unconserved += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and unconserved == 0 and elapsed < 10
    report(1, ok, f"1000 batches, {mismatches} oracle mismatches, {unconserved} conservation failures, {elapsed:.2f}s")


def _dfa_h(x):
    F = fluctuation_function(x)
    return hurst(F, default_fit_range(F)).H


def test_criterion_2_dfa_calibration():
    t0 = time.perf_counter()
    n = 2**16
    rows = []
    iid = [_dfa_h(np.random.default_rng(100 + s).standard_normal(n)) for s in range(20)]
    iid_pass = sum(0.47 <= h <= 0.53 for h in iid)
    rows.append(f"iid {iid_pass}/20 in [0.47,0.53]")
    ok = iid_pass >= 19
    for H in (0.6, 0.7, 0.9):
        hs = [_dfa_h(noise.fgn(n, H, np.random.default_rng(1000 * int(10 * H) + s))) for s in range(20)]
        passed = sum(abs(h - H) <= 0.03 for h in hs)
        rows.append(f"H={H} {passed}/20 (mean {np.mean(hs):.3f})")
        ok &= passed >= 19
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    report(2, ok, "; ".join(rows) + f"; {elapsed:.1f}s")


def test_criterion_3_crossover_recovery():
    scales = log_scales(10**5)
    lc = 294.0
    values = np.where(scales <= lc, scales**0.56, lc ** (0.56 - 0.93) * scales**0.93)
    cf = crossover_fit(FluctuationFunction(scales, values.astype(float), 4 * int(scales[-1]), 1))
    exact = abs(cf.H1 - 0.56) < 1e-10 and abs(cf.H2 - 0.93) < 1e-10 and abs(cf.l_cross - 294) < 1e-6
    rows = [f"exact ({cf.H1:.6f}, {cf.H2:.6f}, {cf.l_cross:.6f})"]

    # DFA-1 places the crossover of a spectral corner at 1/l about 1.28 l, a
    # fixed offset inside the tolerance; 2^22 points keep the seed-to-seed
    # scatter of the fitted crossover (log sd 0.05) well clear of the bound
    n = 2**22
    grid = log_scales(n, l_max=n // 16)
    passed, ratios = 0, []
    seeds = range(10)
    for s in seeds:
        x = noise.spliced_noise(n, 0.55, 0.9, lc, np.random.default_rng(300 + s))
        fit = crossover_fit(fluctuation_function(x, grid))
        ratios.append(fit.l_cross / lc)
        good = abs(fit.H1 - 0.55) <= 0.05 and abs(fit.H2 - 0.9) <= 0.05 and 1 / 1.5 <= fit.l_cross / lc <= 1.5
        passed += good
        if not good:
            rows.append(f"seed {s} off: ({fit.H1:.3f}, {fit.H2:.3f}, {fit.l_cross:.0f})")
    rows.append(
        f"spliced fGn {passed}/{len(seeds)} within (0.05, 0.05, x1.5), "
        f"l_cross/294 in [{min(ratios):.2f}, {max(ratios):.2f}]"
    )
    report(3, exact and passed >= math.ceil(0.95 * len(seeds)), "; ".join(rows))


def _quad_mass(params):
    from scipy import integrate

    f = lambda v: float(distfit.pdf_eval(params, v))
    cuts = [0.0, 1e-6, 1e-3, 0.1, 1.0, 10.0, 1e3, np.inf]
    return sum(integrate.quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-12)[0] for a, b in zip(cuts, cuts[1:]))


def test_criterion_4_density_formulas():
    worst_z = 0.0
    for th in (0.062, 0.216, 1.0):
        for b in (0.155, 0.5, 1.585):
            for q in (1.1, 1.237, 1.354):
                zq = distfit.qgamma_norm(th, b, q, method="quad")
                zb = distfit.qgamma_norm(th, b, q, method="beta")
                worst_z = max(worst_z, abs(zq / zb - 1))
    worst_mass = max(abs(_quad_mass(p) - 1) for p in REFERENCE_SETS.values())
    # q -> 1 limit compared as densities of v / theta: the raw density gap
    # scales with 1 / theta, so a fixed absolute bound only has meaning in
    # the scale-free variable (it coincides with the raw gap at theta = 1)
    v = np.linspace(0.01, 10, 1000)
    worst_gamma, worst_raw_unit = 0.0, 0.0
    for th in (0.062, 0.216, 1.0):
        for b in (0.155, 0.5, 1.585):
            qg = distfit.pdf_eval(distfit.DistParams("qgamma", th, beta=b, q=1.0001), v)
            gap = float(np.max(np.abs(qg - stats.gamma(b + 1, scale=th).pdf(v))))
            worst_gamma = max(worst_gamma, th * gap)
            if th == 1.0:
                worst_raw_unit = max(worst_raw_unit, gap)
    ok = worst_z <= 1e-8 and worst_mass <= 1e-6 and worst_gamma <= 1e-3 and worst_raw_unit <= 1e-3
    report(4, ok, f"z rel err {worst_z:.1e}, mass err {worst_mass:.1e}, "
        f"Gamma-limit err {worst_gamma:.1e} scale-free ({worst_raw_unit:.1e} raw at theta=1)")


def test_criterion_5_fit_round_trip():
    rows, ok = [], True
    for i, (name, truth) in enumerate(REFERENCE_SETS.items()):
        x = distfit.sample(truth, 10**6, 500 + i)
        r = distfit.fit(distfit.empirical_pdf(x), truth.family, weighting="poisson")
        err = float(np.max(np.abs(np.array(r.params.values) / np.array(truth.values) - 1)))
        ok &= err <= 0.05
        rows.append(f"{name} {100 * err:.2f}%")
    truth = REFERENCE_SETS["qgamma/buy"]
    wins = 0
    for s in range(100):
        e = distfit.empirical_pdf(distfit.sample(truth, 10**4, 10**4 + s))
        ranked = distfit.rank([distfit.fit(e, "weibull"), distfit.fit(e, "qgamma")])
        wins += ranked[0].params.family is distfit.Family.QGAMMA or ranked[0].sse == ranked[1].sse
    ok &= wins >= 95
    report(5, ok, "max rel err " + ", ".join(rows) + f"; qGamma >= Weibull in {wins}/100")


def test_criterion_6_lob_shape():
    rng = np.random.default_rng(5)
    buys = poisson_books(0.0373, 100, 50, rng)
    sells = poisson_books(0.0295, 100, 50, rng)
    books = [LOBSnapshot(1000, 1001, b.buy_levels, s.sell_levels) for b, s in zip(buys, sells)]
    buy, sell = average_profiles(books)
    rb, rs = exp_decay_fit(buy).rate, exp_decay_fit(sell).rate
    ok = abs(rb - 0.0373) <= 0.002 and abs(rs - 0.0295) <= 0.002

    modulated = LOBSnapshot(1000, 1001, exponential_book(0.0373, 300, modulation=0.5), {})
    control = LOBSnapshot(1000, 1001, exponential_book(0.0373, 300), {})
    pm = periodic_peaks(average_profiles([modulated])[0])
    pc = periodic_peaks(average_profiles([control])[0])
    noisy_control = periodic_peaks(buy)
    ok &= pm.flagged and not pc.flagged and not noisy_control.flagged
    report(
        6,
        ok,
        f"rates buy {rb:.4f} sell {rs:.4f}; modulated ratio {pm.ratio:.3f} flagged={pm.flagged}; "
        f"control {pc.ratio:.3f} flagged={pc.flagged}; noisy control {noisy_control.ratio:.3f} flagged={noisy_control.flagged}",
    )


def test_criterion_7_flow_statistics():
    flow = synth_flow(SynthConfig(n_days=20, orders_per_day=500, sell_buy_ratio=2.13, seed=213))
    events = flow.stock_events("000001")
    fs = flow_stats(events, 20)
    ok_ratio = fs.n_sell + fs.n_buy >= 10**4 and abs(fs.ratio_n / 2.13 - 1) <= 0.05

    flow = synth_flow(SynthConfig(n_days=20, orders_per_day=500, zero_mass=0.2, sell_limit_mass=0.05, seed=11))
    events = flow.stock_events("000001")
    x = relative_prices(events, flow.contexts)
    sides = np.array([e.side is Side.SELL for e in events if e.is_submit])
    centers, dens = relative_price_pdf(x)
    i0 = int(np.argmin(np.abs(centers)))
    peak0 = dens[i0] / max(dens[i0 - 1], dens[i0 + 1])
    _, sdens = relative_price_pdf(x[sides])
    edge = sdens[0] / sdens[1] if sdens[1] > 0 else math.inf
    ok = ok_ratio and peak0 > 3 and edge > 3
    report(7, ok, f"R_N {fs.ratio_n:.3f} over {fs.n_sell + fs.n_buy} orders; x=0 peak {peak0:.1f}x, sell x=-0.1 {edge:.1f}x neighbours")


def test_criterion_8_determinism_and_round_trip(tmp_path):
    flow = parse_orderflow(SAMPLE_DIR)
    pipeline.run_pipeline(flow, out_dir=tmp_path / "a")
    pipeline.run_pipeline(parse_orderflow(SAMPLE_DIR), out_dir=tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = names == sorted(p.name for p in (tmp_path / "b").iterdir()) and all(
        (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names
    )
    serialize_orderflow(flow, tmp_path / "flow")
    back = parse_orderflow(tmp_path / "flow")
    lossless = (
        back.events == flow.events
        and back.contexts == flow.contexts
        and all((tmp_path / "flow" / f).read_bytes() == (SAMPLE_DIR / f).read_bytes() for f in ("orders.csv", "prev_close.csv"))
    )
    report(8, same and lossless, f"{len(names)} output files byte-identical={same}; serialize/parse lossless={lossless}")
