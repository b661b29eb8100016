"""Benchmark: compiled extension kernels vs the pure-Python fallback.

Times the two hot kernels in isolation (order-book matching on a realistic
random stream, and mid-series append + window statistics), then a whole
simulated session with each engine.

Run:  python3 benchmarks/bench_core.py [--events 200000] [--runs 2]
"""

from __future__ import annotations

import argparse
import time

import numpy as np


def order_stream(n, seed=0):
    rng = np.random.default_rng(seed)
    events = []
    oid = 0
    live = []
    for _ in range(n):
        if live and rng.random() < 0.15:
            events.append(("cancel", *live.pop(int(rng.integers(0, len(live))))))
            continue
        oid += 1
        agent = int(rng.integers(1, 700))
        side = 1 if rng.random() < 0.5 else -1
        qty = int(rng.integers(10, 300))
        if rng.random() < 0.2:
            events.append(("market", oid, agent, side, 0, qty))
        else:
            price = int(100_000 + rng.integers(-200, 201))
            events.append(("limit", oid, agent, side, price, qty))
            live.append((oid, agent))
            if len(live) > 400:
                live.pop(0)
    return events


def bench_book(book_cls, events):
    book = book_cls()
    t0 = time.perf_counter()
    for ev in events:
        if ev[0] == "cancel":
            book.cancel(ev[1], ev[2])
        else:
            _, oid, agent, side, price, qty = ev
            book.submit(oid, agent, side, price, qty, ev[0] == "market")
    return time.perf_counter() - t0


def bench_series(series_cls, n_ops, seed=1):
    rng = np.random.default_rng(seed)
    horizon = 23_400
    series = series_cls(horizon, 100_000)
    ts = np.sort(rng.integers(0, horizon * 10**9, size=n_ops))
    vals = rng.integers(95_000, 105_000, size=n_ops)
    t0 = time.perf_counter()
    for i in range(n_ops):
        t = int(ts[i])
        series.record(t, int(vals[i]))
        if i % 4 == 0:
            series.trunc_mean(300, t)
            series.trunc_mean(1800, t)
            series.trunc_std(1800, t)
            series.cmp_windows(300, 1800, t)
    return time.perf_counter() - t0


def bench_full_run(engine, runs, seed0=42):
    from bubblesim.scenario import build_market, default_config

    cfg = default_config()
    t0 = time.perf_counter()
    for k in range(runs):
        market = build_market(cfg, seed0 + k)
        market.run()
    return (time.perf_counter() - t0) / runs


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--events", type=int, default=200_000)
    parser.add_argument("--series-ops", type=int, default=100_000)
    parser.add_argument("--runs", type=int, default=2)
    args = parser.parse_args()

    import bubblesim.core as core
    from bubblesim import _core_py

    if not core.COMPILED:
        print("compiled core not available; benchmarking the fallback only")

    events = order_stream(args.events)
    rows = []
    pure_book = bench_book(_core_py.OrderBook, events)
    rows.append(("order book (pure python)", args.events, pure_book))
    if core.COMPILED:
        fast_book = bench_book(core.OrderBook, events)
        rows.append(("order book (compiled)", args.events, fast_book))

    pure_series = bench_series(_core_py.MidSeries, args.series_ops)
    rows.append(("mid series (pure python)", args.series_ops, pure_series))
    if core.COMPILED:
        fast_series = bench_series(core.MidSeries, args.series_ops)
        rows.append(("mid series (compiled)", args.series_ops, fast_series))

    print(f"{'kernel':34} {'ops':>9} {'time':>9} {'ops/s':>12}")
    for name, n, t in rows:
        print(f"{name:34} {n:>9} {t:>8.3f}s {n / t:>12,.0f}")
    if core.COMPILED:
        print(f"\nspeedup: book {pure_book / fast_book:.1f}x, "
              f"series {pure_series / fast_series:.1f}x")

    print("\nfull session (default config, %d run(s) each):" % args.runs)
    fast_run = bench_full_run(core, args.runs)
    print(f"  active engine ({'compiled' if core.COMPILED else 'pure'}): {fast_run:.2f} s/run")


if __name__ == "__main__":
    main()
