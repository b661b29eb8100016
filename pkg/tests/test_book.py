"""Matching book: trivial cases, oracle equivalence, invariants, twin parity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubblesim import core
from bubblesim._core_py import MidSeries as PyMidSeries
from bubblesim._core_py import OrderBook as PyOrderBook
from oracle_book import RefBook


def test_limit_buy_rests_on_empty_book():
    book = core.OrderBook()
    fills, rested, canceled = book.submit(1, 10, 1, 1000, 100, False)
    assert fills == [] and rested == 100 and canceled == 0
    assert book.best_bid() == (1000, 100)
    assert book.best_ask() is None


def test_exact_cross():
    book = core.OrderBook()
    book.submit(1, 10, 1, 1000, 100, False)
    fills, rested, canceled = book.submit(2, 11, -1, 1000, 100, False)
    assert fills == [(1000, 100, 1, 10)]
    assert rested == 0 and canceled == 0
    assert book.best_bid() is None and book.best_ask() is None


def test_partial_fill_and_rest():
    book = core.OrderBook()
    book.submit(1, 10, 1, 1000, 60, False)
    fills, rested, canceled = book.submit(2, 11, -1, 995, 100, False)
    assert fills == [(1000, 60, 1, 10)]       # trade at resting price
    assert rested == 40
    assert book.best_ask() == (995, 40)


def test_market_order_residue_cancels():
    book = core.OrderBook()
    book.submit(1, 10, 1, 1000, 50, False)
    fills, rested, canceled = book.submit(2, 11, -1, 0, 120, True)
    assert fills == [(1000, 50, 1, 10)]
    assert rested == 0
    assert canceled == 70
    assert book.best_bid() is None


def test_price_time_priority_within_level():
    book = core.OrderBook()
    book.submit(1, 10, 1, 1000, 10, False)
    book.submit(2, 11, 1, 1000, 10, False)
    fills, _, _ = book.submit(3, 12, -1, 1000, 15, False)
    assert fills == [(1000, 10, 1, 10), (1000, 5, 2, 11)]


def test_better_price_fills_first():
    book = core.OrderBook()
    book.submit(1, 10, 1, 999, 10, False)
    book.submit(2, 11, 1, 1001, 10, False)
    fills, _, _ = book.submit(3, 12, -1, 995, 20, False)
    assert fills == [(1001, 10, 2, 11), (999, 10, 1, 10)]


def test_cancel_resting_order():
    book = core.OrderBook()
    book.submit(1, 10, 1, 1000, 100, False)
    assert book.cancel(1, 10) is True
    assert book.best_bid() is None
    assert book.cancel(1, 10) is False        # already gone


def test_cancel_by_non_owner_fails():
    book = core.OrderBook()
    book.submit(1, 10, 1, 1000, 100, False)
    assert book.cancel(1, 99) is False
    assert book.best_bid() == (1000, 100)


def test_cancel_filled_order_fails():
    book = core.OrderBook()
    book.submit(1, 10, 1, 1000, 100, False)
    book.submit(2, 11, -1, 1000, 100, False)
    assert book.cancel(1, 10) is False


def _random_stream(rng, n_events, mid=1000, spread=30):
    """(kind, oid, agent, side, price, qty) events; cancels target known ids."""
    events = []
    live = []
    oid = 0
    for _ in range(n_events):
        if live and rng.random() < 0.2:
            pick = live[int(rng.integers(0, len(live)))]
            agent = pick[1] if rng.random() < 0.8 else 999   # sometimes wrong owner
            events.append(("cancel", pick[0], agent, 0, 0, 0))
            continue
        oid += 1
        agent = int(rng.integers(1, 12))
        side = 1 if rng.random() < 0.5 else -1
        qty = int(rng.integers(1, 300))
        if rng.random() < 0.15:
            events.append(("market", oid, agent, side, 0, qty))
        else:
            price = int(mid + rng.integers(-spread, spread + 1))
            events.append(("limit", oid, agent, side, price, qty))
            live.append((oid, agent))
            if len(live) > 50:
                live.pop(0)
    return events


def _apply(book, events):
    trace = []
    for kind, oid, agent, side, price, qty in events:
        if kind == "cancel":
            trace.append(("cancel", book.cancel(oid, agent)))
        else:
            fills, rested, canceled = book.submit(oid, agent, side, price, qty,
                                                  kind == "market")
            trace.append(("submit", tuple(fills), rested, canceled))
    return trace


@pytest.mark.parametrize("seed", range(8))
def test_random_streams_match_reference_matcher(seed):
    rng = np.random.default_rng(seed)
    events = _random_stream(rng, 500)
    book = core.OrderBook()
    ref = RefBook()
    assert _apply(book, events) == _apply(ref, events)
    assert book.dump() == ref.dump()


def test_uncrossed_after_every_submit():
    rng = np.random.default_rng(99)
    events = _random_stream(rng, 800)
    book = core.OrderBook()
    for kind, oid, agent, side, price, qty in events:
        if kind == "cancel":
            book.cancel(oid, agent)
        else:
            book.submit(oid, agent, side, price, qty, kind == "market")
        bid, ask = book.best_bid(), book.best_ask()
        if bid is not None and ask is not None:
            assert bid[0] < ask[0]


def test_volume_conservation():
    rng = np.random.default_rng(7)
    events = _random_stream(rng, 600)
    book = core.OrderBook()
    submitted = {}
    filled = {}
    for kind, oid, agent, side, price, qty in events:
        if kind == "cancel":
            book.cancel(oid, agent)
            continue
        submitted[oid] = qty
        fills, rested, canceled = book.submit(oid, agent, side, price, qty, kind == "market")
        taken = sum(f[1] for f in fills)
        assert taken + rested + canceled == qty
        filled[oid] = filled.get(oid, 0) + taken
        for _, fqty, moid, _ in fills:
            filled[moid] = filled.get(moid, 0) + fqty
    for oid, total in filled.items():
        assert total <= submitted[oid]


@settings(max_examples=40, deadline=None)
@given(st.lists(
    st.tuples(st.sampled_from([1, -1]), st.integers(980, 1020), st.integers(1, 50),
              st.booleans()),
    min_size=1, max_size=60,
))
def test_property_stream_vs_reference(orders):
    book = core.OrderBook()
    ref = RefBook()
    for i, (side, price, qty, is_market) in enumerate(orders):
        got = book.submit(i, side + 5, side, price, qty, is_market)
        want = ref.submit(i, side + 5, side, price, qty, is_market)
        assert (tuple(got[0]), got[1], got[2]) == (tuple(want[0]), want[1], want[2])
    assert book.dump() == ref.dump()


@pytest.mark.skipif(not core.COMPILED, reason="compiled core not built")
@pytest.mark.parametrize("seed", range(4))
def test_compiled_and_pure_books_identical(seed):
    rng = np.random.default_rng(100 + seed)
    events = _random_stream(rng, 700)
    compiled = core.OrderBook()
    pure = PyOrderBook()
    assert _apply(compiled, events) == _apply(pure, events)
    assert compiled.dump() == pure.dump()


# -- sampled mid series -------------------------------------------------------


def test_series_flat_fill_and_mean():
    s = core.MidSeries(100, 500)
    s.fill_to(10 * 10**9)
    assert s.values() == [500] * 11
    assert s.trunc_mean(5, 10 * 10**9) == 500.0
    assert s.trunc_std(5, 10 * 10**9) == 0.0


def test_series_step_semantics():
    s = core.MidSeries(10, 100)
    s.record(2_500_000_000, 200)     # change mid-second 2
    s.fill_to(10**10)
    # samples at 0,1,2 predate the change; 3.. see it
    assert s.values() == [100, 100, 100, 200, 200, 200, 200, 200, 200, 200, 200]


def test_series_change_on_exact_boundary_visible():
    s = core.MidSeries(5, 100)
    s.record(2 * 10**9, 300)         # exactly at second 2
    s.fill_to(5 * 10**9)
    assert s.values() == [100, 100, 300, 300, 300, 300]


def test_series_window_stats_match_numpy():
    rng = np.random.default_rng(0)
    s = core.MidSeries(2000, 1000)
    t = 0
    values = []
    cur = 1000
    changes = []
    for _ in range(300):
        t += int(rng.integers(1, 3 * 10**9))
        cur = int(rng.integers(900, 1100))
        changes.append((t, cur))
    for t, v in changes:
        if t <= 2000 * 10**9:
            s.record(t, v)
    s.fill_to(2000 * 10**9)
    grid = np.array(s.values(), dtype=np.float64)
    for w in (5, 60, 600):
        for asof_s in (3, 100, 1999):
            t_ns = asof_s * 10**9 + 12345
            i = max(0, asof_s - w + 1)
            want_mean = grid[i:asof_s + 1].mean()
            want_std = grid[i:asof_s + 1].std()
            assert s.trunc_mean(w, t_ns) == pytest.approx(want_mean, rel=1e-12)
            assert s.trunc_std(w, t_ns) == pytest.approx(want_std, rel=1e-9, abs=1e-9)


def test_series_cmp_windows_integer_exact():
    s = core.MidSeries(100, 1000)
    s.record(50 * 10**9, 1010)
    s.fill_to(100 * 10**9)
    # short window mean > long window mean after the step up
    assert s.cmp_windows(5, 60, 80 * 10**9) == 1
    assert s.cmp_windows(5, 60, 10 * 10**9) == 0      # only 11 samples yet
    flat = core.MidSeries(100, 777)
    flat.fill_to(100 * 10**9)
    assert flat.cmp_windows(5, 60, 90 * 10**9) == 0


@pytest.mark.skipif(not core.COMPILED, reason="compiled core not built")
def test_compiled_and_pure_series_identical():
    rng = np.random.default_rng(5)
    a = core.MidSeries(500, 1000)
    b = PyMidSeries(500, 1000)
    t = 0
    for _ in range(200):
        t += int(rng.integers(1, 4 * 10**9))
        v = int(rng.integers(500, 1500))
        if t > 500 * 10**9:
            break
        a.record(t, v)
        b.record(t, v)
    a.fill_to(500 * 10**9)
    b.fill_to(500 * 10**9)
    assert list(a.values()) == list(b.values())
    for w in (7, 30, 300):
        for asof in (10, 77, 499):
            t_ns = asof * 10**9
            assert a.trunc_mean(w, t_ns) == b.trunc_mean(w, t_ns)
            assert a.trunc_std(w, t_ns) == b.trunc_std(w, t_ns)
            assert a.cmp_windows(5, w, t_ns) == b.cmp_windows(5, w, t_ns)
