# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: matching book and the sampled mid series.

Twin of bubblesim._core_py; semantics and float results must stay identical
(same integer arithmetic, same division order, no fast-math).  The pure
module is the reference; keep any change mirrored there.
"""

from bisect import bisect_left, insort
from collections import deque

from libc.math cimport sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

NS_PER_SEC = 1_000_000_000
cdef long long NS = 1_000_000_000


cdef class _Level:
    cdef public long long total
    cdef public object fifo          # deque of [oid, agent, qty] lists

    def __cinit__(self, long long total, fifo):
        self.total = total
        self.fifo = fifo


cdef class OrderBook:
    """Two-sided limit order book with price-time priority matching."""

    cdef dict _bid_levels
    cdef dict _ask_levels
    cdef list _bid_prices            # ascending, best bid = last
    cdef list _ask_negs              # negated asks ascending, best ask = -last
    cdef dict _index                 # live oid -> (side, price, agent)

    def __cinit__(self):
        self._bid_levels = {}
        self._ask_levels = {}
        self._bid_prices = []
        self._ask_negs = []
        self._index = {}

    def submit(self, long long oid, long long agent, int side, long long price,
               long long qty, bint is_market):
        cdef list fills = []
        cdef long long best
        cdef dict levels
        cdef list negs, prices
        if side == 1:
            negs = self._ask_negs
            levels = self._ask_levels
            while qty > 0 and len(negs) > 0:
                best = -<long long>negs[len(negs) - 1]
                if not is_market and best > price:
                    break
                qty = self._eat_level(levels, negs, best, qty, fills)
        else:
            prices = self._bid_prices
            levels = self._bid_levels
            while qty > 0 and len(prices) > 0:
                best = <long long>prices[len(prices) - 1]
                if not is_market and best < price:
                    break
                qty = self._eat_level(levels, prices, best, qty, fills)
        cdef long long rested = 0
        cdef long long canceled = 0
        if qty > 0:
            if is_market:
                canceled = qty
            else:
                rested = qty
                self._rest(oid, agent, side, price, qty)
        return fills, rested, canceled

    cdef long long _eat_level(self, dict levels, list price_list, long long best,
                              long long qty, list fills):
        cdef _Level level = <_Level>levels[best]
        queue = level.fifo
        cdef dict index = self._index
        cdef list head
        cdef long long take, head_qty
        while len(queue) > 0 and qty > 0:
            head = <list>queue[0]
            head_qty = <long long>head[2]
            take = qty if qty < head_qty else head_qty
            fills.append((best, take, head[0], head[1]))
            qty -= take
            head[2] = head_qty - take
            level.total -= take
            if head_qty == take:
                queue.popleft()
                del index[head[0]]
        if len(queue) == 0:
            del levels[best]
            price_list.pop()
        return qty

    cdef void _rest(self, long long oid, long long agent, int side,
                    long long price, long long qty):
        cdef dict levels = self._bid_levels if side == 1 else self._ask_levels
        cdef _Level level
        if price in levels:
            level = <_Level>levels[price]
            level.total += qty
            level.fifo.append([oid, agent, qty])
        else:
            levels[price] = _Level(qty, deque([[oid, agent, qty]]))
            if side == 1:
                insort(self._bid_prices, price)
            else:
                insort(self._ask_negs, -price)
        self._index[oid] = (side, price, agent)

    def cancel(self, long long oid, long long agent):
        """Remove a resting order; True iff it was live and owned by agent."""
        info = self._index.get(oid)
        if info is None or <long long>info[2] != agent:
            return False
        cdef int side = <int>info[0]
        cdef long long price = <long long>info[1]
        del self._index[oid]
        cdef dict levels = self._bid_levels if side == 1 else self._ask_levels
        cdef _Level level = <_Level>levels[price]
        queue = level.fifo
        cdef Py_ssize_t i
        cdef list entry
        for i in range(len(queue)):
            entry = <list>queue[i]
            if <long long>entry[0] == oid:
                level.total -= <long long>entry[2]
                del queue[i]
                break
        if len(queue) == 0:
            del levels[price]
            if side == 1:
                prices = self._bid_prices
                prices.pop(bisect_left(prices, price))
            else:
                negs = self._ask_negs
                negs.pop(bisect_left(negs, -price))
        return True

    def best_bid(self):
        """(price, level_qty) of the best bid, or None."""
        if not self._bid_prices:
            return None
        price = self._bid_prices[len(self._bid_prices) - 1]
        return price, (<_Level>self._bid_levels[price]).total

    def best_ask(self):
        if not self._ask_negs:
            return None
        price = -<long long>self._ask_negs[len(self._ask_negs) - 1]
        return price, (<_Level>self._ask_levels[price]).total

    def order_qty(self, long long oid):
        """Remaining resting quantity of an order (0 if not live)."""
        info = self._index.get(oid)
        if info is None:
            return 0
        level = <_Level>(self._bid_levels if <int>info[0] == 1 else self._ask_levels)[info[1]]
        for entry in level.fifo:
            if <long long>(<list>entry)[0] == oid:
                return (<list>entry)[2]
        return 0

    def n_live_orders(self):
        return len(self._index)

    def dump(self):
        """Full book state for oracle comparison: (bids, asks) with FIFO order."""
        bids = [
            (p, [(e[0], e[1], e[2]) for e in (<_Level>self._bid_levels[p]).fifo])
            for p in reversed(self._bid_prices)
        ]
        asks = [
            (-n, [(e[0], e[1], e[2]) for e in (<_Level>self._ask_levels[-n]).fifo])
            for n in reversed(self._ask_negs)
        ]
        return bids, asks


cdef class MidSeries:
    """Mid price sampled on a 1-second grid with O(1) window statistics.

    Prefix sums are int64; exactness requires price * price * horizon to stay
    below 2**63 (true for cent prices below ~3e5 over a trading day).
    """

    cdef public long long horizon_s
    cdef public long long filled
    cdef public long long cur
    cdef long long[::1] _grid
    cdef long long[::1] _ps1
    cdef long long[::1] _ps2

    def __cinit__(self, long long horizon_s, long long initial):
        self.horizon_s = horizon_s
        self.filled = -1
        self.cur = initial
        self._grid = np.empty(horizon_s + 1, dtype=np.int64)
        self._ps1 = np.zeros(horizon_s + 2, dtype=np.int64)
        self._ps2 = np.zeros(horizon_s + 2, dtype=np.int64)

    def record(self, long long t_ns, long long value):
        self._fill((t_ns - 1) // NS)
        self.cur = value

    def fill_to(self, long long t_ns):
        self._fill(t_ns // NS)

    cdef void _fill(self, long long target_s):
        if target_s > self.horizon_s:
            target_s = self.horizon_s
        cdef long long f = self.filled
        if target_s <= f:
            return
        cdef long long v = self.cur
        cdef long long v2 = v * v
        cdef long long a1 = self._ps1[f + 1]
        cdef long long a2 = self._ps2[f + 1]
        cdef long long s
        for s in range(f + 1, target_s + 1):
            self._grid[s] = v
            a1 += v
            a2 += v2
            self._ps1[s + 1] = a1
            self._ps2[s + 1] = a2
        self.filled = target_s

    cdef (long long, long long) _span(self, long long window_s, long long t_ns):
        self._fill(t_ns // NS)
        cdef long long j = t_ns // NS
        if j > self.horizon_s:
            j = self.horizon_s
        cdef long long i = j - window_s + 1
        if i < 0:
            i = 0
        return i, j

    def value(self, long long t_ns):
        """Sampled value as of t (the latest recorded change)."""
        return self.cur

    def window_sum(self, long long window_s, long long t_ns):
        cdef (long long, long long) span = self._span(window_s, t_ns)
        return self._ps1[span[1] + 1] - self._ps1[span[0]], span[1] - span[0] + 1

    def trunc_mean(self, long long window_s, long long t_ns):
        """Window mean, truncated to available history near the open."""
        cdef (long long, long long) span = self._span(window_s, t_ns)
        return (self._ps1[span[1] + 1] - self._ps1[span[0]]) / <double>(span[1] - span[0] + 1)

    def trunc_std(self, long long window_s, long long t_ns):
        cdef (long long, long long) span = self._span(window_s, t_ns)
        cdef long long n = span[1] - span[0] + 1
        cdef double m = (self._ps1[span[1] + 1] - self._ps1[span[0]]) / <double>n
        cdef double var = (self._ps2[span[1] + 1] - self._ps2[span[0]]) / <double>n - m * m
        if var < 0.0:
            var = 0.0
        return sqrt(var)

    def cmp_windows(self, long long short_s, long long long_s, long long t_ns):
        """Sign of (short-window mean - long-window mean), exact in integers.

        Returns 0 when fewer than long_s samples exist (insufficient history).
        """
        cdef (long long, long long) span = self._span(long_s, t_ns)
        cdef long long j = span[1]
        if j - span[0] + 1 < long_s:
            return 0
        cdef long long i_s = j - short_s + 1
        cdef long long s_short = self._ps1[j + 1] - self._ps1[i_s]
        cdef long long s_long = self._ps1[j + 1] - self._ps1[span[0]]
        cdef long long d = s_short * long_s - s_long * short_s
        if d > 0:
            return 1
        if d < 0:
            return -1
        return 0

    def values(self):
        cdef long long n = self.filled + 1
        return [self._grid[s] for s in range(n)]
