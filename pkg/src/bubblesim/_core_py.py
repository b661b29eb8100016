"""Pure-Python hot kernels: the matching book and the sampled mid series.

These are the inner loops of every simulation run.  bubblesim._core is the
compiled twin; the two must behave identically, bit for bit, including float
results (both divide exact integer sums the same way).  Keep any change here
mirrored in _core.pyx.

Prices are integer cents, quantities integer shares, times integer
nanoseconds.  Sums of squares stay exact as long as prices stay below ~3e5
cents over a 23,400 s session (well under 2**53).
"""

from __future__ import annotations

from bisect import bisect_left, insort
from collections import deque
from math import sqrt

NS_PER_SEC = 1_000_000_000


class OrderBook:
    """Two-sided limit order book with price-time priority matching.

    submit() executes the marketable part of an order against resting queues
    (trades print at the resting order's price), rests any limit residue and
    reports any market-order residue for cancellation.  The book is uncrossed
    after every call.
    """

    __slots__ = ("_bid_prices", "_ask_negs", "_bid_levels", "_ask_levels", "_index")

    def __init__(self) -> None:
        self._bid_prices: list[int] = []     # ascending, best bid = last
        self._ask_negs: list[int] = []       # negated asks ascending, best ask = -last
        self._bid_levels: dict[int, list] = {}   # price -> [total_qty, fifo deque]
        self._ask_levels: dict[int, list] = {}
        self._index: dict[int, tuple] = {}       # live oid -> (side, price, agent)

    def submit(self, oid: int, agent: int, side: int, price: int, qty: int, is_market: bool):
        """Match and/or rest one order.

        side is +1 (buy) or -1 (sell); price is ignored for market orders.
        Returns (fills, rested_qty, canceled_qty) where fills is a list of
        (price, qty, maker_oid, maker_agent) in execution order.
        """
        fills = []
        if side == 1:
            negs = self._ask_negs
            levels = self._ask_levels
            while qty > 0 and negs:
                best = -negs[-1]
                if not is_market and best > price:
                    break
                qty = self._eat_level(levels, negs, best, qty, fills)
        else:
            prices = self._bid_prices
            levels = self._bid_levels
            while qty > 0 and prices:
                best = prices[-1]
                if not is_market and best < price:
                    break
                qty = self._eat_level(levels, prices, best, qty, fills)
        rested = 0
        canceled = 0
        if qty > 0:
            if is_market:
                canceled = qty
            else:
                rested = qty
                self._rest(oid, agent, side, price, qty)
        return fills, rested, canceled

    def _eat_level(self, levels, price_list, best: int, qty: int, fills) -> int:
        level = levels[best]
        queue = level[1]
        index = self._index
        while queue and qty > 0:
            head = queue[0]
            take = qty if qty < head[2] else head[2]
            fills.append((best, take, head[0], head[1]))
            qty -= take
            head[2] -= take
            level[0] -= take
            if head[2] == 0:
                queue.popleft()
                del index[head[0]]
        if not queue:
            del levels[best]
            price_list.pop()
        return qty

    def _rest(self, oid: int, agent: int, side: int, price: int, qty: int) -> None:
        levels = self._bid_levels if side == 1 else self._ask_levels
        level = levels.get(price)
        if level is None:
            levels[price] = [qty, deque([[oid, agent, qty]])]
            if side == 1:
                insort(self._bid_prices, price)
            else:
                insort(self._ask_negs, -price)
        else:
            level[0] += qty
            level[1].append([oid, agent, qty])
        self._index[oid] = (side, price, agent)

    def cancel(self, oid: int, agent: int) -> bool:
        """Remove a resting order; True iff it was live and owned by agent."""
        info = self._index.get(oid)
        if info is None or info[2] != agent:
            return False
        side, price, _ = info
        del self._index[oid]
        if side == 1:
            levels = self._bid_levels
        else:
            levels = self._ask_levels
        level = levels[price]
        queue = level[1]
        for i, entry in enumerate(queue):
            if entry[0] == oid:
                level[0] -= entry[2]
                del queue[i]
                break
        if not queue:
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
        price = self._bid_prices[-1]
        return price, self._bid_levels[price][0]

    def best_ask(self):
        if not self._ask_negs:
            return None
        price = -self._ask_negs[-1]
        return price, self._ask_levels[price][0]

    def order_qty(self, oid: int) -> int:
        """Remaining resting quantity of an order (0 if not live)."""
        info = self._index.get(oid)
        if info is None:
            return 0
        level = (self._bid_levels if info[0] == 1 else self._ask_levels)[info[1]]
        for entry in level[1]:
            if entry[0] == oid:
                return entry[2]
        return 0

    def n_live_orders(self) -> int:
        return len(self._index)

    def dump(self):
        """Full book state for oracle comparison: (bids, asks) with FIFO order."""
        bids = [
            (p, [(e[0], e[1], e[2]) for e in self._bid_levels[p][1]])
            for p in reversed(self._bid_prices)
        ]
        asks = [
            (-n, [(e[0], e[1], e[2]) for e in self._ask_levels[-n][1]])
            for n in reversed(self._ask_negs)
        ]
        return bids, asks


class MidSeries:
    """Mid price sampled on a 1-second grid with O(1) window statistics.

    record(t, v) registers a change of the sampled value effective at time t;
    samples strictly before t keep the previous value.  Integer prefix sums
    make window means/stds exact and identical across the two twins.
    """

    __slots__ = ("horizon_s", "grid", "_s1", "_s2", "filled", "cur")

    def __init__(self, horizon_s: int, initial: int) -> None:
        self.horizon_s = horizon_s
        self.grid: list[int] = []
        self._s1: list[int] = [0]
        self._s2: list[int] = [0]
        self.filled = -1
        self.cur = initial

    def record(self, t_ns: int, value: int) -> None:
        self._fill((t_ns - 1) // NS_PER_SEC)
        self.cur = value

    def fill_to(self, t_ns: int) -> None:
        self._fill(t_ns // NS_PER_SEC)

    def _fill(self, target_s: int) -> None:
        if target_s > self.horizon_s:
            target_s = self.horizon_s
        f = self.filled
        if target_s <= f:
            return
        v = self.cur
        v2 = v * v
        grid = self.grid
        s1 = self._s1
        s2 = self._s2
        a1 = s1[-1]
        a2 = s2[-1]
        for _ in range(target_s - f):
            grid.append(v)
            a1 += v
            a2 += v2
            s1.append(a1)
            s2.append(a2)
        self.filled = target_s

    def _span(self, window_s: int, t_ns: int) -> tuple[int, int]:
        self._fill(t_ns // NS_PER_SEC)
        j = t_ns // NS_PER_SEC
        if j > self.horizon_s:
            j = self.horizon_s
        i = j - window_s + 1
        if i < 0:
            i = 0
        return i, j

    def value(self, t_ns: int) -> int:
        """Sampled value as of t (the latest recorded change)."""
        return self.cur

    def window_sum(self, window_s: int, t_ns: int):
        i, j = self._span(window_s, t_ns)
        return self._s1[j + 1] - self._s1[i], j - i + 1

    def trunc_mean(self, window_s: int, t_ns: int) -> float:
        """Window mean, truncated to available history near the open."""
        i, j = self._span(window_s, t_ns)
        return (self._s1[j + 1] - self._s1[i]) / (j - i + 1)

    def trunc_std(self, window_s: int, t_ns: int) -> float:
        i, j = self._span(window_s, t_ns)
        n = j - i + 1
        m = (self._s1[j + 1] - self._s1[i]) / n
        var = (self._s2[j + 1] - self._s2[i]) / n - m * m
        if var < 0.0:
            var = 0.0
        return sqrt(var)

    def cmp_windows(self, short_s: int, long_s: int, t_ns: int) -> int:
        """Sign of (short-window mean - long-window mean), exact in integers.

        Returns 0 when fewer than long_s samples exist (insufficient history).
        """
        i_l, j = self._span(long_s, t_ns)
        if j - i_l + 1 < long_s:
            return 0
        i_s = j - short_s + 1
        s_short = self._s1[j + 1] - self._s1[i_s]
        s_long = self._s1[j + 1] - self._s1[i_l]
        d = s_short * long_s - s_long * short_s
        if d > 0:
            return 1
        if d < 0:
            return -1
        return 0

    def values(self) -> list[int]:
        return list(self.grid)
