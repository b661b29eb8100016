"""Rule-based background agents.

Five roles populate the market: value agents arbitrage noisy fundamental
observations against the mid, noise agents place small random resting orders,
momentum agents chase the short/long moving-average signal with marketable
limits, herding agents chase the same signal with market orders until a
regulatory cutoff silences them, and a market maker keeps a two-sided quote.

All randomness comes from each agent's own Philox stream, so a run replays
identically from the master seed.
"""

from __future__ import annotations

import numpy as np

from bubblesim.fundamental import FundamentalOracle
from bubblesim.kernel import NS_PER_SEC, Agent, Message
from bubblesim.orders import (
    MD_REQUEST,
    BookSnapshot,
    CancelOrder,
    CancelReport,
    Order,
    Side,
    SubmitOrder,
    TradeReport,
)


def momentum_signal(prices, short_s: int = 300, long_s: int = 1800) -> int:
    """Compare short vs long moving averages over a 1 Hz price sequence.

    Returns +1 when the short mean exceeds the long mean, -1 when below, and
    0 on equality or when fewer than long_s samples are available.  Uses the
    samples at the end of the sequence, exact integer arithmetic.
    """
    n = len(prices)
    if n < long_s:
        return 0
    s_short = sum(prices[n - short_s:])
    s_long = sum(prices[n - long_s:])
    d = s_short * long_s - s_long * short_s
    if d > 0:
        return 1
    if d < 0:
        return -1
    return 0


class TradingAgent(Agent):
    """Shared wake/observe/act plumbing and position bookkeeping."""

    def __init__(self, exchange_id: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.exchange_id = exchange_id
        self.rng = rng
        self.holding = 0
        self.cash = 0

    # subclasses override
    def first_wake(self) -> int:
        raise NotImplementedError

    def next_wake(self, t: int) -> int | None:
        raise NotImplementedError

    def decide(self, t: int, snap: BookSnapshot) -> None:
        raise NotImplementedError

    def start(self) -> None:
        t = self.first_wake()
        if t <= self.kernel.horizon_ns:
            self.kernel.set_wakeup(self.id, t)

    def on_wakeup(self, t: int) -> None:
        self.kernel.send(self.id, self.exchange_id, MD_REQUEST)
        nxt = self.next_wake(t)
        if nxt is not None and nxt <= self.kernel.horizon_ns:
            self.kernel.set_wakeup(self.id, nxt)

    def on_message(self, t: int, msg: Message) -> None:
        payload = msg.payload
        tp = type(payload)
        if tp is BookSnapshot:
            self.decide(t, payload)
        elif tp is TradeReport:
            side = int(payload.side)
            self.holding += side * payload.qty
            self.cash -= side * payload.qty * payload.price
            self.on_fill(payload)
        elif tp is CancelReport:
            self.on_cancel(payload)

    def on_fill(self, report: TradeReport) -> None:
        pass

    def on_cancel(self, report: CancelReport) -> None:
        pass

    def submit_limit(self, side: Side, price: int, qty: int) -> int:
        kernel = self.kernel
        oid = kernel.next_order_id()
        order = Order(oid, self.id, side, qty, price, kernel.now)
        kernel.send(self.id, self.exchange_id, SubmitOrder(order))
        return oid

    def submit_market(self, side: Side, qty: int) -> int:
        kernel = self.kernel
        oid = kernel.next_order_id()
        order = Order(oid, self.id, side, qty, None, kernel.now)
        kernel.send(self.id, self.exchange_id, SubmitOrder(order))
        return oid


class ValueAgent(TradingAgent):
    """Buys when the market looks cheap against its noisy fundamental
    observation, sells when it looks rich; quiet inside the band."""

    name = "VALUE"

    def __init__(self, exchange_id, rng, oracle: FundamentalOracle,
                 band: float, qty: int, wake_s: float, jitter_s: float) -> None:
        super().__init__(exchange_id, rng)
        self.oracle = oracle
        self.band = band
        self.qty = qty
        self.wake_ns = int(wake_s * NS_PER_SEC)
        self.jitter_ns = int(jitter_s * NS_PER_SEC)

    def first_wake(self) -> int:
        return int(self.rng.integers(0, self.wake_ns + 1))

    def next_wake(self, t: int) -> int:
        jitter = int(self.rng.integers(-self.jitter_ns, self.jitter_ns + 1)) if self.jitter_ns else 0
        return t + self.wake_ns + jitter

    def decide(self, t: int, snap: BookSnapshot) -> None:
        obs = self.oracle.observe(t, self.rng)
        mid = snap.mid
        if mid < obs * (1.0 - self.band):
            price = snap.ask_price if snap.ask_price is not None else obs
            self.submit_limit(Side.BUY, price, self.qty)
        elif mid > obs * (1.0 + self.band):
            price = snap.bid_price if snap.bid_price is not None else obs
            self.submit_limit(Side.SELL, price, self.qty)


class NoiseAgent(TradingAgent):
    """Retail-style participant: a few small resting orders per day, random
    side, joined at the touch."""

    name = "NOISE"

    def __init__(self, exchange_id, rng, qty_min: int, qty_max: int,
                 wakes_per_day: float, horizon_s: int) -> None:
        super().__init__(exchange_id, rng)
        self.qty_min = qty_min
        self.qty_max = qty_max
        self.mean_gap_ns = horizon_s * NS_PER_SEC / wakes_per_day

    def _gap(self) -> int:
        return int(self.rng.exponential(self.mean_gap_ns)) + 1

    def first_wake(self) -> int:
        return self._gap()

    def next_wake(self, t: int) -> int:
        return t + self._gap()

    def decide(self, t: int, snap: BookSnapshot) -> None:
        buy = self.rng.random() < 0.5
        qty = int(self.rng.integers(self.qty_min, self.qty_max + 1))
        if buy:
            if snap.bid_price is None:
                return
            self.submit_limit(Side.BUY, snap.bid_price, qty)
        else:
            if snap.ask_price is None:
                return
            self.submit_limit(Side.SELL, snap.ask_price, qty)


class MomentumAgent(TradingAgent):
    """Aggressive trend chaser: limit orders in the direction of the
    short-vs-long moving-average signal, priced through the touch.

    The limit price pays up to ``aggression`` cents beyond the current best
    opposite quote, so unfilled residue reprices the book in the trend
    direction instead of just consuming liquidity.
    """

    name = "MOMENTUM"

    def __init__(self, exchange_id, rng, qty: int, wake_s: float,
                 short_window_s: int, long_window_s: int, aggression: int = 0) -> None:
        super().__init__(exchange_id, rng)
        self.qty = qty
        self.wake_ns = int(wake_s * NS_PER_SEC)
        self.short_s = short_window_s
        self.long_s = long_window_s
        self.aggression = aggression

    def first_wake(self) -> int:
        return int(self.rng.integers(0, self.wake_ns + 1))

    def next_wake(self, t: int) -> int:
        return t + self.wake_ns

    def decide(self, t: int, snap: BookSnapshot) -> None:
        sig = snap.stats.signal(self.short_s, self.long_s)
        if sig > 0:
            if snap.ask_price is not None:
                self.submit_limit(Side.BUY, snap.ask_price + self.aggression, self.qty)
        elif sig < 0:
            if snap.bid_price is not None:
                price = snap.bid_price - self.aggression
                self.submit_limit(Side.SELL, price if price > 0 else 1, self.qty)


class HerdingAgent(MomentumAgent):
    """Same trend signal as momentum agents but executed with market orders,
    and silenced completely from the cutoff time onward."""

    name = "HERDING"

    def __init__(self, exchange_id, rng, qty: int, wake_s: float,
                 short_window_s: int, long_window_s: int, cutoff_s: int) -> None:
        super().__init__(exchange_id, rng, qty, wake_s, short_window_s, long_window_s)
        self.cutoff_ns = cutoff_s * NS_PER_SEC

    def next_wake(self, t: int) -> int | None:
        nxt = t + self.wake_ns
        return nxt if nxt < self.cutoff_ns else None

    def decide(self, t: int, snap: BookSnapshot) -> None:
        if t >= self.cutoff_ns:
            return
        sig = snap.stats.signal(self.short_s, self.long_s)
        if sig > 0:
            self.submit_market(Side.BUY, self.qty)
        elif sig < 0:
            self.submit_market(Side.SELL, self.qty)


class MarketMakerAgent(TradingAgent):
    """Keeps a symmetric ladder of quotes around the mid, re-quoting each wake.

    Levels sit at mid +/- (half_spread + k * level_step) for k = 0..levels-1,
    each of size qty.  The ladder is what lets market orders move the price:
    takers walk the rungs and the maker re-centers on the drifted mid.
    Stale quotes are cancelled before the new ladder is placed.
    """

    name = "MM"

    def __init__(self, exchange_id, rng, half_spread: int, qty: int, wake_s: float,
                 levels: int = 1, level_step: int = 25) -> None:
        super().__init__(exchange_id, rng)
        self.half_spread = half_spread
        self.qty = qty
        self.wake_ns = int(wake_s * NS_PER_SEC)
        self.levels = levels
        self.level_step = level_step
        self.live_quotes: list[int] = []

    def first_wake(self) -> int:
        return int(self.rng.integers(0, self.wake_ns + 1))

    def next_wake(self, t: int) -> int:
        return t + self.wake_ns

    def decide(self, t: int, snap: BookSnapshot) -> None:
        kernel = self.kernel
        for oid in self.live_quotes:
            kernel.send(self.id, self.exchange_id, CancelOrder(oid))
        mid = snap.mid
        quotes: list[int] = []
        for k in range(self.levels):
            offset = self.half_spread + k * self.level_step
            bid = mid - offset
            ask = mid + offset
            if bid < 1:
                bid = 1
            if ask <= bid:
                ask = bid + 1
            quotes.append(self.submit_limit(Side.BUY, bid, self.qty))
            quotes.append(self.submit_limit(Side.SELL, ask, self.qty))
        self.live_quotes = quotes
