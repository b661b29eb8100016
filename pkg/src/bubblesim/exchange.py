"""Continuous double-auction exchange agent.

Receives order submissions and cancels as kernel messages, matches them with
price-time priority, reports fills to both parties, answers market-data
requests with book snapshots, and keeps the trade tape, the order log and the
1-second sampled mid series for the whole session.
"""

from __future__ import annotations

from bubblesim.core import MidSeries, OrderBook
from bubblesim.kernel import NS_PER_SEC, Agent, Message
from bubblesim.orders import (
    BookSnapshot,
    CancelOrder,
    CancelReport,
    MarketDataRequest,
    MidStats,
    Order,
    Side,
    SubmitOrder,
    TradeReport,
)


class ExchangeAgent(Agent):
    name = "EXCH"

    def __init__(self, horizon_s: int, fallback_mid: int) -> None:
        super().__init__()
        self.book = OrderBook()
        self.series = MidSeries(horizon_s, fallback_mid)
        self.fallback_mid = fallback_mid
        self.last_trade_price: int | None = None
        self.tape: list[tuple[int, int, int, int, int]] = []   # ts, price, qty, buyer, seller
        self.order_log: list[tuple[int, int, int, int, int]] = []  # ts, agent, side, qty, is_market
        self.subscribers: list[int] = []

    # -- market state --------------------------------------------------------

    def mid(self) -> int:
        """Best-bid/ask midpoint; falls back to last trade, then to the
        configured fundamental mean before any trade."""
        bid = self.book.best_bid()
        ask = self.book.best_ask()
        if bid is not None and ask is not None:
            return (bid[0] + ask[0]) // 2
        if self.last_trade_price is not None:
            return self.last_trade_price
        return self.fallback_mid

    def snapshot(self, t: int) -> BookSnapshot:
        bid = self.book.best_bid()
        ask = self.book.best_ask()
        return BookSnapshot(
            ts=t,
            bid_price=bid[0] if bid else None,
            bid_qty=bid[1] if bid else 0,
            ask_price=ask[0] if ask else None,
            ask_qty=ask[1] if ask else 0,
            mid=self.mid(),
            last_trade=self.last_trade_price,
            stats=MidStats(self.series, t),
        )

    def finalize(self) -> None:
        """Materialize the mid series through the end of the session."""
        self.series.fill_to(self.kernel.horizon_ns)

    # -- message handling ------------------------------------------------------

    def on_message(self, t: int, msg: Message) -> None:
        payload = msg.payload
        tp = type(payload)
        if tp is MarketDataRequest:
            self.kernel.send(self.id, msg.sender, self.snapshot(t))
        elif tp is SubmitOrder:
            self._submit(t, payload.order)
        elif tp is CancelOrder:
            self._cancel(t, msg.sender, payload.order_id)

    def _submit(self, t: int, order: Order) -> None:
        order.validate()
        side = int(order.side)
        self.order_log.append((order.ts, order.agent, side, order.qty, 1 if order.is_market else 0))
        fills, _rested, canceled = self.book.submit(
            order.id, order.agent, side, order.limit_price or 0, order.qty, order.is_market
        )
        kernel = self.kernel
        if fills:
            tape = self.tape
            for price, qty, maker_oid, maker_agent in fills:
                if side == 1:
                    tape.append((t, price, qty, order.agent, maker_agent))
                else:
                    tape.append((t, price, qty, maker_agent, order.agent))
                kernel.send(self.id, order.agent, TradeReport(order.id, order.side, price, qty, t))
                kernel.send(self.id, maker_agent, TradeReport(maker_oid, Side(-side), price, qty, t))
            kernel.stats.trades += len(fills)
            self.last_trade_price = fills[-1][0]
        if canceled:
            kernel.send(self.id, order.agent, CancelReport(order.id, canceled, True, False))
        self._record_mid(t)
        if fills and self.subscribers:
            snap = self.snapshot(t)
            for sub in self.subscribers:
                kernel.send(self.id, sub, snap)

    def _cancel(self, t: int, sender: int, order_id: int) -> None:
        qty = self.book.order_qty(order_id)
        ok = self.book.cancel(order_id, sender)
        self.kernel.send(self.id, sender, CancelReport(order_id, qty if ok else 0, ok, True))
        if ok:
            self._record_mid(t)

    def _record_mid(self, t: int) -> None:
        m = self.mid()
        if m != self.series.cur:
            self.series.record(t, m)
