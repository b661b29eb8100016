"""Order, trade and market-data types exchanged between agents."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum


class Side(IntEnum):
    BUY = 1
    SELL = -1


@dataclass(slots=True)
class Order:
    id: int
    agent: int
    side: Side
    qty: int
    limit_price: int | None     # None -> market order
    ts: int

    @property
    def is_market(self) -> bool:
        return self.limit_price is None

    def validate(self) -> None:
        if self.qty <= 0:
            raise ValueError(f"order qty must be positive, got {self.qty}")
        if self.limit_price is not None and self.limit_price <= 0:
            raise ValueError(f"limit price must be positive, got {self.limit_price}")


@dataclass(slots=True)
class Trade:
    ts: int
    price: int
    qty: int
    buyer: int
    seller: int


@dataclass(slots=True)
class BookSnapshot:
    """Top-of-book view plus a window-statistics handle, as of ts."""

    ts: int
    bid_price: int | None
    bid_qty: int
    ask_price: int | None
    ask_qty: int
    mid: int
    last_trade: int | None
    stats: "MidStats"


class MidStats:
    """Window statistics over the exchange mid series, frozen at a timestamp.

    All queries only touch samples at or before ``asof``, so a view stays
    consistent even while the underlying series keeps growing.
    """

    __slots__ = ("_series", "asof")

    def __init__(self, series, asof: int) -> None:
        self._series = series
        self.asof = asof

    def mean(self, window_s: int) -> float:
        return self._series.trunc_mean(window_s, self.asof)

    def std(self, window_s: int) -> float:
        return self._series.trunc_std(window_s, self.asof)

    def signal(self, short_s: int, long_s: int) -> int:
        """+1/-1/0 comparison of short vs long window means (0 if short history)."""
        return self._series.cmp_windows(short_s, long_s, self.asof)


# -- message payloads ------------------------------------------------------


@dataclass(slots=True)
class SubmitOrder:
    order: Order


@dataclass(slots=True)
class CancelOrder:
    order_id: int


class MarketDataRequest:
    __slots__ = ()


#: Shared request instance; the payload carries no data.
MD_REQUEST = MarketDataRequest()


@dataclass(slots=True)
class TradeReport:
    """Fill notice to one party; side is the side of that party's order."""

    order_id: int
    side: Side
    price: int
    qty: int
    ts: int


@dataclass(slots=True)
class CancelReport:
    """Outcome of a cancel request, or a market-order residue cancellation."""

    order_id: int
    qty: int
    ok: bool
    requested: bool
