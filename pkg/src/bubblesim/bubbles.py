"""Bubble detection and measurement over aligned mid/fundamental series.

A candidate interval opens where the short moving average of the mid crosses
above (below) the long moving average and closes at the reverse cross; it
counts as a bubble only if the mid deviates from the fundamental by at least
the threshold in the cross's direction somewhere inside the interval (or on
average, in "mean" mode).  Crosses are decided in exact integer arithmetic so
detection is reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BubbleEvent:
    start_s: int
    end_s: int
    direction: str            # "up" | "down"
    magnitude_cents: float    # mean |fundamental - mid| over the interval
    duration_s: int

    def __post_init__(self):
        if self.end_s <= self.start_s:
            raise ValueError("bubble must have positive duration")


@dataclass(frozen=True)
class BubbleMetrics:
    count: int
    avg_magnitude_cents: float | None
    avg_duration_s: float | None


def detect(
    mid: np.ndarray,
    fundamental: np.ndarray,
    short_window_s: int = 300,
    long_window_s: int = 1800,
    dev_threshold: float = 0.02,
    body_mode: str = "any",
) -> list[BubbleEvent]:
    """Detect bubble intervals on 1 Hz mid/fundamental series.

    Series must be aligned and equally long.  Returns disjoint, time-ordered
    events.  A series shorter than the long window yields no events.
    """
    if body_mode not in ("any", "mean"):
        raise ValueError(f"unknown body_mode {body_mode!r}")
    n = len(mid)
    if len(fundamental) != n:
        raise ValueError("mid and fundamental series must be aligned")
    if n < long_window_s:
        return []

    mid_i = np.asarray(mid, dtype=np.int64)
    cum = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(mid_i, out=cum[1:])

    # d[t] ~ sign(short MA - long MA) at second t, full windows only
    first = long_window_s - 1
    ts = np.arange(first, n)
    s_short = cum[ts + 1] - cum[ts + 1 - short_window_s]
    s_long = cum[ts + 1] - cum[ts + 1 - long_window_s]
    d = np.sign(s_short * long_window_s - s_long * short_window_s).astype(np.int8)

    fund = np.asarray(fundamental, dtype=np.float64)
    rel_dev = (mid_i - fund) / fund

    events: list[BubbleEvent] = []
    state = 0                 # current candidate direction, 0 = none
    start = 0
    for k in range(len(d)):
        sign = int(d[k])
        if state == 0:
            if sign != 0:
                state = sign
                start = first + k
        elif sign == -state:
            _close(events, mid_i, fund, rel_dev, start, first + k, state,
                   dev_threshold, body_mode)
            state = sign
            start = first + k
    if state != 0 and first + len(d) - 1 > start:
        _close(events, mid_i, fund, rel_dev, start, first + len(d) - 1, state,
               dev_threshold, body_mode)
    return events


def _close(events, mid_i, fund, rel_dev, start, end, direction, threshold, body_mode) -> None:
    window = rel_dev[start:end + 1]
    if body_mode == "any":
        dev = window.max() if direction > 0 else -window.min()
    else:
        m = window.mean()
        dev = m if direction > 0 else -m
    if dev >= threshold:
        magnitude = float(np.abs(fund[start:end + 1] - mid_i[start:end + 1]).mean())
        events.append(BubbleEvent(
            start_s=int(start),
            end_s=int(end),
            direction="up" if direction > 0 else "down",
            magnitude_cents=magnitude,
            duration_s=int(end - start),
        ))


def measure(events: list[BubbleEvent]) -> BubbleMetrics:
    """Aggregate count / average magnitude / average duration.

    With zero events the averages are undefined and reported as None; callers
    flag such runs as "no bubble".
    """
    if not events:
        return BubbleMetrics(count=0, avg_magnitude_cents=None, avg_duration_s=None)
    return BubbleMetrics(
        count=len(events),
        avg_magnitude_cents=sum(e.magnitude_cents for e in events) / len(events),
        avg_duration_s=sum(e.duration_s for e in events) / len(events),
    )
