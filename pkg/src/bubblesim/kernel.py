"""Deterministic discrete-event kernel.

Agents never touch each other directly: every interaction is a timestamped
Message routed through the kernel with a configurable delivery latency, plus
self-scheduled wakeups.  Events are delivered in strict (deliver_time,
insertion_sequence) order, which makes a whole run a pure function of the
configuration and the master seed.

Time is integer nanoseconds since the session open (t=0).
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field

import numpy as np

NS_PER_SEC = 1_000_000_000
DEFAULT_HORIZON_S = 23_400          # 6.5 h continuous session
DEFAULT_LATENCY_NS = 1_000          # 1 us between any agent pair


def ns(seconds: float) -> int:
    """Convert seconds to integer nanoseconds of simulation time."""
    return int(round(seconds * NS_PER_SEC))


class SchedulingError(ValueError):
    """An event was scheduled for delivery in the past (agent logic bug)."""


#: Sentinel payload marking a wakeup event; recipients get on_wakeup().
WAKEUP = object()


@dataclass(slots=True)
class Message:
    send_time: int
    deliver_time: int
    sender: int
    recipient: int
    payload: object


@dataclass(slots=True)
class KernelStats:
    messages: int = 0
    wakeups: int = 0
    trades: int = 0
    end_time: int = 0
    undelivered: int = 0      # still queued past the end of the last run_until


class Agent:
    """Base market participant.

    Subclasses react to on_wakeup / on_message and talk back exclusively via
    kernel.send / kernel.set_wakeup.  ``id`` is assigned at registration.
    """

    name = "agent"

    def __init__(self) -> None:
        self.id = -1
        self.kernel: Kernel | None = None

    def attach(self, kernel: Kernel, agent_id: int) -> None:
        self.kernel = kernel
        self.id = agent_id

    def start(self) -> None:
        """Called once before the run; schedule initial wakeups here."""

    def on_wakeup(self, t: int) -> None:
        pass

    def on_message(self, t: int, msg: Message) -> None:
        pass


class Kernel:
    """Single-threaded event loop with per-agent deterministic RNG streams.

    One instance owns one simulation run.  Instances share no global state,
    so independent runs can execute in parallel processes.
    """

    def __init__(
        self,
        master_seed: int,
        horizon_ns: int = DEFAULT_HORIZON_S * NS_PER_SEC,
        latency_ns: int = DEFAULT_LATENCY_NS,
        trace: bool = False,
    ) -> None:
        self.master_seed = int(master_seed)
        self.horizon_ns = int(horizon_ns)
        self.latency_ns = int(latency_ns)
        self.now = 0
        self.agents: list[Agent] = []
        self.stats = KernelStats()
        self._queue: list[tuple[int, int, Message]] = []
        self._seq = 0
        self._next_order_id = 0
        self._started = False
        self._hasher = hashlib.blake2b(digest_size=16) if trace else None

    # -- setup -------------------------------------------------------------

    def register(self, agent: Agent) -> int:
        agent_id = len(self.agents)
        self.agents.append(agent)
        agent.attach(self, agent_id)
        return agent_id

    def stream(self, *key: int) -> np.random.Generator:
        """Independent named RNG stream derived from the master seed.

        Philox is counter-based, so streams with distinct keys never overlap
        and do not depend on draw order elsewhere.
        """
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=tuple(key))
        return np.random.Generator(np.random.Philox(ss))

    def next_order_id(self) -> int:
        self._next_order_id += 1
        return self._next_order_id

    # -- scheduling --------------------------------------------------------

    def schedule(self, msg: Message) -> None:
        if msg.deliver_time < self.now:
            raise SchedulingError(
                f"deliver_time {msg.deliver_time} is before current time {self.now}"
            )
        if msg.deliver_time < msg.send_time:
            raise SchedulingError("deliver_time precedes send_time (negative latency)")
        heapq.heappush(self._queue, (msg.deliver_time, self._seq, msg))
        self._seq += 1

    def send(self, sender: int, recipient: int, payload: object, delay_ns: int | None = None) -> None:
        delay = self.latency_ns if delay_ns is None else delay_ns
        self.schedule(Message(self.now, self.now + delay, sender, recipient, payload))

    def set_wakeup(self, agent_id: int, t: int) -> None:
        if t < self.now:
            raise SchedulingError(f"wakeup at {t} is before current time {self.now}")
        heapq.heappush(self._queue, (t, self._seq, Message(self.now, t, agent_id, agent_id, WAKEUP)))
        self._seq += 1

    # -- run loop ----------------------------------------------------------

    def run_until(self, end_ns: int) -> KernelStats:
        """Process every event with deliver_time <= end_ns, in key order."""
        if not self._started:
            self._started = True
            for agent in self.agents:
                agent.start()
        queue = self._queue
        agents = self.agents
        stats = self.stats
        hasher = self._hasher
        while queue:
            t = queue[0][0]
            if t > end_ns:
                break
            _, _, msg = heapq.heappop(queue)
            self.now = t
            payload = msg.payload
            if hasher is not None:
                hasher.update(
                    b"%d|%d|%d|%s;" % (t, msg.sender, msg.recipient, type(payload).__name__.encode())
                )
            if payload is WAKEUP:
                stats.wakeups += 1
                agents[msg.recipient].on_wakeup(t)
            else:
                stats.messages += 1
                agents[msg.recipient].on_message(t, msg)
        self.now = end_ns
        stats.end_time = end_ns
        stats.undelivered = len(queue)
        return stats

    def run(self) -> KernelStats:
        return self.run_until(self.horizon_ns)

    def trace_digest(self) -> str:
        if self._hasher is None:
            raise RuntimeError("kernel was created with trace=False")
        return self._hasher.hexdigest()
