"""Per-minute episodic trading environment over a live market simulation.

Each step the agent sees a 9-feature observation (holding, best-level
imbalance, 30-min volatility, mid price, and five short-vs-long momentum
indicators), acts BUY / HOLD / SELL as a fixed-size market order, the
simulation advances one decision period, and the reward is the change in
marked-to-market value (cash + holding * mid) in exact integer cents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bubblesim.kernel import NS_PER_SEC, Agent
from bubblesim.orders import Order, Side, SubmitOrder, TradeReport
from bubblesim.policy import BUY, SELL
from bubblesim.scenario import STREAM_RL, ScenarioConfig, build_market

FEATURE_NAMES = (
    "holding", "imbalance", "volatility", "mid_price",
    "momentum_30", "momentum_60", "momentum_90", "momentum_120", "momentum_180",
)


@dataclass(slots=True)
class ObservationVector:
    """Raw (unscaled) state features."""

    holding: float
    imbalance: float
    volatility: float
    mid_price: float
    momentum_30: float
    momentum_60: float
    momentum_90: float
    momentum_120: float
    momentum_180: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.holding, self.imbalance, self.volatility, self.mid_price,
             self.momentum_30, self.momentum_60, self.momentum_90,
             self.momentum_120, self.momentum_180],
            dtype=np.float64,
        )


@dataclass(slots=True)
class Transition:
    obs: np.ndarray
    action: int
    reward: int              # integer cents, marked-to-market delta
    next_obs: np.ndarray
    done: bool


class ExecutionAgent(Agent):
    """Passive in-kernel proxy for the learner: holds cash and inventory,
    driven by the environment rather than by wakeups."""

    name = "RL"

    def __init__(self, starting_cash: int) -> None:
        super().__init__()
        self.holding = 0
        self.cash = starting_cash

    def on_message(self, t, msg) -> None:
        payload = msg.payload
        if type(payload) is TradeReport:
            side = int(payload.side)
            self.holding += side * payload.qty
            self.cash -= side * payload.qty * payload.price


class TradingEnv:
    """reset()/step() wrapper around one simulated trading session."""

    def __init__(self, scenario: ScenarioConfig, seed: int, bubble_roster: bool) -> None:
        self.scenario = scenario
        self.seed = seed
        self.bubble_roster = bubble_roster
        rl = scenario.rl
        self.period_ns = rl.decision_period_s * NS_PER_SEC
        self.order_qty = rl.order_qty
        self.offsets = np.array(rl.feature_offsets, dtype=np.float64)
        self.scales = np.array(rl.feature_scales, dtype=np.float64)
        self.short_s = rl.short_window_min * 60
        self.windows_s = tuple(m * 60 for m in rl.momentum_windows_min)
        self.vol_window_s = rl.volatility_window_s
        self.sign_mode = rl.momentum_mode == "sign"
        self.market = None
        self.trader: ExecutionAgent | None = None
        self.initial_mtm = 0
        self.last_mtm = 0
        self.reward_total = 0
        self.episode_rows: list[tuple] = []   # (t_s, action, reward, holding, mid)

    def reset(self) -> np.ndarray:
        self.market = build_market(self.scenario, self.seed, include_herding=self.bubble_roster)
        kernel = self.market.kernel
        self.trader = ExecutionAgent(self.scenario.rl.starting_cash_cents)
        kernel.register(self.trader)
        kernel.run_until(0)
        self.initial_mtm = self._mtm()
        self.last_mtm = self.initial_mtm
        self.reward_total = 0
        self.episode_rows = []
        return self.observe()

    # -- state ----------------------------------------------------------------

    def _mtm(self) -> int:
        return self.trader.cash + self.trader.holding * self.market.exchange.mid()

    def raw_observation(self) -> ObservationVector:
        ex = self.market.exchange
        t = self.market.kernel.now
        bid = ex.book.best_bid()
        ask = ex.book.best_ask()
        series = ex.series
        short_mean = series.trunc_mean(self.short_s, t)
        moms = []
        for w in self.windows_s:
            long_mean = series.trunc_mean(w, t)
            if self.sign_mode:
                moms.append(float(np.sign(short_mean - long_mean)))
            else:
                moms.append((short_mean - long_mean) / long_mean)
        return ObservationVector(
            holding=float(self.trader.holding),
            imbalance=float((bid[1] if bid else 0) - (ask[1] if ask else 0)),
            volatility=series.trunc_std(self.vol_window_s, t),
            mid_price=float(ex.mid()),
            momentum_30=moms[0], momentum_60=moms[1], momentum_90=moms[2],
            momentum_120=moms[3], momentum_180=moms[4],
        )

    def observe(self) -> np.ndarray:
        return (self.raw_observation().as_array() - self.offsets) / self.scales

    # -- control ----------------------------------------------------------------

    def step(self, action: int):
        """Apply the action, advance one decision period, pay the MtM delta.

        Returns (next_obs, reward_cents, done, info).
        """
        kernel = self.market.kernel
        t = kernel.now
        if action == BUY:
            self._market_order(Side.BUY)
        elif action == SELL:
            self._market_order(Side.SELL)
        next_t = t + self.period_ns
        if next_t > kernel.horizon_ns:
            next_t = kernel.horizon_ns
        kernel.run_until(next_t)
        mtm = self._mtm()
        reward = mtm - self.last_mtm
        self.last_mtm = mtm
        self.reward_total += reward
        done = next_t >= kernel.horizon_ns
        if done:
            self.market.exchange.finalize()
        obs = self.observe()
        mid = self.market.exchange.mid()
        self.episode_rows.append((t // NS_PER_SEC, action, reward, self.trader.holding, mid))
        info = {
            "mtm": mtm,
            "holding": self.trader.holding,
            "cash": self.trader.cash,
            "mid": mid,
            "t_s": next_t // NS_PER_SEC,
        }
        return obs, reward, done, info

    def _market_order(self, side: Side) -> None:
        kernel = self.market.kernel
        order = Order(kernel.next_order_id(), self.trader.id, side, self.order_qty,
                      None, kernel.now)
        kernel.send(self.trader.id, self.market.exchange.id, SubmitOrder(order))

    # -- post-episode ----------------------------------------------------------

    def final_mtm(self) -> int:
        return self.last_mtm

    def profit_pct(self) -> float:
        start = self.scenario.rl.starting_cash_cents
        return (self.final_mtm() - start) / start

    def series_arrays(self):
        """(mid, fundamental) 1 Hz arrays for bubble detection after an episode."""
        mid = np.array(self.market.exchange.series.values(), dtype=np.int64)
        fund = self.market.oracle.path.values
        return mid, fund
