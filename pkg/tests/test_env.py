"""Trading environment: observation definitions, rewards, determinism."""

import numpy as np
import pytest

from bubblesim.env import FEATURE_NAMES, TradingEnv
from bubblesim.kernel import NS_PER_SEC
from bubblesim.policy import BUY, HOLD, SELL
from bubblesim.scenario import default_config, smoke_config
from dataclasses import replace


@pytest.fixture(scope="module")
def smoke_env_episode():
    """One full HOLD episode on the smoke config, shared across tests."""
    env = TradingEnv(smoke_config(), seed=3, bubble_roster=True)
    obs0 = env.reset()
    transitions = []
    done = False
    while not done:
        obs, reward, done, info = env.step(HOLD)
        transitions.append((obs, reward, done, info))
    return env, obs0, transitions


def test_episode_length_matches_horizon(smoke_env_episode):
    env, _, transitions = smoke_env_episode
    assert len(transitions) == env.scenario.market.horizon_s // 60


def test_default_config_episode_is_390_steps():
    cfg = default_config()
    assert cfg.market.horizon_s // cfg.rl.decision_period_s == 390


def test_hold_with_zero_holding_zero_reward(smoke_env_episode):
    env, _, transitions = smoke_env_episode
    assert all(r == 0 for _, r, _, _ in transitions)
    assert env.profit_pct() == 0.0


def test_reward_telescoping_exact(smoke_env_episode):
    env, _, transitions = smoke_env_episode
    total = sum(r for _, r, _, _ in transitions)
    assert total == env.final_mtm() - env.initial_mtm


def test_first_observation_is_neutral():
    env = TradingEnv(smoke_config(), seed=5, bubble_roster=True)
    obs = env.reset()
    raw = env.raw_observation()
    assert raw.holding == 0
    assert raw.volatility == 0.0             # flat pre-open history
    assert raw.momentum_30 == raw.momentum_180 == 0.0
    assert raw.mid_price == env.scenario.fundamental.mu_cents


def test_imbalance_is_best_level_volume_difference():
    env = TradingEnv(smoke_config(), seed=5, bubble_roster=True)
    env.reset()
    env.market.kernel.run_until(600 * NS_PER_SEC)
    book = env.market.exchange.book
    raw = env.raw_observation()
    bid = book.best_bid()
    ask = book.best_ask()
    assert raw.imbalance == (bid[1] if bid else 0) - (ask[1] if ask else 0)


def test_momentum_features_match_windowed_mean_oracle():
    env = TradingEnv(smoke_config(), seed=7, bubble_roster=True)
    env.reset()
    for _ in range(60):                      # 1 hour in
        env.step(HOLD)
    t = env.market.kernel.now
    grid = env.market.exchange.series.values()
    s_now = t // NS_PER_SEC
    window = grid[:s_now + 1]
    short = np.mean(window[-300:])
    raw = env.raw_observation()
    for name, minutes in zip(FEATURE_NAMES[4:], (30, 60, 90, 120, 180)):
        w = minutes * 60
        long = np.mean(window[-w:]) if len(window) >= w else np.mean(window)
        want = (short - long) / long
        assert getattr(raw, name) == pytest.approx(want, rel=1e-9)
    assert raw.volatility == pytest.approx(np.std(window[-1800:]), rel=1e-9)


def test_buy_fills_and_changes_holding():
    env = TradingEnv(smoke_config(), seed=9, bubble_roster=True)
    env.reset()
    for _ in range(10):
        env.step(HOLD)
    obs, reward, done, info = env.step(BUY)
    assert info["holding"] == env.scenario.rl.order_qty
    assert env.trader.cash < env.scenario.rl.starting_cash_cents
    obs, reward, done, info = env.step(SELL)
    assert info["holding"] == 0


def test_mtm_ledger_hand_computed():
    env = TradingEnv(smoke_config(), seed=11, bubble_roster=True)
    env.reset()
    for _ in range(5):
        env.step(HOLD)
    cash0 = env.trader.cash
    mtm0 = env.last_mtm
    obs, reward, done, info = env.step(BUY)
    qty = env.scenario.rl.order_qty
    # reward = (cash1 + holding*mid1) - mtm0, all integer cents
    assert reward == env.trader.cash + env.trader.holding * info["mid"] - mtm0
    assert env.trader.holding == qty
    spent = cash0 - env.trader.cash
    assert spent > 0                         # bought at ask-side prices


def test_actions_map_to_orders_exactly():
    env = TradingEnv(smoke_config(), seed=13, bubble_roster=True)
    env.reset()
    rl_id = env.trader.id
    plan = [BUY, HOLD, SELL, BUY, HOLD, HOLD, SELL, BUY]
    for a in plan:
        env.step(a)
    log = [o for o in env.market.exchange.order_log if o[1] == rl_id]
    assert len(log) == sum(1 for a in plan if a != HOLD)
    sides = [s for _, _, s, _, _ in log]
    want = [1 if a == BUY else -1 for a in plan if a != HOLD]
    assert sides == want
    assert all(m == 1 for *_, m in log)       # market orders


def test_same_seed_identical_first_observation_and_episode():
    cfg = smoke_config()
    a = TradingEnv(cfg, seed=21, bubble_roster=True)
    b = TradingEnv(cfg, seed=21, bubble_roster=True)
    oa, ob = a.reset(), b.reset()
    assert np.array_equal(oa, ob)
    for _ in range(30):
        ra = a.step(BUY)
        rb = b.step(BUY)
        assert np.array_equal(ra[0], rb[0]) and ra[1] == rb[1]


def test_nonbubble_roster_has_no_herding_agents():
    from bubblesim.agents import HerdingAgent

    env = TradingEnv(smoke_config(), seed=23, bubble_roster=False)
    env.reset()
    assert not any(isinstance(a, HerdingAgent) for a in env.market.kernel.agents)
    env2 = TradingEnv(smoke_config(), seed=23, bubble_roster=True)
    env2.reset()
    assert sum(isinstance(a, HerdingAgent) for a in env2.market.kernel.agents) == \
        smoke_config().roster.herding


def test_observation_scaling_applied():
    cfg = smoke_config()
    env = TradingEnv(cfg, seed=25, bubble_roster=True)
    obs = env.reset()
    raw = env.raw_observation().as_array()
    want = (raw - np.array(cfg.rl.feature_offsets)) / np.array(cfg.rl.feature_scales)
    assert np.allclose(obs, want)


def test_sign_momentum_mode():
    cfg = smoke_config()
    cfg = replace(cfg, rl=replace(cfg.rl, momentum_mode="sign"))
    env = TradingEnv(cfg, seed=27, bubble_roster=True)
    env.reset()
    for _ in range(40):
        env.step(HOLD)
    raw = env.raw_observation()
    for name in FEATURE_NAMES[4:]:
        assert getattr(raw, name) in (-1.0, 0.0, 1.0)
