"""Scenario configuration: versioned, strictly validated, and the single
source of truth for assembling a market run.

Configs are plain YAML mapping onto frozen dataclasses; unknown keys are
rejected so experiment arms cannot silently drift apart.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields

import yaml

from bubblesim.agents import (
    HerdingAgent,
    MarketMakerAgent,
    MomentumAgent,
    NoiseAgent,
    ValueAgent,
)
from bubblesim.exchange import ExchangeAgent
from bubblesim.fundamental import FundamentalOracle, OUParams, generate_path
from bubblesim.kernel import Kernel, NS_PER_SEC

CONFIG_VERSION = 1

# stream key prefixes: one namespace per role, fundamental first
STREAM_FUNDAMENTAL = 0
STREAM_VALUE = 1
STREAM_NOISE = 2
STREAM_MOMENTUM = 3
STREAM_HERDING = 4
STREAM_MM = 5
STREAM_RL = 6
STREAM_TRAIN = 7


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MarketCfg:
    horizon_s: int = 23_400
    latency_ns: int = 1_000


@dataclass(frozen=True)
class FundamentalCfg:
    mu_cents: float = 100_000.0
    kappa_per_s: float = 1.67e-5
    sigma_cents: float = 2.6          # daily wander ~1% of mu
    r0_cents: float = 100_000.0
    dt_s: float = 1.0
    obs_var_cents2: float = 1000.0    # observation noise variance


@dataclass(frozen=True)
class RosterCfg:
    value: int = 50
    noise: int = 500
    momentum: int = 8
    herding: int = 5
    market_maker: int = 1


@dataclass(frozen=True)
class ValueCfg:
    band: float = 0.002
    qty: int = 100
    wake_s: float = 60.0
    wake_jitter_s: float = 30.0


@dataclass(frozen=True)
class NoiseCfg:
    qty_min: int = 10
    qty_max: int = 50
    wakes_per_day: float = 6.0


@dataclass(frozen=True)
class MomentumCfg:
    qty: int = 100
    wake_s: float = 30.0
    short_window_s: int = 300
    long_window_s: int = 1800
    aggression_cents: int = 25


@dataclass(frozen=True)
class HerdingCfg:
    qty: int = 100
    wake_s: float = 5.0
    cutoff_s: int = 12_000


@dataclass(frozen=True)
class MarketMakerCfg:
    half_spread_cents: int = 25
    qty: int = 275                  # per ladder level, per side
    wake_s: float = 10.0
    levels: int = 8
    level_step_cents: int = 25


@dataclass(frozen=True)
class DetectorCfg:
    short_window_s: int = 300
    long_window_s: int = 1800
    dev_threshold: float = 0.02
    body_mode: str = "any"            # "any" | "mean"


@dataclass(frozen=True)
class RLCfg:
    order_qty: int = 500
    starting_cash_cents: int = 10_000_000
    decision_period_s: int = 60
    short_window_min: int = 5
    momentum_windows_min: tuple[int, ...] = (30, 60, 90, 120, 180)
    volatility_window_s: int = 1800
    momentum_mode: str = "ratio"      # "ratio" | "sign"
    # affine feature scaling calibrated on a pilot batch of bubble and
    # non-bubble runs (keeps tanh inputs in a usable range)
    feature_offsets: tuple[float, ...] = (0.0, 0.0, 0.0, 100_000.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    feature_scales: tuple[float, ...] = (5000.0, 1000.0, 1500.0, 3000.0, 0.05, 0.05, 0.05, 0.05, 0.05)


@dataclass(frozen=True)
class PPOCfg:
    clip: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 4
    minibatch: int = 256
    lr: float = 1e-3
    entropy_coef: float = 0.01
    vf_coef: float = 0.5
    adv_norm: bool = True
    reward_scale: float = 2e-5
    episodes: int = 400
    episodes_per_update: int = 8
    hidden: int = 64


@dataclass(frozen=True)
class ExperimentCfg:
    arms: tuple[int, ...] = (0, 25, 50, 75, 100)
    n_test: int = 100
    screen_candidates: int = 600
    bubble_pool_size: int = 200
    nonbubble_pool_size: int = 200
    test_pool_size: int = 100
    workers: int = 1


_BLOCKS = {
    "market": MarketCfg,
    "fundamental": FundamentalCfg,
    "roster": RosterCfg,
    "value_agent": ValueCfg,
    "noise_agent": NoiseCfg,
    "momentum_agent": MomentumCfg,
    "herding_agent": HerdingCfg,
    "market_maker": MarketMakerCfg,
    "detector": DetectorCfg,
    "rl": RLCfg,
    "ppo": PPOCfg,
    "experiment": ExperimentCfg,
}


@dataclass(frozen=True)
class ScenarioConfig:
    version: int = CONFIG_VERSION
    market: MarketCfg = field(default_factory=MarketCfg)
    fundamental: FundamentalCfg = field(default_factory=FundamentalCfg)
    roster: RosterCfg = field(default_factory=RosterCfg)
    value_agent: ValueCfg = field(default_factory=ValueCfg)
    noise_agent: NoiseCfg = field(default_factory=NoiseCfg)
    momentum_agent: MomentumCfg = field(default_factory=MomentumCfg)
    herding_agent: HerdingCfg = field(default_factory=HerdingCfg)
    market_maker: MarketMakerCfg = field(default_factory=MarketMakerCfg)
    detector: DetectorCfg = field(default_factory=DetectorCfg)
    rl: RLCfg = field(default_factory=RLCfg)
    ppo: PPOCfg = field(default_factory=PPOCfg)
    experiment: ExperimentCfg = field(default_factory=ExperimentCfg)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def screening_hash(self) -> str:
        """Hash of the blocks that determine learner-free market dynamics;
        seed pools stay valid across RL/PPO/experiment setting changes."""
        blocks = ("market", "fundamental", "roster", "value_agent", "noise_agent",
                  "momentum_agent", "herding_agent", "market_maker", "detector")
        canon = json.dumps({b: asdict(getattr(self, b)) for b in blocks}, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def ou_params(self) -> OUParams:
        f = self.fundamental
        return OUParams(mu=f.mu_cents, kappa=f.kappa_per_s, sigma=f.sigma_cents,
                        r0=f.r0_cents, dt_s=f.dt_s)


def _build_block(cls, data: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in '{where}': {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name in data:
            v = data[f.name]
            if isinstance(v, list):
                v = tuple(v)
            kwargs[f.name] = v
    return cls(**kwargs)


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    version = data.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version} (expected {CONFIG_VERSION})")
    unknown = set(data) - set(_BLOCKS) - {"version"}
    if unknown:
        raise ConfigError(f"unknown top-level section(s): {sorted(unknown)}")
    blocks = {}
    for name, cls in _BLOCKS.items():
        section = data.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"section '{name}' must be a mapping")
        blocks[name] = _build_block(cls, section, name)
    return ScenarioConfig(version=CONFIG_VERSION, **blocks)


def load_config(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data or {})


def save_config(cfg: ScenarioConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)


def default_config() -> ScenarioConfig:
    return ScenarioConfig()


def smoke_config() -> ScenarioConfig:
    """Small, fast configuration for end-to-end checks: a 12,000 s session
    with a reduced roster that still ignites bubbles on roughly half the
    seeds and stays bubble-free without herding agents."""
    return ScenarioConfig(
        market=MarketCfg(horizon_s=12_000),
        fundamental=FundamentalCfg(sigma_cents=2.6),
        roster=RosterCfg(value=25, noise=100, momentum=4, herding=3, market_maker=1),
        value_agent=ValueCfg(wake_s=120.0, wake_jitter_s=60.0),
        herding_agent=HerdingCfg(qty=100, wake_s=5.0, cutoff_s=7000),
        market_maker=MarketMakerCfg(qty=150),
        ppo=PPOCfg(episodes=4, episodes_per_update=2, minibatch=64),
        experiment=ExperimentCfg(
            arms=(0, 100), n_test=3, screen_candidates=24,
            bubble_pool_size=4, nonbubble_pool_size=4, test_pool_size=3,
        ),
    )


# -- market assembly --------------------------------------------------------


@dataclass
class Market:
    kernel: Kernel
    exchange: ExchangeAgent
    oracle: FundamentalOracle
    herding_count: int

    def run(self):
        stats = self.kernel.run()
        self.exchange.finalize()
        return stats


def build_market(cfg: ScenarioConfig, master_seed: int, include_herding: bool = True,
                 trace: bool = False) -> Market:
    """Assemble kernel, exchange, fundamental and background roster for one run."""
    m = cfg.market
    kernel = Kernel(master_seed, horizon_ns=m.horizon_s * NS_PER_SEC,
                    latency_ns=m.latency_ns, trace=trace)
    path = generate_path(cfg.ou_params(), kernel.stream(STREAM_FUNDAMENTAL), m.horizon_s)
    oracle = FundamentalOracle(path, math.sqrt(cfg.fundamental.obs_var_cents2))

    exchange = ExchangeAgent(m.horizon_s, int(cfg.fundamental.mu_cents))
    ex_id = kernel.register(exchange)

    r = cfg.roster
    v = cfg.value_agent
    for i in range(r.value):
        kernel.register(ValueAgent(ex_id, kernel.stream(STREAM_VALUE, i), oracle,
                                   v.band, v.qty, v.wake_s, v.wake_jitter_s))
    n = cfg.noise_agent
    for i in range(r.noise):
        kernel.register(NoiseAgent(ex_id, kernel.stream(STREAM_NOISE, i),
                                   n.qty_min, n.qty_max, n.wakes_per_day, m.horizon_s))
    mo = cfg.momentum_agent
    for i in range(r.momentum):
        kernel.register(MomentumAgent(ex_id, kernel.stream(STREAM_MOMENTUM, i), mo.qty,
                                      mo.wake_s, mo.short_window_s, mo.long_window_s,
                                      mo.aggression_cents))
    herding_count = r.herding if include_herding else 0
    h = cfg.herding_agent
    for i in range(herding_count):
        kernel.register(HerdingAgent(ex_id, kernel.stream(STREAM_HERDING, i), h.qty,
                                     h.wake_s, mo.short_window_s, mo.long_window_s, h.cutoff_s))
    mm = cfg.market_maker
    for i in range(r.market_maker):
        kernel.register(MarketMakerAgent(ex_id, kernel.stream(STREAM_MM, i),
                                         mm.half_spread_cents, mm.qty, mm.wake_s,
                                         mm.levels, mm.level_step_cents))
    return Market(kernel=kernel, exchange=exchange, oracle=oracle, herding_count=herding_count)
