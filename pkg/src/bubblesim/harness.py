"""Experiment orchestration.

Covers the full pipeline: seed screening (certifying which seeds produce
bubbles without the learner), per-arm PPO training with a controlled bubble
mix, greedy evaluation on held-out bubble seeds, metric aggregation with
Kruskal-Wallis tests, and deterministic CSV emission.  Every output is a pure
function of (config, master seed), so reruns are byte-identical.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from bubblesim.bubbles import BubbleEvent, detect, measure
from bubblesim.env import TradingEnv
from bubblesim.kernel import NS_PER_SEC
from bubblesim.policy import PolicyParams, act, init_params, save_checkpoint
from bubblesim.ppo import UpdateLog, train_policy
from bubblesim.scenario import ScenarioConfig, build_market
from bubblesim.stats import kruskal_wallis

log = logging.getLogger("bubblesim")

FLOAT_FMT = "%.6f"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return FLOAT_FMT % v
    return str(v)


def write_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    """UTF-8, newline-terminated, header row, fixed float formatting."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


# -- single runs -------------------------------------------------------------


@dataclass
class RunOutcome:
    seed: int
    events: list[BubbleEvent]
    mid: np.ndarray
    fundamental: np.ndarray
    trades: int
    herding_after_cutoff: int


def detect_events(cfg: ScenarioConfig, mid: np.ndarray, fund: np.ndarray) -> list[BubbleEvent]:
    d = cfg.detector
    return detect(mid, fund, d.short_window_s, d.long_window_s, d.dev_threshold, d.body_mode)


def run_market_once(cfg: ScenarioConfig, seed: int, include_herding: bool) -> RunOutcome:
    """One learner-free session; returns the detected bubbles and series."""
    market = build_market(cfg, seed, include_herding=include_herding)
    market.run()
    ex = market.exchange
    mid = np.array(ex.series.values(), dtype=np.int64)
    fund = market.oracle.path.values
    herding_ids = set()
    if include_herding:
        from bubblesim.agents import HerdingAgent

        herding_ids = {a.id for a in market.kernel.agents if isinstance(a, HerdingAgent)}
    cutoff_ns = cfg.herding_agent.cutoff_s * NS_PER_SEC
    violations = sum(
        1 for ts, agent, _s, _q, _m in ex.order_log
        if agent in herding_ids and ts >= cutoff_ns
    )
    return RunOutcome(
        seed=seed,
        events=detect_events(cfg, mid, fund),
        mid=mid,
        fundamental=fund,
        trades=len(ex.tape),
        herding_after_cutoff=violations,
    )


def dump_run_series(cfg: ScenarioConfig, seed: int, out_dir: str,
                    include_herding: bool = True) -> RunOutcome:
    """Persist one run's series: fundamental.csv, mid.csv, trades.csv, bubbles.csv."""
    os.makedirs(out_dir, exist_ok=True)
    market = build_market(cfg, seed, include_herding=include_herding)
    market.run()
    ex = market.exchange
    mid = np.array(ex.series.values(), dtype=np.int64)
    fund = market.oracle.path.values
    write_csv(os.path.join(out_dir, "fundamental.csv"), ["time_s", "value_cents"],
              [(s, float(v)) for s, v in enumerate(fund)])
    write_csv(os.path.join(out_dir, "mid.csv"), ["time_s", "mid_cents"],
              [(s, int(v)) for s, v in enumerate(mid)])
    write_csv(os.path.join(out_dir, "trades.csv"),
              ["time_ns", "price_cents", "qty", "buyer", "seller"], ex.tape)
    events = detect_events(cfg, mid, fund)
    write_bubbles_csv(os.path.join(out_dir, "bubbles.csv"),
                      [(0, e) for e in events])
    return RunOutcome(seed=seed, events=events, mid=mid, fundamental=fund,
                      trades=len(ex.tape), herding_after_cutoff=0)


def write_bubbles_csv(path: str, run_events: list[tuple[int, BubbleEvent]]) -> None:
    write_csv(path,
              ["run_id", "start_s", "end_s", "direction", "magnitude_cents", "duration_s"],
              [(rid, e.start_s, e.end_s, e.direction, e.magnitude_cents, e.duration_s)
               for rid, e in run_events])


# -- seed screening -----------------------------------------------------------


@dataclass
class SeedPools:
    bubble_train: list[int]
    nonbubble_train: list[int]
    bubble_test: list[int]
    config_hash: str

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({
                "config_hash": self.config_hash,
                "bubble_train": self.bubble_train,
                "nonbubble_train": self.nonbubble_train,
                "bubble_test": self.bubble_test,
            }, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path: str) -> "SeedPools":
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
        return SeedPools(d["bubble_train"], d["nonbubble_train"], d["bubble_test"],
                         d["config_hash"])

    def assert_disjoint(self) -> None:
        train = set(self.bubble_train) | set(self.nonbubble_train)
        if train & set(self.bubble_test):
            raise ValueError("training and test seed pools overlap")


# candidate seed ranges; keeps the three pools disjoint by construction
_TRAIN_BUBBLE_BASE = 10_000
_TRAIN_NONBUBBLE_BASE = 5_000_000
_TEST_BUBBLE_BASE = 9_000_000


def _screen(cfg, base: int, n_candidates: int, target: int, include_herding: bool,
            want_bubble: bool, pool: ProcessPoolExecutor | None,
            workers: int = 1) -> tuple[list[int], int]:
    """Run candidates until `target` seeds qualify; returns (pool, n_tried)."""
    seeds = [base + i for i in range(n_candidates)]
    kept: list[int] = []
    tried = 0

    def qualifies(outcome: RunOutcome) -> bool:
        has = len(outcome.events) > 0
        return has if want_bubble else not has

    if pool is None:
        for seed in seeds:
            tried += 1
            if qualifies(run_market_once(cfg, seed, include_herding)):
                kept.append(seed)
                if len(kept) >= target:
                    break
    else:
        chunk = max(2 * workers, 8)
        i = 0
        while i < len(seeds) and len(kept) < target:
            batch = seeds[i:i + chunk]
            i += chunk
            tried += len(batch)
            outcomes = pool.map(_screen_job, [(cfg.to_dict(), s, include_herding) for s in batch])
            for seed, ok in zip(batch, (qualifies(o) for o in outcomes)):
                if ok and len(kept) < target:
                    kept.append(seed)
    return kept, tried


def _screen_job(args) -> RunOutcome:
    from bubblesim.scenario import config_from_dict

    cfg_dict, seed, include_herding = args
    return run_market_once(config_from_dict(cfg_dict), seed, include_herding)


def screen_seeds(cfg: ScenarioConfig, n_candidates: int | None = None,
                 workers: int = 1) -> SeedPools:
    """Certify seed pools: bubble-train and bubble-test pools replay to >= 1
    detected bubble on the full roster, the non-bubble pool replays to zero
    bubbles on the herding-free roster.  Partial pools log a warning."""
    exp = cfg.experiment
    n_cand = n_candidates if n_candidates is not None else exp.screen_candidates
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        bubble_train, tried_b = _screen(cfg, _TRAIN_BUBBLE_BASE, n_cand,
                                        exp.bubble_pool_size, True, True, pool, workers)
        nonbubble_train, tried_n = _screen(cfg, _TRAIN_NONBUBBLE_BASE, n_cand,
                                           exp.nonbubble_pool_size, False, False, pool, workers)
        bubble_test, tried_t = _screen(cfg, _TEST_BUBBLE_BASE, n_cand,
                                       exp.test_pool_size, True, True, pool, workers)
    finally:
        if pool is not None:
            pool.shutdown()
    for name, got, want in (("bubble_train", bubble_train, exp.bubble_pool_size),
                            ("nonbubble_train", nonbubble_train, exp.nonbubble_pool_size),
                            ("bubble_test", bubble_test, exp.test_pool_size)):
        if len(got) < want:
            log.warning("screening yield below target for %s: %d/%d", name, len(got), want)
    log.info("screening tried %d/%d/%d candidates", tried_b, tried_n, tried_t)
    pools = SeedPools(bubble_train, nonbubble_train, bubble_test, cfg.screening_hash())
    pools.assert_disjoint()
    return pools


# -- training -----------------------------------------------------------------


class SeedCycler:
    """Deterministic sampler over a seed pool; reshuffles when exhausted."""

    def __init__(self, seeds: list[int], rng: np.random.Generator) -> None:
        if not seeds:
            raise ValueError("empty seed pool")
        self._seeds = list(seeds)
        self._rng = rng
        self._order: list[int] = []
        self.reshuffles = -1
        self._refill()

    def _refill(self) -> None:
        self._order = list(self._rng.permutation(self._seeds))
        self.reshuffles += 1
        if self.reshuffles > 0:
            log.info("seed pool exhausted; reshuffling (pass %d)", self.reshuffles + 1)

    def next(self) -> int:
        if not self._order:
            self._refill()
        return int(self._order.pop())


def _arm_seed(master_seed: int, arm_pct: int) -> int:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(0x7EA1, arm_pct))
    return int(ss.generate_state(1, dtype=np.uint64)[0] & 0x7FFFFFFF)


def train_arm(cfg: ScenarioConfig, mix_pct: int, pools: SeedPools, master_seed: int,
              update_log: list[UpdateLog] | None = None) -> PolicyParams:
    """Train one policy with mix_pct percent bubble-scenario episodes."""
    if mix_pct not in (0, 25, 50, 75, 100):
        raise ValueError(f"bubble mix must be one of 0/25/50/75/100, got {mix_pct}")
    seed = _arm_seed(master_seed, mix_pct)
    ppo_cfg = cfg.ppo
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(
        entropy=seed, spawn_key=(0x5C,))))
    n_episodes = ppo_cfg.episodes
    is_bubble = rng.random(n_episodes) < (mix_pct / 100.0)
    bubble_pool = SeedCycler(pools.bubble_train, np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(0xB0B,)))))
    nonbubble_pool = SeedCycler(pools.nonbubble_train, np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(0x40B,)))))
    episode_seeds = [bubble_pool.next() if b else nonbubble_pool.next() for b in is_bubble]

    def env_factory(k: int) -> TradingEnv:
        return TradingEnv(cfg, seed=episode_seeds[k], bubble_roster=bool(is_bubble[k]))

    params = init_params(np.random.Generator(np.random.Philox(np.random.SeedSequence(
        entropy=seed, spawn_key=(0x11,)))), hidden=ppo_cfg.hidden)
    return train_policy(env_factory, n_episodes, ppo_cfg.episodes_per_update,
                        params, ppo_cfg, seed, update_log)


def write_train_log(path: str, rows: list[UpdateLog]) -> None:
    write_csv(path,
              ["update_id", "episodes", "mean_reward", "loss", "policy_loss",
               "value_loss", "entropy", "clip_frac", "skipped"],
              [(r.update_id, r.episodes, r.mean_reward, r.loss, r.policy_loss,
                r.value_loss, r.entropy, r.clip_frac, int(r.skipped)) for r in rows])


# -- evaluation ----------------------------------------------------------------


@dataclass
class MetricsRecord:
    run_id: int
    seed: int
    arm_pct: int
    profit_pct: float
    bubble_count: int
    avg_magnitude_cents: float | None
    avg_duration_s: float | None

    def row(self) -> tuple:
        return (self.run_id, self.seed, self.arm_pct, self.profit_pct,
                self.bubble_count, self.avg_magnitude_cents, self.avg_duration_s)


METRICS_HEADER = ["run_id", "seed", "arm_pct", "profit_pct", "bubble_count",
                  "avg_magnitude_cents", "avg_duration_s"]


def evaluate_policy(cfg: ScenarioConfig, params: PolicyParams, test_seeds: list[int],
                    n_runs: int, arm_pct: int, run_id_start: int = 0,
                    episode_rows: list[tuple] | None = None) -> list[MetricsRecord]:
    """Greedy-policy evaluation on the held-out bubble pool.

    Each run checks reward telescoping exactly (sum of rewards == final MtM -
    initial MtM in integer cents) and yields exactly one MetricsRecord.
    """
    records = []
    for k in range(n_runs):
        seed = test_seeds[k % len(test_seeds)]
        env = TradingEnv(cfg, seed=seed, bubble_roster=True)
        obs = env.reset()
        done = False
        total = 0
        while not done:
            a, _, _ = act(params, obs, greedy=True)
            obs, reward, done, _info = env.step(a)
            total += reward
        if total != env.final_mtm() - env.initial_mtm:
            raise AssertionError(
                f"reward telescoping violated on seed {seed}: "
                f"{total} != {env.final_mtm() - env.initial_mtm}"
            )
        mid, fund = env.series_arrays()
        metrics = measure(detect_events(cfg, mid, fund))
        run_id = run_id_start + k
        records.append(MetricsRecord(
            run_id=run_id,
            seed=seed,
            arm_pct=arm_pct,
            profit_pct=env.profit_pct(),
            bubble_count=metrics.count,
            avg_magnitude_cents=metrics.avg_magnitude_cents,
            avg_duration_s=metrics.avg_duration_s,
        ))
        if episode_rows is not None:
            episode_rows.extend((run_id, t, a, r, h, m) for t, a, r, h, m in env.episode_rows)
    return records


# -- the experiment -------------------------------------------------------------


def run_experiment(cfg: ScenarioConfig, out_dir: str, master_seed: int,
                   arms: tuple[int, ...] | None = None, n_test: int | None = None,
                   workers: int = 1, pools: SeedPools | None = None) -> str:
    """Train one policy per arm, evaluate all on the same held-out pool, and
    write metrics.csv, train logs, checkpoints and the summary report."""
    os.makedirs(out_dir, exist_ok=True)
    arms = tuple(arms if arms is not None else cfg.experiment.arms)
    n_test = n_test if n_test is not None else cfg.experiment.n_test

    if pools is None:
        pools_path = os.path.join(out_dir, "pools.json")
        if os.path.exists(pools_path):
            pools = SeedPools.load(pools_path)
            if pools.config_hash != cfg.screening_hash():
                raise ValueError("pools.json was screened under a different config")
        else:
            log.info("screening seed pools")
            pools = screen_seeds(cfg, workers=workers)
            pools.save(pools_path)
    pools.assert_disjoint()

    all_records: list[MetricsRecord] = []
    episode_rows: list[tuple] = []
    failures: list[str] = []
    for i, arm in enumerate(arms):
        log.info("training arm %d%%", arm)
        update_log: list[UpdateLog] = []
        try:
            params = train_arm(cfg, arm, pools, master_seed, update_log)
        except Exception as exc:  # noqa: BLE001 - partial report per contract
            log.error("arm %d%% failed to train: %s", arm, exc)
            failures.append(f"arm {arm}: {exc}")
            continue
        write_train_log(os.path.join(out_dir, f"train_log_{arm}.csv"), update_log)
        save_checkpoint(os.path.join(out_dir, f"policy_{arm}.npz"), params, {
            "arm_pct": arm,
            "master_seed": master_seed,
            "config_hash": cfg.config_hash(),
            "episodes": cfg.ppo.episodes,
        })
        log.info("evaluating arm %d%%", arm)
        records = evaluate_policy(cfg, params, pools.bubble_test, n_test, arm,
                                  run_id_start=i * n_test, episode_rows=episode_rows)
        all_records.extend(records)

    all_records.sort(key=lambda r: r.run_id)
    write_csv(os.path.join(out_dir, "metrics.csv"), METRICS_HEADER,
              [r.row() for r in all_records])
    write_csv(os.path.join(out_dir, "episodes.csv"),
              ["run_id", "t_s", "action", "reward_cents", "holding", "mid_cents"],
              episode_rows)
    if failures:
        with open(os.path.join(out_dir, "failures.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(failures) + "\n")
    report(os.path.join(out_dir, "metrics.csv"), out_dir)
    return os.path.join(out_dir, "metrics.csv")


# -- reporting -------------------------------------------------------------------


def _parse_metrics(path: str) -> list[MetricsRecord]:
    header, rows = read_csv(path)
    if header != METRICS_HEADER:
        raise ValueError(f"unexpected metrics.csv header: {header}")
    out = []
    for r in rows:
        out.append(MetricsRecord(
            run_id=int(r[0]), seed=int(r[1]), arm_pct=int(r[2]),
            profit_pct=float(r[3]), bubble_count=int(r[4]),
            avg_magnitude_cents=float(r[5]) if r[5] else None,
            avg_duration_s=float(r[6]) if r[6] else None,
        ))
    return out


def _hist_rows(arm: int, name: str, values: np.ndarray, edges: np.ndarray):
    counts, _ = np.histogram(values, bins=edges)
    return [(name, arm, float(edges[i]), float(edges[i + 1]), int(c))
            for i, c in enumerate(counts)]


def report(metrics_path: str, out_dir: str) -> dict:
    """Summary statistics, Kruskal-Wallis table and histogram tables.

    Bubble count uses every run; magnitude and duration use runs that
    contain at least one bubble.  Returns the summary as a dict as well.
    """
    records = _parse_metrics(metrics_path)
    if not records:
        raise ValueError("metrics.csv is empty")
    os.makedirs(out_dir, exist_ok=True)
    arms = sorted({r.arm_pct for r in records})
    by_arm = {a: [r for r in records if r.arm_pct == a] for a in arms}

    summary_rows = []
    for a in arms:
        rs = by_arm[a]
        profit = np.array([r.profit_pct for r in rs])
        count = np.array([r.bubble_count for r in rs], dtype=float)
        mags = np.array([r.avg_magnitude_cents for r in rs if r.avg_magnitude_cents is not None])
        durs = np.array([r.avg_duration_s for r in rs if r.avg_duration_s is not None])
        no_bubble = float(np.mean([r.bubble_count == 0 for r in rs]))
        summary_rows.append((
            a, len(rs),
            float(profit.mean()), float(profit.std()),
            float(count.mean()), float(count.std()),
            float(mags.mean()) if len(mags) else None,
            float(mags.std()) if len(mags) else None,
            float(durs.mean()) if len(durs) else None,
            float(durs.std()) if len(durs) else None,
            no_bubble,
        ))
    write_csv(os.path.join(out_dir, "summary.csv"),
              ["arm_pct", "n_runs", "profit_mean", "profit_std", "count_mean", "count_std",
               "magnitude_mean_cents", "magnitude_std_cents", "duration_mean_s",
               "duration_std_s", "no_bubble_fraction"],
              summary_rows)

    kw_rows = []
    kw_results = {}
    if len(arms) >= 2:
        groups_count = [np.array([float(r.bubble_count) for r in by_arm[a]]) for a in arms]
        metric_groups = {"bubble_count": groups_count}
        mg = [np.array([r.avg_magnitude_cents for r in by_arm[a]
                        if r.avg_magnitude_cents is not None]) for a in arms]
        dg = [np.array([r.avg_duration_s for r in by_arm[a]
                        if r.avg_duration_s is not None]) for a in arms]
        if all(len(g) for g in mg):
            metric_groups["magnitude"] = mg
        if all(len(g) for g in dg):
            metric_groups["duration"] = dg
        pr = [np.array([r.profit_pct for r in by_arm[a]]) for a in arms]
        metric_groups["profit"] = pr
        for name, groups in metric_groups.items():
            h, p = kruskal_wallis(groups)
            kw_rows.append((name, h, p))
            kw_results[name] = (h, p)
    write_csv(os.path.join(out_dir, "kruskal_wallis.csv"), ["metric", "H", "p"], kw_rows)

    hist_rows = []
    profit_all = np.array([r.profit_pct for r in records])
    edges = np.linspace(profit_all.min(), profit_all.max() + 1e-9, 21)
    for a in arms:
        hist_rows += _hist_rows(a, "profit", np.array([r.profit_pct for r in by_arm[a]]), edges)
    count_all = np.array([r.bubble_count for r in records], dtype=float)
    cedges = np.arange(0, count_all.max() + 2) - 0.5
    for a in arms:
        hist_rows += _hist_rows(a, "bubble_count",
                                np.array([float(r.bubble_count) for r in by_arm[a]]), cedges)
    write_csv(os.path.join(out_dir, "histograms.csv"),
              ["metric", "arm_pct", "bin_lo", "bin_hi", "count"], hist_rows)

    return {
        "arms": arms,
        "summary": summary_rows,
        "kruskal_wallis": kw_results,
    }
