"""Command-line interface.

Subcommands: screen, train, eval, detect, experiment, report.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np


def _load_cfg(path: str | None):
    from bubblesim.scenario import default_config, load_config

    return load_config(path) if path else default_config()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario config YAML (defaults used if omitted)")
    p.add_argument("--seed", type=int, default=1, help="master seed")


def cmd_screen(args) -> int:
    from bubblesim.harness import screen_seeds

    cfg = _load_cfg(args.config)
    pools = screen_seeds(cfg, n_candidates=args.candidates, workers=args.workers)
    pools.save(args.out)
    print(f"pools: bubble_train={len(pools.bubble_train)} "
          f"nonbubble_train={len(pools.nonbubble_train)} "
          f"bubble_test={len(pools.bubble_test)} -> {args.out}")
    return 0


def cmd_train(args) -> int:
    from bubblesim.harness import SeedPools, train_arm, write_train_log
    from bubblesim.policy import save_checkpoint

    cfg = _load_cfg(args.config)
    pools = SeedPools.load(args.pools)
    update_log = []
    params = train_arm(cfg, args.mix, pools, args.seed, update_log)
    save_checkpoint(args.out, params, {
        "arm_pct": args.mix,
        "master_seed": args.seed,
        "config_hash": cfg.config_hash(),
        "episodes": cfg.ppo.episodes,
    })
    if args.train_log:
        write_train_log(args.train_log, update_log)
    print(f"trained mix={args.mix}% over {cfg.ppo.episodes} episodes -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    from bubblesim.harness import METRICS_HEADER, SeedPools, evaluate_policy, write_csv
    from bubblesim.policy import load_checkpoint

    cfg = _load_cfg(args.config)
    params, meta = load_checkpoint(args.ckpt)
    pools = SeedPools.load(args.pools)
    episode_rows: list[tuple] = []
    records = evaluate_policy(cfg, params, pools.bubble_test, args.n,
                              int(meta.get("arm_pct", -1)), episode_rows=episode_rows)
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "metrics.csv"), METRICS_HEADER,
              [r.row() for r in records])
    write_csv(os.path.join(args.out, "episodes.csv"),
              ["run_id", "t_s", "action", "reward_cents", "holding", "mid_cents"],
              episode_rows)
    if args.attribution:
        _write_attribution(cfg, params, pools, args)
    profits = [r.profit_pct for r in records]
    print(f"evaluated {len(records)} runs; mean profit {np.mean(profits):+.4f}")
    return 0


def _write_attribution(cfg, params, pools, args) -> None:
    from bubblesim.env import FEATURE_NAMES, TradingEnv
    from bubblesim.harness import write_csv
    from bubblesim.policy import act
    from bubblesim.shapley import episode_attribution

    env = TradingEnv(cfg, seed=pools.bubble_test[0], bubble_roster=True)
    obs = env.reset()
    times, observations = [], []
    done = False
    while not done:
        times.append(env.market.kernel.now // 1_000_000_000)
        observations.append(obs)
        a, _, _ = act(params, obs, greedy=True)
        obs, _, done, _ = env.step(a)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
    records = episode_attribution(params, times, np.array(observations),
                                  args.attr_perms, rng)
    header = (["run_id", "t_s"] + [f"f_{n}" for n in FEATURE_NAMES]
              + [f"shap_{n}" for n in FEATURE_NAMES] + ["model_output"])
    rows = [
        (0, r.t_s, *[float(v) for v in r.feature_values],
         *[float(v) for v in r.shapley], r.model_output)
        for r in records
    ]
    write_csv(os.path.join(args.out, "attribution.csv"), header, rows)


def cmd_detect(args) -> int:
    from bubblesim.bubbles import detect
    from bubblesim.harness import read_csv, write_bubbles_csv

    cfg = _load_cfg(args.config)
    _, mid_rows = read_csv(args.mid)
    _, fund_rows = read_csv(args.fundamental)
    mid = np.array([int(r[1]) for r in mid_rows], dtype=np.int64)
    fund = np.array([float(r[1]) for r in fund_rows])
    d = cfg.detector
    events = detect(mid, fund, d.short_window_s, d.long_window_s,
                    d.dev_threshold, d.body_mode)
    write_bubbles_csv(args.out, [(args.run_id, e) for e in events])
    print(f"{len(events)} bubble(s) -> {args.out}")
    return 0


def cmd_experiment(args) -> int:
    from bubblesim.harness import SeedPools, run_experiment

    cfg = _load_cfg(args.config)
    arms = tuple(int(a) for a in args.arms.split(",")) if args.arms else None
    pools = SeedPools.load(args.pools) if args.pools else None
    path = run_experiment(cfg, args.out, args.seed, arms=arms, n_test=args.n_test,
                          workers=args.workers, pools=pools)
    print(f"experiment complete -> {path}")
    return 0


def cmd_report(args) -> int:
    from bubblesim.harness import report

    summary = report(args.metrics, args.out)
    for row in summary["summary"]:
        print(f"arm {row[0]:>3}%: n={row[1]} profit {row[2]:+.4f}+-{row[3]:.4f} "
              f"count {row[4]:.2f} no-bubble {row[10]:.0%}")
    for metric, (h, p) in summary["kruskal_wallis"].items():
        print(f"KW {metric}: H={h:.3f} p={p:.2e}")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    parser = argparse.ArgumentParser(prog="bubblesim",
                                     description="LOB market simulator with bubbles and learning traders")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("screen", help="certify bubble / non-bubble seed pools")
    _add_common(p)
    p.add_argument("--out", default="pools.json")
    p.add_argument("--candidates", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_screen)

    p = sub.add_parser("train", help="train one policy at a bubble mix")
    _add_common(p)
    p.add_argument("--mix", type=int, required=True, choices=[0, 25, 50, 75, 100])
    p.add_argument("--pools", required=True)
    p.add_argument("--out", default="policy.npz")
    p.add_argument("--train-log")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test pool")
    _add_common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--pools", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--out", default="eval_out")
    p.add_argument("--attribution", action="store_true",
                   help="also write attribution.csv for one test episode")
    p.add_argument("--attr-perms", type=int, default=200)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("detect", help="detect bubbles in mid/fundamental CSV series")
    p.add_argument("--config")
    p.add_argument("--mid", required=True)
    p.add_argument("--fundamental", required=True)
    p.add_argument("--out", default="bubbles.csv")
    p.add_argument("--run-id", type=int, default=0)
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("experiment", help="run the multi-arm train/test experiment")
    _add_common(p)
    p.add_argument("--out", default="experiment_out")
    p.add_argument("--arms", help="comma-separated bubble mixes, e.g. 0,50,100")
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--pools", help="reuse an existing pools.json")
    p.set_defaults(fn=cmd_experiment)

    p = sub.add_parser("report", help="summarize a metrics.csv")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out", default="report_out")
    p.set_defaults(fn=cmd_report)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
