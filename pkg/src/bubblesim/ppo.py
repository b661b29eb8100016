"""Proximal policy optimization on the numpy MLP.

The update maximizes the clipped surrogate objective with a value-function
loss and an entropy bonus:

    L = -E[min(r * A, clip(r, 1-eps, 1+eps) * A)]
        + vf_coef * 0.5 * E[(V - R)^2] - entropy_coef * E[H(pi)]

Advantages come from generalized advantage estimation over complete
episodes.  Gradients are backpropagated by hand through the shared trunk;
test coverage checks them against central finite differences.  Everything is
driven by explicit Generator streams so a training run replays exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bubblesim.policy import PolicyParams, forward, log_softmax


@dataclass
class Rollout:
    """One complete episode of transitions in time order."""

    obs: np.ndarray          # (n, features)
    actions: np.ndarray      # (n,) int
    rewards: np.ndarray      # (n,) float, already scaled for the learner
    log_probs: np.ndarray    # (n,) behavior log-probs
    values: np.ndarray       # (n,) critic estimates at collection time


@dataclass
class RolloutBatch:
    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


def gae(rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation over one complete episode.

    The episode is treated as terminal: the value beyond the last step is 0.
    Returns (advantages, returns) with returns = advantages + values.
    """
    n = len(rewards)
    adv = np.empty(n, dtype=np.float64)
    running = 0.0
    next_value = 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * lam * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


def build_batch(rollouts: list[Rollout], gamma: float, lam: float,
                normalize_adv: bool) -> RolloutBatch:
    """Merge episodes (in the given deterministic order) into one update batch."""
    advs, rets = [], []
    for r in rollouts:
        a, g = gae(r.rewards, r.values, gamma, lam)
        advs.append(a)
        rets.append(g)
    adv = np.concatenate(advs)
    if normalize_adv:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return RolloutBatch(
        obs=np.concatenate([r.obs for r in rollouts]),
        actions=np.concatenate([r.actions for r in rollouts]),
        log_probs=np.concatenate([r.log_probs for r in rollouts]),
        advantages=adv,
        returns=np.concatenate(rets),
    )


def ppo_loss_and_grads(params: PolicyParams, obs, actions, old_log_probs, advantages,
                       returns, clip: float, vf_coef: float, entropy_coef: float):
    """Loss, gradients and diagnostics for one minibatch.

    Gradient derivation: with p = softmax(logits), d log p_a / d logits =
    onehot(a) - p; the clipped surrogate passes gradient only where the
    unclipped term is active; d H / d logits = -p * (log p + H).
    """
    n = len(obs)
    logits, values, (x, h1, h2) = forward(params, obs)
    logp_all = log_softmax(logits)
    p = np.exp(logp_all)
    idx = np.arange(n)
    logp = logp_all[idx, actions]

    ratio = np.exp(logp - old_log_probs)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages
    surrogate = np.minimum(unclipped, clipped)
    active = unclipped <= clipped        # gradient flows only through min() winner
    policy_loss = -surrogate.mean()

    v_err = values - returns
    value_loss = 0.5 * (v_err ** 2).mean()

    entropy = -(p * logp_all).sum(axis=1)
    loss = policy_loss + vf_coef * value_loss - entropy_coef * entropy.mean()

    # d loss / d logp_taken, then spread onto logits via (onehot - p)
    g_logp = np.where(active, -(ratio * advantages) / n, 0.0)
    g_logits = p * (-g_logp)[:, None]
    g_logits[idx, actions] += g_logp
    # entropy bonus: d(-c * H)/d logits = c * p * (logp + H)
    g_logits += entropy_coef / n * p * (logp_all + entropy[:, None])

    g_values = vf_coef * v_err / n

    # backprop through heads and trunk
    g_wp = h2.T @ g_logits
    g_bp = g_logits.sum(axis=0)
    g_wv = h2.T @ g_values[:, None]
    g_bv = np.array([g_values.sum()])
    g_h2 = g_logits @ params.wp.T + g_values[:, None] @ params.wv.T
    g_pre2 = g_h2 * (1.0 - h2 * h2)
    g_w2 = h1.T @ g_pre2
    g_b2 = g_pre2.sum(axis=0)
    g_h1 = g_pre2 @ params.w2.T
    g_pre1 = g_h1 * (1.0 - h1 * h1)
    g_w1 = x.T @ g_pre1
    g_b1 = g_pre1.sum(axis=0)

    grads = [g_w1, g_b1, g_w2, g_b2, g_wp, g_bp, g_wv, g_bv]
    diag = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy.mean()),
        "clip_frac": float((~active).mean()),
    }
    return loss, grads, diag


class Adam:
    """Standard Adam with bias correction, matched to the params layout."""

    def __init__(self, params: PolicyParams, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]

    def step(self, params: PolicyParams, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correction = self.lr * np.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        for target, m, v, g in zip(params.arrays(), self.m, self.v, grads):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            target -= correction * m / (np.sqrt(v) + self.eps)


@dataclass
class UpdateLog:
    update_id: int
    episodes: int
    mean_reward: float       # mean per-episode scaled reward sum in the batch
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_frac: float
    skipped: bool = False


def ppo_update(params: PolicyParams, batch: RolloutBatch, adam: Adam,
               rng: np.random.Generator, clip: float, epochs: int, minibatch: int,
               vf_coef: float, entropy_coef: float) -> dict:
    """Run the clipped-surrogate update in place.

    A non-finite loss aborts the update without touching the parameters and
    is reported in the returned diagnostics.
    """
    n = len(batch.obs)
    last_diag: dict = {}
    backup = params.copy()
    adam_state = (adam.t, [m.copy() for m in adam.m], [v.copy() for v in adam.v])
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, minibatch):
            sel = order[start:start + minibatch]
            loss, grads, diag = ppo_loss_and_grads(
                params, batch.obs[sel], batch.actions[sel], batch.log_probs[sel],
                batch.advantages[sel], batch.returns[sel], clip, vf_coef, entropy_coef,
            )
            if not np.isfinite(loss):
                # roll back the whole update and report
                for tgt, src in zip(params.arrays(), backup.arrays()):
                    tgt[...] = src
                adam.t = adam_state[0]
                for m, m0 in zip(adam.m, adam_state[1]):
                    m[...] = m0
                for v, v0 in zip(adam.v, adam_state[2]):
                    v[...] = v0
                diag["skipped"] = True
                return diag
            adam.step(params, grads)
            last_diag = diag
    last_diag["skipped"] = False
    return last_diag


def collect_episode(env, params: PolicyParams, act_rng: np.random.Generator,
                    reward_scale: float) -> tuple[Rollout, dict]:
    """Roll one episode with the stochastic policy; returns the rollout and
    the env's final info dict."""
    from bubblesim.policy import act

    obs_list, act_list, rew_list, logp_list, val_list = [], [], [], [], []
    obs = env.reset()
    done = False
    info: dict = {}
    while not done:
        a, logp, value = act(params, obs, rng=act_rng)
        obs_list.append(obs)
        next_obs, reward, done, info = env.step(a)
        act_list.append(a)
        rew_list.append(reward * reward_scale)
        logp_list.append(logp)
        val_list.append(value)
        obs = next_obs
    rollout = Rollout(
        obs=np.array(obs_list, dtype=np.float64),
        actions=np.array(act_list, dtype=np.int64),
        rewards=np.array(rew_list, dtype=np.float64),
        log_probs=np.array(logp_list, dtype=np.float64),
        values=np.array(val_list, dtype=np.float64),
    )
    return rollout, info


def train_policy(env_factory, n_episodes: int, episodes_per_update: int,
                 params: PolicyParams, cfg, seed: int,
                 log: list[UpdateLog] | None = None) -> PolicyParams:
    """Generic PPO training loop over an env factory.

    env_factory(episode_idx) builds the environment for that episode; action
    sampling uses a per-episode stream keyed on (seed, episode), so rollout
    collection order never changes the result.  cfg provides the PPO
    hyperparameters (clip, gamma, gae_lambda, epochs, minibatch, lr,
    entropy_coef, vf_coef, adv_norm, reward_scale).
    """
    adam = Adam(params, cfg.lr)
    update_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(
        entropy=seed, spawn_key=(0xA11,))))
    update_id = 0
    episode = 0
    while episode < n_episodes:
        group = min(episodes_per_update, n_episodes - episode)
        rollouts = []
        for k in range(episode, episode + group):
            env = env_factory(k)
            act_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(
                entropy=seed, spawn_key=(0xAC7, k))))
            rollout, _ = collect_episode(env, params, act_rng, cfg.reward_scale)
            rollouts.append(rollout)
        episode += group
        batch = build_batch(rollouts, cfg.gamma, cfg.gae_lambda, cfg.adv_norm)
        diag = ppo_update(params, batch, adam, update_rng, cfg.clip, cfg.epochs,
                          cfg.minibatch, cfg.vf_coef, cfg.entropy_coef)
        if log is not None:
            log.append(UpdateLog(
                update_id=update_id,
                episodes=episode,
                mean_reward=float(np.mean([r.rewards.sum() for r in rollouts])),
                loss=diag.get("loss", float("nan")),
                policy_loss=diag.get("policy_loss", float("nan")),
                value_loss=diag.get("value_loss", float("nan")),
                entropy=diag.get("entropy", float("nan")),
                clip_frac=diag.get("clip_frac", float("nan")),
                skipped=bool(diag.get("skipped", False)),
            ))
        update_id += 1
    return params
