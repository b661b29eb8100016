"""Shapley-value feature attribution for the trained policy.

The scalar being explained is a signed action score: the probability-weighted
sum of action codes with BUY = -1, HOLD = 0, SELL = +1, so negative values
mean the policy leans toward buying.  Attributions use Monte Carlo
permutation sampling: for each sampled feature ordering, each feature's
marginal contribution is the score change from switching that feature (after
all its predecessors) from the baseline to the observed value.  The estimator
is exactly efficient per permutation, so attributions always sum to
f(obs) - f(baseline) up to float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bubblesim.policy import PolicyParams, forward, softmax

ACTION_CODES = np.array([-1.0, 0.0, 1.0])   # BUY, HOLD, SELL


def action_score(params: PolicyParams, obs: np.ndarray) -> float:
    """Signed buy/sell tilt of the policy at one observation."""
    obs = np.asarray(obs, dtype=np.float64)
    logits, _, _ = forward(params, obs[None, :])
    p = softmax(logits)[0]
    return float(p @ ACTION_CODES)


def _scores(params: PolicyParams, xs: np.ndarray) -> np.ndarray:
    logits, _, _ = forward(params, xs)
    return softmax(logits) @ ACTION_CODES


def shapley_values(params: PolicyParams, obs: np.ndarray, baseline: np.ndarray,
                   n_perms: int, rng: np.random.Generator):
    """Monte Carlo permutation Shapley attribution of the action score.

    Returns (phi, stderr): per-feature attribution estimates and their Monte
    Carlo standard errors over the sampled permutations.
    """
    obs = np.asarray(obs, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    n_feat = len(obs)
    if n_perms < 1:
        raise ValueError("need at least one permutation")

    # Build every intermediate coalition vector for all permutations, then
    # score them in one batched forward pass.
    xs = np.empty((n_perms, n_feat + 1, n_feat), dtype=np.float64)
    perms = np.empty((n_perms, n_feat), dtype=np.int64)
    for k in range(n_perms):
        perm = rng.permutation(n_feat)
        perms[k] = perm
        x = baseline.copy()
        xs[k, 0] = x
        for j, f in enumerate(perm):
            x[f] = obs[f]
            xs[k, j + 1] = x

    scores = _scores(params, xs.reshape(-1, n_feat)).reshape(n_perms, n_feat + 1)
    marginals = np.diff(scores, axis=1)          # (n_perms, n_feat) in perm order

    contrib = np.zeros((n_perms, n_feat))
    rows = np.arange(n_perms)[:, None]
    contrib[rows, perms] = marginals
    phi = contrib.mean(axis=0)
    stderr = contrib.std(axis=0, ddof=1) / np.sqrt(n_perms) if n_perms > 1 else np.zeros(n_feat)
    return phi, stderr


@dataclass(frozen=True)
class AttributionRecord:
    t_s: int
    feature_values: np.ndarray
    shapley: np.ndarray
    model_output: float


def episode_attribution(params: PolicyParams, times_s, observations: np.ndarray,
                        n_perms: int, rng: np.random.Generator) -> list[AttributionRecord]:
    """Per-timestep attributions for one episode.

    The baseline is the per-feature mean over the episode's observations, so
    attributions are comparable within the session.
    """
    observations = np.asarray(observations, dtype=np.float64)
    baseline = observations.mean(axis=0)
    records = []
    for t, obs in zip(times_s, observations):
        phi, _ = shapley_values(params, obs, baseline, n_perms, rng)
        records.append(AttributionRecord(
            t_s=int(t),
            feature_values=obs.copy(),
            shapley=phi,
            model_output=action_score(params, obs),
        ))
    return records
