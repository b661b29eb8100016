"""Feed-forward policy/value network in plain numpy.

A small shared-trunk MLP (obs -> 64 -> 64 -> {action logits, state value})
with tanh activations.  Forward and backward passes are written out by hand
so gradients can be checked against finite differences and training stays
bit-reproducible from a seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

N_FEATURES = 9
N_ACTIONS = 3

BUY, HOLD, SELL = 0, 1, 2
ACTION_NAMES = ("BUY", "HOLD", "SELL")


@dataclass
class PolicyParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    wp: np.ndarray          # policy head
    bp: np.ndarray
    wv: np.ndarray          # value head
    bv: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2, self.wp, self.bp, self.wv, self.bv]

    def copy(self) -> "PolicyParams":
        return PolicyParams(*(a.copy() for a in self.arrays()))

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())


def init_params(rng: np.random.Generator, n_in: int = N_FEATURES, hidden: int = 64,
                n_actions: int = N_ACTIONS) -> PolicyParams:
    """Scaled-normal init; the policy head starts small so the initial policy
    is near uniform."""
    def layer(n_a, n_b, scale):
        return (rng.standard_normal((n_a, n_b)) * scale, np.zeros(n_b))

    w1, b1 = layer(n_in, hidden, np.sqrt(1.0 / n_in))
    w2, b2 = layer(hidden, hidden, np.sqrt(1.0 / hidden))
    wp, bp = layer(hidden, n_actions, 0.01)
    wv, bv = layer(hidden, 1, np.sqrt(1.0 / hidden))
    return PolicyParams(w1, b1, w2, b2, wp, bp, wv, bv)


def forward(params: PolicyParams, x: np.ndarray):
    """Batched forward pass.

    x is (n, features).  Returns (logits (n, actions), values (n,), cache)
    where cache holds the activations needed for backprop.
    """
    h1 = np.tanh(x @ params.w1 + params.b1)
    h2 = np.tanh(h1 @ params.w2 + params.b2)
    logits = h2 @ params.wp + params.bp
    values = (h2 @ params.wv + params.bv)[:, 0]
    return logits, values, (x, h1, h2)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def act(params: PolicyParams, obs: np.ndarray, rng: np.random.Generator | None = None,
        greedy: bool = False):
    """Pick an action for a single observation.

    Stochastic mode samples the softmax distribution from rng; greedy takes
    the argmax (ties resolved to the lowest action index).  Returns
    (action, log_prob, value).
    """
    obs = np.asarray(obs, dtype=np.float64)
    if not np.isfinite(obs).all():
        raise ValueError("non-finite observation")
    logits, values, _ = forward(params, obs[None, :])
    logp = log_softmax(logits)[0]
    if greedy:
        a = int(np.argmax(logits[0]))
    else:
        if rng is None:
            raise ValueError("stochastic act() needs an rng")
        p = np.exp(logp)
        p /= p.sum()
        a = int(rng.choice(len(p), p=p))
    return a, float(logp[a]), float(values[0])


def save_checkpoint(path: str, params: PolicyParams, meta: dict) -> None:
    """Versioned checkpoint: parameter arrays plus a JSON metadata blob."""
    np.savez(
        path,
        format_version=np.int64(1),
        meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
        **{f"arr_{i}": a for i, a in enumerate(params.arrays())},
    )


def load_checkpoint(path: str) -> tuple[PolicyParams, dict]:
    with np.load(path) as data:
        if int(data["format_version"]) != 1:
            raise ValueError("unsupported checkpoint version")
        meta = json.loads(bytes(data["meta"]).decode())
        arrays = [data[f"arr_{i}"] for i in range(8)]
    return PolicyParams(*arrays), meta
