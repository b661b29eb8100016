"""Mean-reverting fundamental value path and noisy observations of it.

The path follows a discretized Ornstein-Uhlenbeck recursion

    r[k+1] = r[k] + kappa * (mu - r[k]) * dt + sigma * sqrt(dt) * z[k]

with z drawn from a dedicated seeded stream, clamped to at least one cent.
Value agents never see the path itself, only observe() results with
independent zero-mean Gaussian noise per agent.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from bubblesim.kernel import NS_PER_SEC


@dataclass(frozen=True)
class OUParams:
    mu: float               # long-run mean, cents
    kappa: float            # reversion rate, 1/s
    sigma: float            # volatility, cents per sqrt(s)
    r0: float               # initial value, cents
    dt_s: float = 1.0

    def validate(self) -> None:
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.dt_s <= 0:
            raise ValueError("dt must be positive")

    def stationary_var(self) -> float:
        return self.sigma * self.sigma / (2.0 * self.kappa)


class FundamentalPath:
    """Step-function view of the generated path, queryable at any sim time."""

    __slots__ = ("values", "dt_ns", "dt_s")

    def __init__(self, values: np.ndarray, dt_s: float) -> None:
        self.values = values
        self.dt_s = dt_s
        self.dt_ns = int(round(dt_s * NS_PER_SEC))

    def value_at(self, t_ns: int) -> float:
        idx = t_ns // self.dt_ns
        if idx >= len(self.values):
            idx = len(self.values) - 1
        return self.values[idx]

    def __len__(self) -> int:
        return len(self.values)


def generate_path(params: OUParams, rng: np.random.Generator, horizon_s: float) -> FundamentalPath:
    """Generate the seeded path over [0, horizon] at dt spacing."""
    params.validate()
    n = int(round(horizon_s / params.dt_s)) + 1
    values = np.empty(n, dtype=np.float64)
    shocks = rng.standard_normal(n - 1) if params.sigma > 0 else None
    k_dt = params.kappa * params.dt_s
    s_dt = params.sigma * sqrt(params.dt_s)
    mu = params.mu
    r = float(params.r0)
    if r < 1.0:
        r = 1.0
    values[0] = r
    if shocks is None:
        for i in range(1, n):
            r = r + k_dt * (mu - r)
            if r < 1.0:
                r = 1.0
            values[i] = r
    else:
        for i in range(1, n):
            r = r + k_dt * (mu - r) + s_dt * shocks[i - 1]
            if r < 1.0:
                r = 1.0
            values[i] = r
    return FundamentalPath(values, params.dt_s)


class FundamentalOracle:
    """Serves noisy integer-cent observations of the fundamental path."""

    __slots__ = ("path", "obs_std")

    def __init__(self, path: FundamentalPath, obs_std: float) -> None:
        self.path = path
        self.obs_std = obs_std

    def observe(self, t_ns: int, rng: np.random.Generator) -> int:
        """Path value at t plus independent Gaussian noise, >= 1 cent."""
        v = self.path.value_at(t_ns)
        if self.obs_std > 0:
            v += self.obs_std * rng.standard_normal()
        obs = round(v)
        return obs if obs >= 1 else 1
