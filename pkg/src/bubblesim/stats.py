"""Nonparametric group comparison: Kruskal-Wallis H with tie correction.

The H statistic is computed from scratch (midranks, tie correction); only the
chi-square tail probability comes from scipy.  An exact permutation variant
is provided for tiny fixtures where the chi-square approximation is poor.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy.stats import chi2


def _midranks(values: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Average ranks (1-based) with tie groups; returns (ranks, tie sizes)."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    ties: list[int] = []
    i = 0
    sorted_vals = values[order]
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        # ranks i+1 .. j+1 share the average
        avg = (i + j) / 2.0 + 1.0
        ranks[order[i:j + 1]] = avg
        if j > i:
            ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


def kruskal_wallis_h(groups: list[np.ndarray]) -> float:
    """Tie-corrected H over >= 2 non-empty groups.

    All-identical samples would make the tie correction 0/0; that case is
    defined as H = 0 (no evidence of separation).
    """
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if any(len(a) == 0 for a in arrays):
        raise ValueError("groups must be non-empty")
    pooled = np.concatenate(arrays)
    n_total = len(pooled)
    ranks, ties = _midranks(pooled)

    h = 0.0
    start = 0
    for a in arrays:
        r_sum = ranks[start:start + len(a)].sum()
        h += r_sum * r_sum / len(a)
        start += len(a)
    h = 12.0 / (n_total * (n_total + 1)) * h - 3.0 * (n_total + 1)

    tie_term = sum(t ** 3 - t for t in ties)
    denom = 1.0 - tie_term / (n_total ** 3 - n_total)
    if denom <= 0.0:
        return 0.0
    return h / denom


def kruskal_wallis(groups: list[np.ndarray]) -> tuple[float, float]:
    """(H, p) with p from the chi-square upper tail, k-1 degrees of freedom."""
    h = kruskal_wallis_h(groups)
    df = len(groups) - 1
    if h == 0.0:
        return 0.0, 1.0
    return h, float(chi2.sf(h, df))


def kruskal_wallis_exact(groups: list[np.ndarray], max_n: int = 10) -> tuple[float, float]:
    """Exact permutation p-value; only feasible for tiny pooled samples."""
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    pooled = np.concatenate(arrays)
    if len(pooled) > max_n:
        raise ValueError(f"exact test limited to {max_n} pooled observations")
    sizes = [len(a) for a in arrays]
    h_obs = kruskal_wallis_h(arrays)
    count = 0
    total = 0
    for perm in permutations(pooled):
        perm_groups = []
        start = 0
        for s in sizes:
            perm_groups.append(np.array(perm[start:start + s]))
            start += s
        if kruskal_wallis_h(perm_groups) >= h_obs - 1e-12:
            count += 1
        total += 1
    return h_obs, count / total
