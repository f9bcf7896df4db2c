"""Summary statistics: ECDF, namespace bootstrap, Wilcoxon signed-rank, Holm, Spearman.

Randomness comes from numpy's PCG64 generator (``numpy.random.default_rng``),
so a fixed seed gives identical resamples on every platform.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from leadrig.errors import InputError

WILCOXON_METHOD = "normal approximation, zeros dropped, average ranks, tie-corrected variance, continuity 0.5"
BOOTSTRAP_METHOD = "percentile, linear interpolation, namespaces resampled with replacement"


def ecdf(values: Sequence[float]) -> list[tuple[float, float]]:
    """Distinct sorted values paired with the fraction of inputs <= each."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise InputError("ecdf of an empty sequence")
    if not np.all(np.isfinite(x)):
        raise InputError("ecdf needs finite values")
    uniq, counts = np.unique(x, return_counts=True)
    cum = np.cumsum(counts)
    return [(float(u), float(c) / x.size) for u, c in zip(uniq, cum)]


@dataclass(frozen=True)
class BootstrapSummary:
    statistic: str
    point: float
    lower: float
    upper: float
    resamples: int
    seed: int


def bootstrap_ci(groups: Mapping[str, Sequence[float]],
                 statistic: Callable[[np.ndarray], float],
                 resamples: int = 10_000, seed: int = 0, level: float = 0.95,
                 name: str = "statistic") -> BootstrapSummary:
    """Cluster bootstrap: resample whole groups with replacement and pool their values."""
    if not groups:
        raise InputError("bootstrap needs at least one group")
    if resamples < 1:
        raise InputError("bootstrap needs at least one resample")
    keys = list(groups)
    arrays = [np.asarray(groups[k], dtype=np.float64) for k in keys]
    point = float(statistic(np.concatenate(arrays)))
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, len(arrays), size=(resamples, len(arrays)))
    stats = np.empty(resamples, dtype=np.float64)
    for b in range(resamples):
        stats[b] = statistic(np.concatenate([arrays[i] for i in draws[b]]))
    alpha = (1.0 - level) / 2.0
    stats.sort()
    lower, upper = _percentile(stats, alpha), _percentile(stats, 1.0 - alpha)
    return BootstrapSummary(name, point, lower, upper, resamples, seed)


def _percentile(sorted_values: np.ndarray, q: float) -> float:
    """Linear-interpolation quantile; equal neighbours (infinities included) are returned as is."""
    pos = (sorted_values.size - 1) * q
    lo, hi = math.floor(pos), math.ceil(pos)
    a, b = float(sorted_values[lo]), float(sorted_values[hi])
    if a == b:
        return a
    return a + (pos - lo) * (b - a)


def average_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks, ties sharing the mean of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass(frozen=True)
class WilcoxonResult:
    p_value: float
    statistic: float  # W+, sum of ranks of positive differences
    n_used: int
    degenerate: bool = False


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float] | None = None) -> WilcoxonResult:
    """Two-sided paired signed-rank test on ``x - y`` (or on ``x`` alone)."""
    d = np.asarray(x, dtype=np.float64)
    if y is not None:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != d.shape:
            raise InputError("paired samples must have equal length")
        d = d - y
    d = d[d != 0]
    n = d.size
    if n == 0:
        return WilcoxonResult(1.0, 0.0, 0, degenerate=True)
    ranks = average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - (tie_sizes**3 - tie_sizes).sum() / 48.0
    if var <= 0:
        return WilcoxonResult(1.0, w_plus, n, degenerate=True)
    diff = abs(w_plus - mean)
    z = max(diff - 0.5, 0.0) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    return WilcoxonResult(min(1.0, p), w_plus, n)


def holm_adjust(pvals: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, returned in input order."""
    p = np.asarray(pvals, dtype=np.float64)
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise InputError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = np.minimum(1.0, (m - np.arange(m)) * p[order])
    adjusted = np.maximum.accumulate(scaled)
    out = np.empty(m, dtype=np.float64)
    out[order] = adjusted
    return out.tolist()


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Pearson correlation of average ranks; None if either side is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise InputError("spearman needs two equal-length sequences of length >= 2")
    rx, ry = average_ranks(x), average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float((rx**2).sum()) * float((ry**2).sum()))
    if denom == 0:
        return None
    return float(np.clip((rx * ry).sum() / denom, -1.0, 1.0))


@dataclass(frozen=True)
class PairedTestResult:
    rule_a: str
    rule_b: str
    median_difference: Optional[float]  # in tasks, k(rule_a) - k(rule_b)
    median_difference_pp: Optional[float]  # percentage points of m
    p_value: float
    p_adjusted: float
    n_pairs: int
    excluded: int
    degenerate: bool


def paired_rule_comparison(k_by_rule: Mapping[str, Sequence[Optional[int]]], m: int,
                           pairs: Sequence[tuple[str, str]] | None = None) -> list[PairedTestResult]:
    """Wilcoxon tests on per-target differences for every rule pair, Holm-adjusted.

    ``k_by_rule[rule][i]`` is target i's robustness (None when infeasible);
    a target is dropped from a pair when either value is None.
    """
    rules = list(k_by_rule)
    if pairs is None:
        pairs = list(itertools.combinations(rules, 2))
    raw = []
    for a, b in pairs:
        ka, kb = k_by_rule[a], k_by_rule[b]
        if len(ka) != len(kb):
            raise InputError("rules must cover the same targets")
        keep = [(x, y) for x, y in zip(ka, kb) if x is not None and y is not None]
        excluded = len(ka) - len(keep)
        diffs = np.array([x - y for x, y in keep], dtype=np.float64)
        if len(keep) < 2:
            raw.append((a, b, None, 1.0, len(keep), excluded, True))
            continue
        test = wilcoxon_signed_rank(diffs)
        raw.append((a, b, float(np.median(diffs)), test.p_value, len(keep), excluded,
                    test.degenerate))
    adjusted = holm_adjust([r[3] for r in raw]) if raw else []
    out = []
    for (a, b, med, p, used, excluded, degenerate), p_adj in zip(raw, adjusted):
        pp = None if med is None else 100.0 * med / m
        out.append(PairedTestResult(a, b, med, pp, p, p_adj, used, excluded, degenerate))
    return out
