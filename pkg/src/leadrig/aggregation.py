"""Leaderboard aggregation rules: mean, upper median, mean win rate, pairwise majority, Borda."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from leadrig.errors import InputError
from leadrig.scores import LEXICOGRAPHIC, ScoreMatrix, TieBreakPolicy, strict_positions


class Rule(str, enum.Enum):
    MEAN = "mean"
    MEDIAN = "median"
    WINRATE = "winrate"
    MAJORITY = "majority"
    BORDA = "borda"

    @classmethod
    def parse(cls, value: "str | Rule") -> "Rule":
        if isinstance(value, Rule):
            return value
        try:
            return cls(value.strip().lower())
        except ValueError:
            names = ", ".join(r.value for r in cls)
            raise InputError(f"unknown rule {value!r}; expected one of {names}") from None


ROBUSTNESS_RULES = (Rule.MEAN, Rule.MEDIAN, Rule.WINRATE, Rule.MAJORITY)


@dataclass(frozen=True)
class Leaderboard:
    rule: Rule
    order: tuple[str, ...]
    values: Optional[dict[str, float]]


@dataclass(frozen=True)
class MajorityMatrix:
    """``counts[a, b]``: tasks on which model a scores at least as high as b."""

    model_ids: tuple[str, ...]
    counts: np.ndarray
    threshold: int

    def weakly_beats(self, a: str, b: str) -> bool:
        i, j = self.model_ids.index(a), self.model_ids.index(b)
        return bool(self.counts[i, j] >= self.threshold)

    def weak_condorcet_winners(self) -> list[str]:
        ok = (self.counts >= self.threshold).all(axis=1)
        return [a for a, flag in zip(self.model_ids, ok) if flag]


def upper_median_index(m: int) -> int:
    """0-based index of the upper median in an ascending sort of m values."""
    return m // 2


def majority_threshold(m: int) -> int:
    return (m + 1) // 2


def mean_values(matrix: ScoreMatrix) -> np.ndarray:
    return matrix.scores.mean(axis=1)


def median_values(matrix: ScoreMatrix) -> np.ndarray:
    """Upper median per model: the (floor(m/2)+1)-th smallest score."""
    return np.sort(matrix.scores, axis=1)[:, upper_median_index(matrix.m)]


def win_counts(scores: np.ndarray) -> np.ndarray:
    """n x m integer array: number of models (self included) weakly beaten per task."""
    n, m = scores.shape
    out = np.empty((n, m), dtype=np.int64)
    for j in range(m):
        col = scores[:, j]
        out[:, j] = np.searchsorted(np.sort(col), col, side="right")
    return out


def matrix_win_counts(matrix: ScoreMatrix) -> np.ndarray:
    return matrix.derived("win_counts", win_counts)


def win_rates(matrix: ScoreMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-task win rates (n x m) and mean win rate per model (n,)."""
    per_task = matrix_win_counts(matrix) / matrix.n
    return per_task, per_task.mean(axis=1)


def majority_counts(scores: np.ndarray) -> np.ndarray:
    n = scores.shape[0]
    out = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        out[i] = (scores[i] >= scores).sum(axis=1)
    return out


def majority_matrix(matrix: ScoreMatrix) -> MajorityMatrix:
    return MajorityMatrix(
        matrix.model_ids, majority_counts(matrix.scores), majority_threshold(matrix.m)
    )


def borda_scores(matrix: ScoreMatrix, policy: TieBreakPolicy = LEXICOGRAPHIC) -> np.ndarray:
    positions = strict_positions(matrix, policy)
    return (matrix.n - 1 - positions).sum(axis=1)


def strict_majority_counts(matrix: ScoreMatrix,
                           policy: TieBreakPolicy = LEXICOGRAPHIC) -> np.ndarray:
    """Pairwise counts on tie-broken rankings; counts[a,b] + counts[b,a] == m off-diagonal."""
    pos = strict_positions(matrix, policy)
    counts = np.empty((matrix.n, matrix.n), dtype=np.int64)
    for i in range(matrix.n):
        counts[i] = (pos[i] < pos).sum(axis=1)
    np.fill_diagonal(counts, matrix.m)
    return counts


def condorcet_winner(matrix: ScoreMatrix,
                     policy: TieBreakPolicy = LEXICOGRAPHIC) -> Optional[str]:
    """Strict Condorcet winner of the tie-broken profile, or None."""
    pos = strict_positions(matrix, policy)
    m = matrix.m
    for i, a in enumerate(matrix.model_ids):
        ahead = (pos[i] < pos).sum(axis=1)
        ahead[i] = m
        # ahead + behind == m, so beating j strictly means 2 * ahead > m
        if np.all(2 * ahead > m):
            return a
    return None


def weak_condorcet_winners(matrix: ScoreMatrix) -> list[str]:
    return majority_matrix(matrix).weak_condorcet_winners()


def _order_by(matrix: ScoreMatrix, values: np.ndarray, policy: TieBreakPolicy) -> tuple[str, ...]:
    keys = policy.keys(matrix.model_ids)
    order = np.lexsort((keys, -np.asarray(values, dtype=np.float64)))
    return tuple(matrix.model_ids[i] for i in order)


def rule_values(matrix: ScoreMatrix, rule: Rule | str,
                policy: TieBreakPolicy = LEXICOGRAPHIC) -> np.ndarray:
    """Per-model aggregate used to order the leaderboard.

    For MAJORITY this is the number of competitors weakly beaten by
    majority, which is only used for display ordering.
    """
    rule = Rule.parse(rule)
    if rule is Rule.MEAN:
        return mean_values(matrix)
    if rule is Rule.MEDIAN:
        return median_values(matrix)
    if rule is Rule.WINRATE:
        return win_rates(matrix)[1]
    if rule is Rule.BORDA:
        return borda_scores(matrix, policy)
    mm = majority_matrix(matrix)
    beats = mm.counts >= mm.threshold
    np.fill_diagonal(beats, False)
    return beats.sum(axis=1)


def leaderboard(matrix: ScoreMatrix, rule: Rule | str,
                policy: TieBreakPolicy = LEXICOGRAPHIC) -> Leaderboard:
    rule = Rule.parse(rule)
    values = rule_values(matrix, rule, policy)
    # integer win totals avoid float ties that differ only by summation order
    key = matrix_win_counts(matrix).sum(axis=1) if rule is Rule.WINRATE else values
    order = _order_by(matrix, key, policy)
    if rule is Rule.MAJORITY:
        return Leaderboard(rule, order, None)
    as_dict = {a: (int(v) if rule is Rule.BORDA else float(v))
               for a, v in zip(matrix.model_ids, values)}
    return Leaderboard(rule, order, as_dict)
