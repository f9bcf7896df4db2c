"""Shift bribery with all-or-nothing prices under the Borda rule.

Tasks act as voters and models as candidates: training the target on a
task is the same as paying that voter to move the preferred candidate to
the top of its ranking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from leadrig.errors import InputError, ResourceLimitError
from leadrig.scores import LEXICOGRAPHIC, ScoreMatrix, TieBreakPolicy, induced_strict_ranking

DEFAULT_VOTER_LIMIT = 20
_CHUNK = 1 << 16


@dataclass(frozen=True)
class Profile:
    candidates: tuple[str, ...]
    votes: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        candidates = tuple(self.candidates)
        votes = tuple(tuple(v) for v in self.votes)
        if not candidates or not votes:
            raise InputError("a profile needs at least one candidate and one vote")
        if len(set(candidates)) != len(candidates):
            raise InputError("duplicate candidates")
        expected = sorted(candidates)
        for i, vote in enumerate(votes):
            if sorted(vote) != expected:
                raise InputError(f"vote {i} is not a permutation of the candidates")
        object.__setattr__(self, "candidates", candidates)
        object.__setattr__(self, "votes", votes)


@dataclass(frozen=True)
class BriberyInstance:
    profile: Profile
    preferred: str
    costs: tuple[float, ...]
    budget: float

    def __post_init__(self):
        costs = tuple(float(c) for c in self.costs)
        if self.preferred not in self.profile.candidates:
            raise InputError(f"preferred candidate {self.preferred!r} not in profile")
        if len(costs) != len(self.profile.votes):
            raise InputError("need exactly one cost per voter")
        if any(not np.isfinite(c) or c <= 0 for c in costs):
            raise InputError("voter costs must be positive")
        if not np.isfinite(self.budget) or self.budget < 0:
            raise InputError("budget must be nonnegative")
        object.__setattr__(self, "costs", costs)


@dataclass(frozen=True)
class BriberyOutcome:
    cost: float
    bribed: tuple[int, ...]
    within_budget: bool


def shift_to_top(profile: Profile, voter: int, candidate: str) -> Profile:
    if not 0 <= voter < len(profile.votes):
        raise InputError(f"voter index {voter} out of range")
    if candidate not in profile.candidates:
        raise InputError(f"unknown candidate {candidate!r}")
    vote = profile.votes[voter]
    shifted = (candidate,) + tuple(c for c in vote if c != candidate)
    votes = profile.votes[:voter] + (shifted,) + profile.votes[voter + 1:]
    return Profile(profile.candidates, votes)


def borda_tally(profile: Profile) -> dict[str, int]:
    n = len(profile.candidates)
    scores = dict.fromkeys(profile.candidates, 0)
    for vote in profile.votes:
        for pos, c in enumerate(vote):
            scores[c] += n - 1 - pos
    return scores


def borda_winner(profile: Profile, policy: TieBreakPolicy = LEXICOGRAPHIC) -> str:
    scores = borda_tally(profile)
    best = max(scores.values())
    tied = [c for c in profile.candidates if scores[c] == best]
    return policy.sort(tied)[0] if len(tied) > 1 else tied[0]


def is_borda_winner(profile: Profile, candidate: str) -> bool:
    """Weak winner check: top Borda score, ties allowed."""
    scores = borda_tally(profile)
    return scores[candidate] >= max(scores.values())


def _shift_deltas(profile: Profile, preferred: str) -> np.ndarray:
    """voters x candidates: Borda change caused by bribing each voter alone."""
    index = {c: i for i, c in enumerate(profile.candidates)}
    deltas = np.zeros((len(profile.votes), len(profile.candidates)), dtype=np.int64)
    for v, vote in enumerate(profile.votes):
        pos = vote.index(preferred)
        deltas[v, index[preferred]] = pos
        for c in vote[:pos]:
            deltas[v, index[c]] -= 1
    return deltas


def min_cost_shift_bribery(instance: BriberyInstance,
                           limit: int = DEFAULT_VOTER_LIMIT) -> Optional[BriberyOutcome]:
    """Cheapest voter set whose bribery makes the preferred candidate a Borda winner.

    Voter subsets are scanned in order of (total cost, size, bitmask). Borda
    changes from separate voters add up, so each subset is scored from
    per-voter deltas. Returns None only if no subset works at any price.
    """
    profile = instance.profile
    voters = len(profile.votes)
    if voters > limit:
        raise ResourceLimitError(f"bribery enumeration refuses {voters} voters > limit {limit}")
    p = profile.candidates.index(instance.preferred)
    tally = borda_tally(profile)
    base = np.array([tally[c] for c in profile.candidates], dtype=np.int64)
    deltas = _shift_deltas(profile, instance.preferred)
    costs = np.asarray(instance.costs)

    masks = np.arange(1 << voters, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(voters)) & 1).astype(np.int8)
    totals = bits @ costs
    order = np.lexsort((masks, bits.sum(axis=1), totals))
    for start in range(0, order.size, _CHUNK):
        chunk = order[start:start + _CHUNK]
        scores = base + bits[chunk] @ deltas
        ok = scores[:, p] >= scores.max(axis=1)
        hit = np.nonzero(ok)[0]
        if hit.size:
            mask = int(chunk[hit[0]])
            bribed = tuple(v for v in range(voters) if mask >> v & 1)
            cost = float(totals[mask])
            return BriberyOutcome(cost, bribed, cost <= instance.budget)
    return None


def bst_to_bribery(matrix: ScoreMatrix, target: str, costs: Sequence[float] | None = None,
                   budget: float = 0.0,
                   policy: TieBreakPolicy = LEXICOGRAPHIC) -> BriberyInstance:
    """Translate a training problem into shift bribery: one voter per task."""
    matrix.model_index(target)
    votes = [tuple(induced_strict_ranking(matrix, d, policy)) for d in matrix.task_ids]
    if costs is None:
        costs = [1.0] * matrix.m
    return BriberyInstance(Profile(matrix.model_ids, votes), target, tuple(costs), budget)
