"""Random instances and the closed-form vs. enumeration agreement check."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from leadrig.aggregation import ROBUSTNESS_RULES, Rule
from leadrig.robustness import DEFAULT_ORACLE_LIMIT, brute_force_k, robustness
from leadrig.scores import DEFAULT_CAPS, GainCaps, ScoreMatrix

# rules whose closed forms hold for arbitrary caps; majority needs score-to-1
CAPPED_RULES = (Rule.MEAN, Rule.MEDIAN, Rule.WINRATE)


@dataclass(frozen=True)
class Instance:
    matrix: ScoreMatrix
    target: str
    caps: GainCaps

    @property
    def rules(self) -> tuple[Rule, ...]:
        return ROBUSTNESS_RULES if self.caps.is_default else CAPPED_RULES

    def to_dict(self) -> dict:
        return {
            "model_ids": list(self.matrix.model_ids),
            "task_ids": list(self.matrix.task_ids),
            "scores": self.matrix.scores.tolist(),
            "target": self.target,
            "caps": None if self.caps.values is None else list(self.caps.values),
        }


def random_matrix(rng: np.random.Generator, n: int, m: int, decimals: int = 2,
                  distinct_columns: bool = False, upper: float = 1.0) -> ScoreMatrix:
    """Uniform scores rounded to ``decimals``; optionally all-distinct within each task."""
    if distinct_columns:
        grid = np.round(np.arange(0, int(round(upper * 10**decimals)) + 1) / 10**decimals, decimals)
        scores = np.column_stack([rng.choice(grid, size=n, replace=False) for _ in range(m)])
    else:
        scores = np.round(rng.uniform(0.0, upper, size=(n, m)), decimals)
    return ScoreMatrix([f"m{i}" for i in range(n)], [f"t{j}" for j in range(m)], scores)


def random_caps(rng: np.random.Generator, matrix: ScoreMatrix, target: str) -> GainCaps:
    """Random caps on the 0.01 grid, each within the target's headroom."""
    headroom = np.round(1.0 - matrix.row(target), 2)
    steps = np.floor(headroom * 100 + 1e-9).astype(int)
    caps = np.array([rng.integers(0, s + 1) for s in steps]) / 100.0
    return GainCaps(tuple(np.minimum(caps, 1.0 - matrix.row(target))))


def instances(seed: int, count: int, max_models: int = 6, max_tasks: int = 12,
              restricted: int = 0) -> Iterator[Instance]:
    """``count`` seeded instances; the last ``restricted`` carry random caps."""
    rng = np.random.default_rng(seed)
    for i in range(count):
        n = int(rng.integers(2, max_models + 1))
        m = int(rng.integers(1, max_tasks + 1))
        matrix = random_matrix(rng, n, m)
        target = matrix.model_ids[int(rng.integers(0, n))]
        caps = DEFAULT_CAPS
        if i >= count - restricted:
            caps = random_caps(rng, matrix, target)
        yield Instance(matrix, target, caps)


@dataclass(frozen=True)
class Mismatch:
    instance: Instance
    rule: Rule
    closed_form: Optional[int]
    enumerated: Optional[int]


def check(instance: Instance, limit: int = DEFAULT_ORACLE_LIMIT) -> list[Mismatch]:
    out = []
    for rule in instance.rules:
        fast = robustness(instance.matrix, instance.target, rule, instance.caps).k
        slow = brute_force_k(instance.matrix, instance.target, instance.caps, rule, limit).k
        if fast != slow:
            out.append(Mismatch(instance, rule, fast, slow))
    return out
