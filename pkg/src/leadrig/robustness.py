"""Instance-level robustness: the fewest tasks a target must train on to top the leaderboard.

Mean and median have closed forms. Mean win rate and pairwise majority
reduce to binary covering programs solved exactly by
:func:`leadrig.covering.solve_exact`. :func:`brute_force_k` is the
independent enumeration oracle used to check all of them.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from leadrig.aggregation import (
    Rule,
    leaderboard,
    majority_threshold,
    matrix_win_counts,
    median_values,
    upper_median_index,
    weak_condorcet_winners,
)
from leadrig.covering import (
    DEFAULT_NODE_LIMIT,
    CoveringProgram,
    pairwise_lower_bound,
    solve_exact,
)
from leadrig.errors import InputError, ResourceLimitError
from leadrig.scores import (
    DEFAULT_CAPS,
    LEXICOGRAPHIC,
    GainCaps,
    ScoreMatrix,
    TieBreakPolicy,
    TrainingScenario,
    apply_training,
    trained_scores,
)

REL_TOL = 1e-9
DEFAULT_ORACLE_LIMIT = 20


@dataclass(frozen=True)
class RobustnessResult:
    """Robustness of one target under one rule.

    ``k is None`` encodes an infeasible instance (no training set works).
    ``reference`` is the rule-specific denominator behind ``normalized``.
    """

    rule: Rule
    target: str
    k: Optional[int]
    m: int
    witness: tuple[str, ...] = ()
    deficit: dict[str, Any] = field(default_factory=dict)
    normalized: Optional[float] = None
    reference: Optional[int] = None
    lower_bound: Optional[int] = None

    @property
    def feasible(self) -> bool:
        return self.k is not None

    @property
    def k_fraction(self) -> Optional[float]:
        return None if self.k is None else self.k / self.m


def _tol(value: float) -> float:
    return REL_TOL * max(1.0, abs(value))


def _competitors(matrix: ScoreMatrix, t: int) -> np.ndarray:
    return np.arange(matrix.n) != t


def _descending(values: np.ndarray) -> np.ndarray:
    """Indices sorted by descending value, ties in column order."""
    return np.argsort(-np.asarray(values, dtype=np.float64), kind="stable")


def _ratio_ceil(x: float) -> int:
    return math.ceil(x - REL_TOL * max(1.0, abs(x)))


def _finish(result: RobustnessResult) -> RobustnessResult:
    if result.k is None:
        return result
    if result.k == 0:
        return replace(result, normalized=0.0)
    if not result.reference:
        return replace(result, normalized=None)
    return replace(result, normalized=result.k / result.reference)


# -- arithmetic mean ---------------------------------------------------------

def _mean_parts(matrix: ScoreMatrix, target: str, caps: GainCaps):
    t = matrix.model_index(target)
    base = matrix.scores[t]
    sums = matrix.scores.sum(axis=1)
    need = max(0.0, float(sums.max() - sums[t]))
    gains = trained_scores(base, caps.resolve(matrix, target)) - base
    return t, base, sums, need, gains


def k_mean(matrix: ScoreMatrix, target: str, caps: GainCaps = DEFAULT_CAPS) -> RobustnessResult:
    """Train on the largest gains until they cover ``m * mean deficit``."""
    t, base, sums, need, gains = _mean_parts(matrix, target, caps)
    m = matrix.m
    deficit = {"mean": need / m}
    headroom = m - float(sums[t])
    reference = None
    if need > 0 and headroom > 0:
        reference = min(_ratio_ceil(m * need / headroom), m)
    if need <= _tol(need):
        return _finish(RobustnessResult(Rule.MEAN, target, 0, m, (), deficit, reference=reference))
    order = _descending(gains)
    reached = np.nonzero(np.cumsum(gains[order]) >= need - _tol(float(sums.max())))[0]
    if not reached.size:
        return RobustnessResult(Rule.MEAN, target, None, m, (), deficit, reference=reference)
    k = int(reached[0]) + 1
    witness = tuple(matrix.task_ids[j] for j in sorted(order[:k]))
    return _finish(RobustnessResult(Rule.MEAN, target, k, m, witness, deficit, reference=reference))


# -- upper median ------------------------------------------------------------

def k_median(matrix: ScoreMatrix, target: str, caps: GainCaps = DEFAULT_CAPS) -> RobustnessResult:
    """Closed form: the number of extra tasks that must reach the best rival median."""
    t = matrix.model_index(target)
    m = matrix.m
    if matrix.n == 1:
        return _finish(RobustnessResult(Rule.MEDIAN, target, 0, m, (), {"median": 0}))
    base = matrix.scores[t]
    trained = trained_scores(base, caps.resolve(matrix, target))
    tau = float(median_values(matrix)[_competitors(matrix, t)].max())
    above = base >= tau
    crossable = (base < tau) & (tau <= trained)
    n_tau = int(above.sum())
    c_tau = int(crossable.sum())
    required = m - (upper_median_index(m) + 1) + 1
    delta = max(0, required - n_tau)
    deficit = {"median": delta, "tau": tau, "n_tau": n_tau, "c_tau": c_tau}
    if delta == 0:
        return _finish(RobustnessResult(Rule.MEDIAN, target, 0, m, (), deficit, reference=c_tau))
    if c_tau < delta:
        return RobustnessResult(Rule.MEDIAN, target, None, m, (), deficit, reference=c_tau)
    candidates = np.nonzero(crossable)[0]
    gains = (trained - base)[candidates]
    chosen = candidates[_descending(gains)[:delta]]
    witness = tuple(matrix.task_ids[j] for j in sorted(chosen))
    return _finish(RobustnessResult(Rule.MEDIAN, target, delta, m, witness, deficit, reference=c_tau))


# -- mean win rate -----------------------------------------------------------

def _pairwise_gain_counts(matrix: ScoreMatrix, t: int, caps: np.ndarray) -> np.ndarray:
    """n x m integer array: n * q_D(A), training on D alone; target row is 0."""
    scores = matrix.scores
    base = scores[t]
    trained = trained_scores(base, caps)
    wins = matrix_win_counts(matrix)
    # target row compares trained against its own base, which is >=, so self counts once
    target_gain = (trained[None, :] >= scores).sum(axis=0) - wins[t]
    rival_loss = (scores >= base[None, :]).astype(np.int64) - (scores >= trained[None, :])
    q = target_gain[None, :] + rival_loss
    q[t] = 0
    return q


def _win_deficit_counts(matrix: ScoreMatrix, t: int) -> np.ndarray:
    """n * m * Delta_win per model (target entry 0), as integers."""
    totals = matrix_win_counts(matrix).sum(axis=1)
    return np.maximum(0, totals - totals[t])


def pairwise_gains(matrix: ScoreMatrix, target: str,
                   caps: GainCaps = DEFAULT_CAPS) -> np.ndarray:
    """m x n array of q_D(A) in win-rate units (target column is 0)."""
    t = matrix.model_index(target)
    counts = _pairwise_gain_counts(matrix, t, caps.resolve(matrix, target))
    return counts.T / matrix.n


def win_deficits(matrix: ScoreMatrix, target: str) -> dict[str, float]:
    """Delta_win against each competitor, in win-rate units."""
    t = matrix.model_index(target)
    deficits = _win_deficit_counts(matrix, t) / (matrix.n * matrix.m)
    return {a: float(deficits[i]) for i, a in enumerate(matrix.model_ids) if i != t}


def _win_reference(q: np.ndarray, need: np.ndarray, m: int) -> Optional[int]:
    if not np.any(need > 0):
        return None
    a = int(np.argmax(need))
    total_gain = int(q[a].sum())
    if total_gain == 0:
        return None
    # ceil(m * Delta / mean gain) with both in units of 1/n
    return min(-(-m * int(need[a]) // total_gain), m)


def _win_deficit_report(matrix: ScoreMatrix, t: int, need: np.ndarray) -> dict[str, Any]:
    scale = matrix.n * matrix.m
    positive = {matrix.model_ids[i]: float(need[i]) / scale
                for i in np.nonzero(need > 0)[0]}
    return {"win": float(need.max()) / scale if need.size else 0.0, "per_competitor": positive}


def k_win_pairwise(matrix: ScoreMatrix, target: str, competitor: str,
                   caps: GainCaps = DEFAULT_CAPS) -> RobustnessResult:
    """Tasks needed for the target to weakly overtake one competitor in mean win rate."""
    t = matrix.model_index(target)
    a = matrix.model_index(competitor)
    if a == t:
        raise InputError("competitor must differ from the target")
    q = _pairwise_gain_counts(matrix, t, caps.resolve(matrix, target))[a]
    need = int(_win_deficit_counts(matrix, t)[a])
    m = matrix.m
    deficit = {"win": need / (matrix.n * m), "competitor": competitor}
    if need == 0:
        return RobustnessResult(Rule.WINRATE, target, 0, m, (), deficit, normalized=0.0)
    order = _descending(q)
    reached = np.nonzero(np.cumsum(q[order]) >= need)[0]
    if not reached.size:
        return RobustnessResult(Rule.WINRATE, target, None, m, (), deficit)
    k = int(reached[0]) + 1
    witness = tuple(matrix.task_ids[j] for j in sorted(order[:k]))
    return RobustnessResult(Rule.WINRATE, target, k, m, witness, deficit)


def winrate_program(matrix: ScoreMatrix, target: str,
                    caps: GainCaps = DEFAULT_CAPS) -> CoveringProgram:
    """Covering program whose optimum is the mean-win-rate robustness.

    Weights and thresholds are scaled by n so that they are integers.
    """
    t = matrix.model_index(target)
    q = _pairwise_gain_counts(matrix, t, caps.resolve(matrix, target))
    return _winrate_program(matrix, t, q, _win_deficit_counts(matrix, t))


def _winrate_program(matrix: ScoreMatrix, t: int, q: np.ndarray,
                     need: np.ndarray) -> CoveringProgram:
    rivals = np.nonzero(_competitors(matrix, t))[0]
    return CoveringProgram(
        matrix.task_ids,
        tuple(matrix.model_ids[i] for i in rivals),
        q[rivals].T,
        need[rivals],
    )


def k_win_global(matrix: ScoreMatrix, target: str, caps: GainCaps = DEFAULT_CAPS,
                 node_limit: int = DEFAULT_NODE_LIMIT) -> RobustnessResult:
    t = matrix.model_index(target)
    m = matrix.m
    q = _pairwise_gain_counts(matrix, t, caps.resolve(matrix, target))
    need = _win_deficit_counts(matrix, t)
    deficit = _win_deficit_report(matrix, t, need)
    reference = _win_reference(q, need, m)
    program = _winrate_program(matrix, t, q, need)
    bound = pairwise_lower_bound(program)
    solution = solve_exact(program, node_limit=node_limit)
    return _finish(RobustnessResult(
        Rule.WINRATE, target, solution.k, m, solution.witness, deficit,
        reference=reference, lower_bound=bound,
    ))


# -- pairwise majority -------------------------------------------------------

def _require_default_caps(matrix: ScoreMatrix, target: str, caps: GainCaps) -> None:
    if not caps.matches_default(matrix, target):
        raise InputError(
            "pairwise majority robustness assumes training lifts the target to the "
            "top of each chosen task; only score-to-1 caps are supported"
        )


def majority_losses(matrix: ScoreMatrix, target: str) -> np.ndarray:
    """n x m boolean: tasks where each model strictly beats the target."""
    t = matrix.model_index(target)
    losses = matrix.scores > matrix.scores[t][None, :]
    losses[t] = False
    return losses


def _maj_deficits(losses: np.ndarray, m: int) -> np.ndarray:
    return np.maximum(0, majority_threshold(m) - (m - losses.sum(axis=1)))


def k_maj_pairwise(matrix: ScoreMatrix, target: str, competitor: str,
                   caps: GainCaps = DEFAULT_CAPS) -> RobustnessResult:
    """Equals the competitor's majority deficit; witness drawn from the tasks it wins."""
    _require_default_caps(matrix, target, caps)
    t = matrix.model_index(target)
    a = matrix.model_index(competitor)
    if a == t:
        raise InputError("competitor must differ from the target")
    losses = majority_losses(matrix, target)
    delta = int(_maj_deficits(losses, matrix.m)[a])
    chosen = np.nonzero(losses[a])[0][:delta]
    witness = tuple(matrix.task_ids[j] for j in chosen)
    deficit = {"majority": delta, "competitor": competitor,
               "losses": int(losses[a].sum())}
    return RobustnessResult(Rule.MAJORITY, target, delta, matrix.m, witness, deficit,
                            normalized=0.0 if delta == 0 else None)


def majority_program(matrix: ScoreMatrix, target: str) -> CoveringProgram:
    t = matrix.model_index(target)
    losses = majority_losses(matrix, target)
    delta = _maj_deficits(losses, matrix.m)
    rivals = np.nonzero(_competitors(matrix, t))[0]
    return CoveringProgram(
        matrix.task_ids,
        tuple(matrix.model_ids[i] for i in rivals),
        losses[rivals].T.astype(np.float64),
        delta[rivals],
    )


def k_maj_global(matrix: ScoreMatrix, target: str, caps: GainCaps = DEFAULT_CAPS,
                 node_limit: int = DEFAULT_NODE_LIMIT) -> RobustnessResult:
    _require_default_caps(matrix, target, caps)
    t = matrix.model_index(target)
    m = matrix.m
    losses = majority_losses(matrix, target)
    delta = _maj_deficits(losses, m)
    delta[t] = 0
    relevant = losses[delta > 0].any(axis=0)
    deficit = {
        "majority": int(delta.max()),
        "per_competitor": {matrix.model_ids[i]: int(delta[i]) for i in np.nonzero(delta > 0)[0]},
    }
    program = majority_program(matrix, target)
    solution = solve_exact(program, node_limit=node_limit)
    if solution.k is None:  # pragma: no cover - training on every task always works
        raise AssertionError("majority covering program reported infeasible")
    return _finish(RobustnessResult(
        Rule.MAJORITY, target, solution.k, m, solution.witness, deficit,
        reference=int(relevant.sum()), lower_bound=int(delta.max()),
    ))


# -- normalization -----------------------------------------------------------

def reference_value(rule: Rule | str, matrix: ScoreMatrix, target: str,
                    caps: GainCaps = DEFAULT_CAPS) -> Optional[int]:
    """Rule-specific denominator for normalized robustness (None when undefined)."""
    rule = Rule.parse(rule)
    t = matrix.model_index(target)
    m = matrix.m
    if rule is Rule.MEAN:
        _, _, sums, need, _ = _mean_parts(matrix, target, caps)
        headroom = m - float(sums[t])
        if need <= 0 or headroom <= 0:
            return None
        return min(_ratio_ceil(m * need / headroom), m)
    if rule is Rule.MEDIAN:
        return k_median(matrix, target, caps).deficit.get("c_tau")
    if rule is Rule.WINRATE:
        q = _pairwise_gain_counts(matrix, t, caps.resolve(matrix, target))
        return _win_reference(q, _win_deficit_counts(matrix, t), m)
    if rule is Rule.MAJORITY:
        losses = majority_losses(matrix, target)
        delta = _maj_deficits(losses, m)
        delta[t] = 0
        return int(losses[delta > 0].any(axis=0).sum())
    raise InputError(f"no normalized robustness for rule {rule.value}")


def normalized(result: RobustnessResult, matrix: ScoreMatrix, target: str,
               caps: GainCaps = DEFAULT_CAPS) -> Optional[float]:
    """``k`` divided by the rule's reference value; 0 when ``k == 0``; None if undefined."""
    if result.k is None:
        raise InputError("normalized robustness is undefined for infeasible results")
    if result.k == 0:
        return 0.0
    ref = reference_value(result.rule, matrix, target, caps)
    if not ref:
        return None
    return result.k / ref


# -- oracle ------------------------------------------------------------------

def is_top(matrix: ScoreMatrix, target: str, rule: Rule | str,
           policy: TieBreakPolicy = LEXICOGRAPHIC) -> bool:
    """Whether ``target`` is weakly best (before tie-breaking) under ``rule``."""
    rule = Rule.parse(rule)
    if rule is Rule.MAJORITY:
        return target in weak_condorcet_winners(matrix)
    values = leaderboard(matrix, rule, policy).values
    best = max(values.values())
    if rule is Rule.MEDIAN or rule is Rule.BORDA:
        return values[target] >= best
    return values[target] >= best - _tol(best)


def brute_force_k(matrix: ScoreMatrix, target: str, caps: GainCaps = DEFAULT_CAPS,
                  rule: Rule | str = Rule.MEAN, limit: int = DEFAULT_ORACLE_LIMIT,
                  policy: TieBreakPolicy = LEXICOGRAPHIC) -> RobustnessResult:
    """Enumerate training sets by size and return the first that tops the leaderboard."""
    rule = Rule.parse(rule)
    if matrix.m > limit:
        raise ResourceLimitError(f"oracle refuses m={matrix.m} > limit {limit}")
    if rule is Rule.MAJORITY:
        _require_default_caps(matrix, target, caps)
    matrix.model_index(target)
    for size in range(matrix.m + 1):
        for subset in itertools.combinations(matrix.task_ids, size):
            trained = apply_training(matrix, TrainingScenario(target, frozenset(subset), caps))
            if is_top(trained, target, rule, policy):
                return RobustnessResult(rule, target, size, matrix.m, tuple(subset))
    return RobustnessResult(rule, target, None, matrix.m)


# -- dispatch ----------------------------------------------------------------

CapsPolicy = Union[GainCaps, Callable[[ScoreMatrix, str], GainCaps], None]


def _caps_for(policy: CapsPolicy, matrix: ScoreMatrix, target: str) -> GainCaps:
    if policy is None:
        return DEFAULT_CAPS
    if isinstance(policy, GainCaps):
        return policy
    return policy(matrix, target)


def robustness(matrix: ScoreMatrix, target: str, rule: Rule | str,
               caps: GainCaps = DEFAULT_CAPS,
               node_limit: int = DEFAULT_NODE_LIMIT) -> RobustnessResult:
    rule = Rule.parse(rule)
    if rule is Rule.MEAN:
        return k_mean(matrix, target, caps)
    if rule is Rule.MEDIAN:
        return k_median(matrix, target, caps)
    if rule is Rule.WINRATE:
        return k_win_global(matrix, target, caps, node_limit)
    if rule is Rule.MAJORITY:
        return k_maj_global(matrix, target, caps, node_limit)
    raise InputError(f"robustness is not defined for rule {rule.value}")


def _one(args):
    matrix, target, rule, caps, node_limit = args
    return robustness(matrix, target, rule, caps, node_limit)


def all_targets(matrix: ScoreMatrix, rule: Rule | str, caps_policy: CapsPolicy = None,
                node_limit: int = DEFAULT_NODE_LIMIT, workers: int = 1,
                targets: Optional[Sequence[str]] = None) -> list[RobustnessResult]:
    """Robustness for each target in turn, returned in model order."""
    rule = Rule.parse(rule)
    targets = list(matrix.model_ids if targets is None else targets)
    jobs = [(matrix, a, rule, _caps_for(caps_policy, matrix, a), node_limit) for a in targets]
    if workers <= 1 or len(jobs) < 2:
        return [_one(job) for job in jobs]
    workers = min(workers, len(jobs), os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
