"""Score matrix, tie-breaking and the benchmark-specific training transform."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from leadrig.errors import InputError

# Headroom slack for explicit caps given as decimals (e.g. 1 - 0.7 != 0.3 in binary).
CAP_SLACK = 1e-12


def extract_namespace(model_id: str) -> str:
    """Lower-cased part of ``model_id`` before the first slash."""
    return model_id.split("/", 1)[0].lower()


@dataclass(frozen=True)
class ScoreMatrix:
    """Complete models x tasks matrix of metric values in [0, 1].

    Immutable: the score array is copied and marked read-only.
    """

    model_ids: tuple[str, ...]
    task_ids: tuple[str, ...]
    scores: np.ndarray
    namespaces: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        model_ids = tuple(str(x) for x in self.model_ids)
        task_ids = tuple(str(x) for x in self.task_ids)
        scores = np.array(self.scores, dtype=np.float64, copy=True)
        if not model_ids or not task_ids:
            raise InputError("score matrix needs at least one model and one task")
        if len(set(model_ids)) != len(model_ids):
            raise InputError("duplicate model ids")
        if len(set(task_ids)) != len(task_ids):
            raise InputError("duplicate task ids")
        if scores.shape != (len(model_ids), len(task_ids)):
            raise InputError(
                f"scores shape {scores.shape} does not match "
                f"{len(model_ids)} models x {len(task_ids)} tasks"
            )
        if not np.all(np.isfinite(scores)):
            raise InputError("scores must be finite")
        if np.any(scores < 0.0) or np.any(scores > 1.0):
            raise InputError("scores must lie in [0, 1]")
        scores.setflags(write=False)
        object.__setattr__(self, "model_ids", model_ids)
        object.__setattr__(self, "task_ids", task_ids)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(
            self, "namespaces", tuple(extract_namespace(x) for x in model_ids)
        )
        object.__setattr__(self, "_model_pos", {x: i for i, x in enumerate(model_ids)})
        object.__setattr__(self, "_task_pos", {x: j for j, x in enumerate(task_ids)})
        object.__setattr__(self, "_derived", {})

    @property
    def n(self) -> int:
        return len(self.model_ids)

    @property
    def m(self) -> int:
        return len(self.task_ids)

    def model_index(self, model_id: str) -> int:
        try:
            return self._model_pos[model_id]
        except KeyError:
            raise InputError(f"unknown model id {model_id!r}") from None

    def task_index(self, task_id: str) -> int:
        try:
            return self._task_pos[task_id]
        except KeyError:
            raise InputError(f"unknown task id {task_id!r}") from None

    def derived(self, key: str, compute: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Memoized read-only array computed from the scores (safe: the matrix is immutable)."""
        value = self._derived.get(key)
        if value is None:
            value = compute(self.scores)
            value.setflags(write=False)
            self._derived[key] = value
        return value

    def row(self, model_id: str) -> np.ndarray:
        return self.scores[self.model_index(model_id)]

    def column(self, task_id: str) -> np.ndarray:
        return self.scores[:, self.task_index(task_id)]

    def subset(self, model_ids: Iterable[str] | None = None,
               task_ids: Iterable[str] | None = None) -> "ScoreMatrix":
        models = list(self.model_ids if model_ids is None else model_ids)
        tasks = list(self.task_ids if task_ids is None else task_ids)
        rows = [self.model_index(a) for a in models]
        cols = [self.task_index(d) for d in tasks]
        return ScoreMatrix(models, tasks, self.scores[np.ix_(rows, cols)])

    def with_row(self, model_id: str, values: np.ndarray) -> "ScoreMatrix":
        scores = np.array(self.scores)
        scores[self.model_index(model_id)] = values
        return ScoreMatrix(self.model_ids, self.task_ids, scores)

    def __eq__(self, other):
        if not isinstance(other, ScoreMatrix):
            return NotImplemented
        return (
            self.model_ids == other.model_ids
            and self.task_ids == other.task_ids
            and np.array_equal(self.scores, other.scores)
        )

    def __hash__(self):
        return hash((self.model_ids, self.task_ids, self.scores.tobytes()))


@dataclass(frozen=True)
class TieBreakPolicy:
    """Strict total order over models used to break equal scores.

    ``ordering`` lists model ids best-first among ties. ``None`` means
    ascending lexicographic order of the ids.
    """

    ordering: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.ordering is not None:
            ordering = tuple(self.ordering)
            if len(set(ordering)) != len(ordering):
                raise InputError("tie-break ordering repeats a model")
            object.__setattr__(self, "ordering", ordering)

    def keys(self, model_ids: Sequence[str]) -> np.ndarray:
        """Integer tie key per model (smaller wins ties)."""
        if self.ordering is None:
            order = sorted(range(len(model_ids)), key=lambda i: model_ids[i])
        else:
            pos = {x: i for i, x in enumerate(self.ordering)}
            missing = [x for x in model_ids if x not in pos]
            if missing:
                raise InputError(f"tie-break ordering misses models {missing}")
            order = sorted(range(len(model_ids)), key=lambda i: pos[model_ids[i]])
        keys = np.empty(len(model_ids), dtype=np.int64)
        keys[order] = np.arange(len(model_ids))
        return keys

    def sort(self, model_ids: Iterable[str]) -> list[str]:
        ids = list(model_ids)
        keys = self.keys(ids)
        return [ids[i] for i in np.argsort(keys, kind="stable")]


LEXICOGRAPHIC = TieBreakPolicy()


def strict_positions(matrix: ScoreMatrix, policy: TieBreakPolicy = LEXICOGRAPHIC) -> np.ndarray:
    """n x m array: 0-based position of each model in each task's strict ranking."""
    keys = policy.keys(matrix.model_ids)
    positions = np.empty(matrix.scores.shape, dtype=np.int64)
    for j in range(matrix.m):
        order = np.lexsort((keys, -matrix.scores[:, j]))
        positions[order, j] = np.arange(matrix.n)
    return positions


def induced_strict_ranking(matrix: ScoreMatrix, task: str,
                           policy: TieBreakPolicy = LEXICOGRAPHIC) -> list[str]:
    """Models best-first on ``task``; equal scores ordered by ``policy``."""
    column = matrix.column(task)
    keys = policy.keys(matrix.model_ids)
    order = np.lexsort((keys, -column))
    return [matrix.model_ids[i] for i in order]


@dataclass(frozen=True)
class GainCaps:
    """Per-task maximal gains for the target model.

    ``values=None`` is the score-to-1 default: every trained task ends at
    exactly 1.0, whatever the matrix it is applied to.
    """

    values: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.values is not None:
            values = tuple(float(v) for v in self.values)
            if any(not np.isfinite(v) or v < 0.0 for v in values):
                raise InputError("gain caps must be finite and nonnegative")
            object.__setattr__(self, "values", values)

    @property
    def is_default(self) -> bool:
        return self.values is None

    def resolve(self, matrix: ScoreMatrix, target: str) -> np.ndarray:
        """Concrete cap per task, validated against the target's headroom."""
        base = matrix.row(target)
        headroom = 1.0 - base
        if self.values is None:
            return headroom.copy()
        caps = np.asarray(self.values, dtype=np.float64)
        if caps.shape != (matrix.m,):
            raise InputError(f"expected {matrix.m} gain caps, got {caps.size}")
        over = np.nonzero(caps > headroom + CAP_SLACK)[0]
        if over.size:
            d = matrix.task_ids[over[0]]
            raise InputError(
                f"gain cap {caps[over[0]]} on task {d!r} exceeds headroom {headroom[over[0]]}"
            )
        return np.minimum(caps, headroom)

    def matches_default(self, matrix: ScoreMatrix, target: str) -> bool:
        if self.values is None:
            return True
        caps = self.resolve(matrix, target)
        return bool(np.all(trained_scores(matrix.row(target), caps) == 1.0))


DEFAULT_CAPS = GainCaps()


def default_caps(matrix: ScoreMatrix, target: str) -> GainCaps:
    """Explicit score-to-1 caps ``1 - score`` for ``target``."""
    return GainCaps(tuple(1.0 - matrix.row(target)))


def trained_scores(base: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Target scores after training every task at its cap.

    A cap equal to the full headroom lands on exactly 1.0 rather than on
    ``base + (1 - base)``, which can round below 1.
    """
    base = np.asarray(base, dtype=np.float64)
    caps = np.asarray(caps, dtype=np.float64)
    out = np.minimum(base + caps, 1.0)
    out[caps >= 1.0 - base] = 1.0
    return out


@dataclass(frozen=True)
class TrainingScenario:
    target: str
    selected: frozenset[str] = frozenset()
    caps: GainCaps = DEFAULT_CAPS

    def __post_init__(self):
        object.__setattr__(self, "selected", frozenset(self.selected))

    def validate(self, matrix: ScoreMatrix) -> None:
        matrix.model_index(self.target)
        for d in self.selected:
            matrix.task_index(d)
        self.caps.resolve(matrix, self.target)


def selection_mask(matrix: ScoreMatrix, selected: Iterable[str]) -> np.ndarray:
    mask = np.zeros(matrix.m, dtype=bool)
    for d in selected:
        mask[matrix.task_index(d)] = True
    return mask


def apply_training(matrix: ScoreMatrix, scenario: TrainingScenario) -> ScoreMatrix:
    """Return the post-training matrix; only the target row changes on selected tasks."""
    scenario.validate(matrix)
    if not scenario.selected:
        return matrix
    caps = scenario.caps.resolve(matrix, scenario.target)
    base = matrix.row(scenario.target)
    mask = selection_mask(matrix, scenario.selected)
    row = np.array(base)
    row[mask] = trained_scores(base, caps)[mask]
    return matrix.with_row(scenario.target, row)
