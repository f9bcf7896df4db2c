"""Exact minimum-cardinality solver for binary covering programs.

A program asks for the smallest item set S such that, for every
constraint c, ``sum(weights[i, c] for i in S) >= thresholds[c]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from leadrig.errors import InputError, SolverBudgetExceeded

REL_TOL = 1e-9
DEFAULT_NODE_LIMIT = 10**8
# Above this many cells the per-depth sorted prefix tables are built lazily.
_TABLE_CELLS = 20_000_000


@dataclass(frozen=True)
class CoveringProgram:
    items: tuple[str, ...]
    constraints: tuple[str, ...]
    weights: np.ndarray  # items x constraints
    thresholds: np.ndarray  # constraints

    def __post_init__(self):
        items = tuple(self.items)
        constraints = tuple(self.constraints)
        weights = np.array(self.weights, dtype=np.float64, copy=True).reshape(
            len(items), len(constraints)
        )
        thresholds = np.array(self.thresholds, dtype=np.float64, copy=True).reshape(
            len(constraints)
        )
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(thresholds))):
            raise InputError("covering weights and thresholds must be finite")
        if np.any(weights < 0) or np.any(thresholds < 0):
            raise InputError("covering weights and thresholds must be nonnegative")
        weights.setflags(write=False)
        thresholds.setflags(write=False)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "constraints", constraints)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "thresholds", thresholds)

    @property
    def tolerances(self) -> np.ndarray:
        return REL_TOL * np.maximum(1.0, np.abs(self.thresholds))

    def is_satisfied_by(self, selected: Sequence[str]) -> bool:
        pos = {x: i for i, x in enumerate(self.items)}
        rows = [pos[x] for x in selected]
        covered = self.weights[rows].sum(axis=0)
        return bool(np.all(covered >= self.thresholds - self.tolerances))


@dataclass(frozen=True)
class CoverSolution:
    """``k is None`` means infeasible; then ``witness`` is empty."""

    k: Optional[int]
    witness: tuple[str, ...] = ()
    nodes: int = 0

    @property
    def feasible(self) -> bool:
        return self.k is not None


def _witness(program: CoveringProgram, rows) -> tuple[str, ...]:
    return tuple(program.items[i] for i in sorted(int(r) for r in rows))


def _greedy_rows(weights: np.ndarray, residual: np.ndarray, tol: np.ndarray):
    residual = residual.copy()
    taken = np.zeros(weights.shape[0], dtype=bool)
    rows = []
    while True:
        pos = residual > tol
        if not pos.any():
            return rows
        gain = np.minimum(weights[:, pos], residual[pos]).sum(axis=1)
        gain[taken] = -1.0
        best = int(np.argmax(gain))
        if gain[best] <= 0.0:
            return None
        taken[best] = True
        rows.append(best)
        residual = residual - weights[best]


def greedy_cover(program: CoveringProgram) -> CoverSolution:
    """Repeatedly take the item with the largest residual deficit reduction."""
    rows = _greedy_rows(program.weights, program.thresholds, program.tolerances)
    if rows is None:
        return CoverSolution(None)
    return CoverSolution(len(rows), _witness(program, rows))


def pairwise_lower_bound(program: CoveringProgram) -> Optional[int]:
    """Max over constraints of the items needed for that constraint alone.

    None when some constraint cannot be met even on its own.
    """
    need = program.thresholds - program.tolerances
    active = program.thresholds > program.tolerances
    if not active.any():
        return 0
    cum = np.cumsum(-np.sort(-program.weights[:, active], axis=0), axis=0)
    reached = cum >= need[active]
    if not reached[-1].all():
        return None
    return int(reached.argmax(axis=0).max()) + 1


class _Search:
    def __init__(self, weights, residual, tol, incumbent, node_limit):
        self.w = weights
        self.tol = tol
        self.node_limit = node_limit
        self.nodes = 0
        self.best_rows = list(incumbent)
        self.best_k = len(incumbent)
        L = weights.shape[0]
        self.suffix_sum = np.vstack([weights[::-1].cumsum(axis=0)[::-1],
                                     np.zeros((1, weights.shape[1]))])
        self._tables = {}
        self._lazy = L * L * weights.shape[1] > _TABLE_CELLS
        self.start = residual

    def _prefix_table(self, i):
        # cumulative sums of remaining weights sorted descending, per constraint
        if self._lazy:
            return np.cumsum(-np.sort(-self.w[i:], axis=0), axis=0)
        table = self._tables.get(i)
        if table is None:
            table = np.cumsum(-np.sort(-self.w[i:], axis=0), axis=0)
            self._tables[i] = table
        return table

    def lower_bound(self, i, residual, pos):
        r = residual[pos]
        need = r - self.tol[pos]
        if np.any(self.suffix_sum[i, pos] < need):
            return None
        per_constraint = (self._prefix_table(i)[:, pos] >= need).argmax(axis=0) + 1
        bound = int(per_constraint.max())
        # every item lowers the summed residual by at most sum(min(w, r))
        contrib = np.sort(np.minimum(self.w[i:, pos], r).sum(axis=1))[::-1]
        total = np.cumsum(contrib)
        hit = np.nonzero(total >= need.sum())[0]
        if not hit.size:
            return None
        return max(bound, int(hit[0]) + 1)

    def run(self):
        self._dfs(0, self.start, [])
        return self.best_rows

    def _dfs(self, i, residual, chosen):
        self.nodes += 1
        if self.nodes > self.node_limit:
            raise SolverBudgetExceeded(
                f"covering search exceeded {self.node_limit} node expansions"
            )
        pos = residual > self.tol
        depth = len(chosen)
        if not pos.any():
            if depth < self.best_k:
                self.best_k = depth
                self.best_rows = list(chosen)
            return
        if i >= self.w.shape[0] or depth + 1 >= self.best_k:
            return
        lb = self.lower_bound(i, residual, pos)
        if lb is None or depth + lb >= self.best_k:
            return
        if np.any(self.w[i, pos] > 0):
            chosen.append(i)
            self._dfs(i + 1, residual - self.w[i], chosen)
            chosen.pop()
        self._dfs(i + 1, residual, chosen)


def solve_exact(program: CoveringProgram, node_limit: int = DEFAULT_NODE_LIMIT) -> CoverSolution:
    """Minimum-cardinality cover by depth-first branch and bound.

    Items are branched in order of descending maximum weight (include
    first), the greedy cover seeds the incumbent, and a node is pruned when
    its depth plus an admissible bound on the items still required reaches
    the incumbent size. The search is exhaustive, so the result is optimal;
    running out of ``node_limit`` raises instead of returning a guess.
    """
    tol_all = program.tolerances
    active = program.thresholds > tol_all
    if not active.any():
        return CoverSolution(0, ())
    weights = program.weights[:, active]
    thresholds = program.thresholds[active]
    tol = tol_all[active]
    if np.any(weights.sum(axis=0) < thresholds - tol):
        return CoverSolution(None)

    peak = weights.max(axis=1)
    useful = np.nonzero(peak > 0)[0]
    order = useful[np.argsort(-peak[useful], kind="stable")]
    ordered = weights[order]

    greedy = _greedy_rows(ordered, thresholds, tol)
    assert greedy is not None  # full selection is feasible
    search = _Search(ordered, thresholds.astype(np.float64), tol, greedy, node_limit)
    rows = search.run()
    return CoverSolution(len(rows), _witness(program, order[rows]), search.nodes)
