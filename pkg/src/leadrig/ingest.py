"""Reading score files and turning raw records into a complete score matrix.

Accepted inputs (UTF-8):

* long CSV with header ``model,task,score``;
* wide CSV whose first header is ``task`` and whose other headers are
  model ids, blank cells meaning missing;
* JSON mapping model id -> {task id -> score}.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Union

import numpy as np

from leadrig.errors import InputError
from leadrig.scores import ScoreMatrix, TieBreakPolicy, LEXICOGRAPHIC, extract_namespace

__all__ = [
    "Record",
    "PreprocessReport",
    "parse_scores",
    "build_matrix",
    "extract_namespace",
    "best_per_namespace",
    "load_matrix",
]


class Record(NamedTuple):
    model: str
    task: str
    score: float


@dataclass
class PreprocessReport:
    dropped_models: list[str] = field(default_factory=list)
    dropped_tasks: list[str] = field(default_factory=list)
    duplicate_counts: dict[str, int] = field(default_factory=dict)
    n: int = 0
    m: int = 0

    def to_dict(self) -> dict:
        return {
            "dropped_models": list(self.dropped_models),
            "dropped_tasks": list(self.dropped_tasks),
            "duplicate_counts": dict(self.duplicate_counts),
            "n": self.n,
            "m": self.m,
        }


def _score(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"{where}: score {text!r} is not a number") from None
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise InputError(f"{where}: score {value} outside [0, 1]")
    return value


def _check_id(value: str, where: str) -> str:
    value = value.strip()
    if not value:
        raise InputError(f"{where}: empty identifier")
    return value


def _parse_csv(path: Path) -> list[Record]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise InputError(f"{path}: duplicate header field")
        records = []
        if header == ["model", "task", "score"]:
            for row in reader:
                where = f"{path}:{reader.line_num}"
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 3:
                    raise InputError(f"{where}: expected 3 fields, got {len(row)}")
                records.append(Record(_check_id(row[0], where), _check_id(row[1], where),
                                      _score(row[2].strip(), where)))
            return records
        if header and header[0] == "task":
            models = [_check_id(h, f"{path}:1") for h in header[1:]]
            for row in reader:
                where = f"{path}:{reader.line_num}"
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise InputError(f"{where}: expected {len(header)} fields, got {len(row)}")
                task = _check_id(row[0], where)
                for model, cell in zip(models, row[1:]):
                    if cell.strip():
                        records.append(Record(model, task, _score(cell.strip(), f"{where} ({model})")))
            return records
    raise InputError(f"{path}: header must be 'model,task,score' or start with 'task'")


def _parse_json(path: Path) -> list[Record]:
    with path.open(encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must map model id -> task scores")
    records = []
    for model, tasks in data.items():
        if not isinstance(tasks, dict):
            raise InputError(f"{path}: entry for {model!r} must be a mapping")
        for task, value in tasks.items():
            where = f"{path} [{model!r}][{task!r}]"
            if value is None:
                continue
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InputError(f"{where}: score must be a number")
            records.append(Record(_check_id(model, where), _check_id(task, where),
                                  _score(str(value), where)))
    return records


def parse_scores(path: Union[str, Path], fmt: Optional[str] = None) -> list[Record]:
    """Read raw (model, task, score) records; format inferred from the suffix if omitted."""
    path = Path(path)
    if fmt is None:
        fmt = "json" if path.suffix.lower() == ".json" else "csv"
    fmt = fmt.lower()
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    if fmt == "csv":
        return _parse_csv(path)
    if fmt == "json":
        return _parse_json(path)
    raise InputError(f"unknown input format {fmt!r}")


def build_matrix(records: Iterable[Record]) -> tuple[ScoreMatrix, PreprocessReport]:
    """Average duplicates, then drop incomplete tasks and models.

    Order: tasks with no scores at all, then models missing any remaining
    task, then tasks still incomplete. Ids are sorted, so the result does
    not depend on record order.
    """
    cells: dict[tuple[str, str], list[float]] = defaultdict(list)
    for rec in records:
        cells[(rec.model, rec.task)].append(float(rec.score))
    if not cells:
        raise InputError("no score records")
    report = PreprocessReport()
    values: dict[tuple[str, str], float] = {}
    for key in sorted(cells):
        vals = sorted(cells[key])
        if len(vals) > 1:
            report.duplicate_counts[f"{key[0]}|{key[1]}"] = len(vals)
        values[key] = math.fsum(vals) / len(vals)

    models = sorted({mdl for mdl, _ in values})
    tasks = sorted({t for _, t in values})
    # blank cells never become records, so an all-missing task only shows up
    # here if a caller passes explicit ids; kept for the fixed drop order
    present = {t: {mdl for mdl in models if (mdl, t) in values} for t in tasks}
    kept_tasks = [t for t in tasks if present[t]]
    report.dropped_tasks.extend(t for t in tasks if not present[t])
    kept_models = [mdl for mdl in models if all((mdl, t) in values for t in kept_tasks)]
    report.dropped_models.extend(mdl for mdl in models if mdl not in set(kept_models))
    if kept_models:
        complete = [t for t in kept_tasks if all((mdl, t) in values for mdl in kept_models)]
        report.dropped_tasks.extend(t for t in kept_tasks if t not in set(complete))
        kept_tasks = complete
    if not kept_models or not kept_tasks:
        raise InputError(
            "no complete model x task matrix remains after filtering: "
            + json.dumps(report.to_dict(), sort_keys=True)
        )
    scores = np.array([[values[(mdl, t)] for t in kept_tasks] for mdl in kept_models])
    report.n, report.m = len(kept_models), len(kept_tasks)
    return ScoreMatrix(kept_models, kept_tasks, scores), report


def best_per_namespace(matrix: ScoreMatrix,
                       policy: TieBreakPolicy = LEXICOGRAPHIC) -> ScoreMatrix:
    """Keep only the highest-mean model of each namespace (ties by ``policy``)."""
    means = matrix.scores.mean(axis=1)
    keys = policy.keys(matrix.model_ids)
    best: dict[str, int] = {}
    for i, ns in enumerate(matrix.namespaces):
        j = best.get(ns)
        if j is None or means[i] > means[j] or (means[i] == means[j] and keys[i] < keys[j]):
            best[ns] = i
    keep = sorted(best.values())
    return matrix.subset([matrix.model_ids[i] for i in keep])


def load_matrix(path: Union[str, Path], fmt: Optional[str] = None):
    return build_matrix(parse_scores(path, fmt))
