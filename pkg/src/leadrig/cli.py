"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 resource limit (solver or
enumeration budget), 4 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from leadrig import oracle, stats
from leadrig.aggregation import ROBUSTNESS_RULES, Rule, condorcet_winner, weak_condorcet_winners
from leadrig.bribery import bst_to_bribery, min_cost_shift_bribery
from leadrig.covering import DEFAULT_NODE_LIMIT
from leadrig.errors import InputError, ResourceLimitError
from leadrig.ingest import best_per_namespace, build_matrix, parse_scores
from leadrig.robustness import DEFAULT_ORACLE_LIMIT, RobustnessResult, all_targets
from leadrig.scores import DEFAULT_CAPS, GainCaps, ScoreMatrix

EXIT_OK, EXIT_INPUT, EXIT_RESOURCE, EXIT_VERIFY = 0, 2, 3, 4
CSV_COLUMNS = ["target", "rule", "k", "k_fraction", "normalized", "witness",
               "deficit", "lower_bound", "feasible"]


@dataclass
class RunConfig:
    input: Optional[Path]
    format: Optional[str]
    rules: tuple[Rule, ...]
    target: str
    caps: Optional[Path]
    seed: Optional[int]
    resamples: int
    k_thresholds: tuple[int, ...]
    dedup_namespaces: bool
    output: Optional[Path]
    report_format: str
    oracle_limit: int
    node_limit: int
    workers: int


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return None
        return value
    if isinstance(value, Rule):
        return value.value
    return value


def _dump_json(payload) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _write(text: str, output: Optional[Path]) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text, encoding="utf-8")


# -- loading -----------------------------------------------------------------

def _load(config: RunConfig) -> tuple[ScoreMatrix, dict]:
    if config.input is None:
        raise InputError("--input is required")
    matrix, report = build_matrix(parse_scores(config.input, config.format))
    info = report.to_dict()
    if config.dedup_namespaces:
        matrix = best_per_namespace(matrix)
        info["dedup_namespaces"] = True
        info["n_after_dedup"] = matrix.n
    return matrix, info


def _read_caps(path: Path) -> dict:
    """Caps file -> {model or None: {task: cap}}; None applies to every target."""
    text = path.read_text(encoding="utf-8")
    out: dict = {}
    if path.suffix.lower() == ".json":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise InputError(f"{path}: caps JSON must be a mapping")
        for key, value in data.items():
            if isinstance(value, dict):
                out[key] = {t: float(v) for t, v in value.items()}
            else:
                out.setdefault(None, {})[key] = float(value)
        return out
    reader = csv.DictReader(io.StringIO(text))
    fields = reader.fieldnames or []
    if fields not in (["task", "cap"], ["model", "task", "cap"]):
        raise InputError(f"{path}: caps CSV header must be 'task,cap' or 'model,task,cap'")
    for row in reader:
        try:
            cap = float(row["cap"])
        except (TypeError, ValueError):
            raise InputError(f"{path}:{reader.line_num}: bad cap {row.get('cap')!r}") from None
        out.setdefault(row.get("model"), {})[row["task"]] = cap
    return out


def _caps_policy(config: RunConfig):
    if config.caps is None:
        return DEFAULT_CAPS
    table = _read_caps(config.caps)

    def policy(matrix: ScoreMatrix, target: str) -> GainCaps:
        wanted = {**table.get(None, {}), **table.get(target, {})}
        unknown = set(wanted) - set(matrix.task_ids)
        if unknown:
            raise InputError(f"caps file names unknown tasks {sorted(unknown)}")
        if not wanted:
            return DEFAULT_CAPS
        headroom = 1.0 - matrix.row(target)
        values = [min(wanted.get(d, headroom[j]), headroom[j])
                  for j, d in enumerate(matrix.task_ids)]
        if any(v < 0 for v in values):
            raise InputError("gain caps must be nonnegative")
        return GainCaps(tuple(values))

    return policy


def _targets(config: RunConfig, matrix: ScoreMatrix) -> list[str]:
    if config.target.upper() == "ALL":
        return list(matrix.model_ids)
    matrix.model_index(config.target)
    return [config.target]


def _compute(config: RunConfig, matrix: ScoreMatrix) -> dict[Rule, list[RobustnessResult]]:
    targets = _targets(config, matrix)
    policy = _caps_policy(config)
    return {
        rule: all_targets(matrix, rule, policy, node_limit=config.node_limit,
                          workers=config.workers, targets=targets)
        for rule in config.rules
    }


def _scalar_deficit(result: RobustnessResult):
    key = {Rule.MEAN: "mean", Rule.MEDIAN: "median", Rule.WINRATE: "win",
           Rule.MAJORITY: "majority"}[result.rule]
    return result.deficit.get(key)


def _result_row(result: RobustnessResult) -> dict:
    return {
        "target": result.target,
        "rule": result.rule.value,
        "k": result.k,
        "k_fraction": result.k_fraction,
        "normalized": result.normalized,
        "witness": list(result.witness),
        "deficit": _scalar_deficit(result),
        "deficit_detail": result.deficit,
        "reference": result.reference,
        "lower_bound": result.lower_bound,
        "feasible": result.feasible,
    }


# -- commands ----------------------------------------------------------------

def cmd_robustness(config: RunConfig) -> int:
    matrix, info = _load(config)
    results = _compute(config, matrix)
    per_target = zip(*(results[rule] for rule in config.rules))
    rows = [_result_row(r) for group in per_target for r in group]
    if config.report_format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n",
                                extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            flat = dict(row)
            flat["witness"] = ";".join(row["witness"])
            for key in ("k", "k_fraction", "normalized", "deficit", "lower_bound"):
                if flat[key] is None:
                    flat[key] = ""
            flat["feasible"] = "true" if row["feasible"] else "false"
            writer.writerow(flat)
        _write(buf.getvalue(), config.output)
    else:
        _write(_dump_json({"preprocessing": info, "n": matrix.n, "m": matrix.m,
                           "rules": [r.value for r in config.rules], "results": rows}),
               config.output)
    return EXIT_OK


def _k_values(results: Sequence[RobustnessResult]) -> np.ndarray:
    return np.array([math.inf if r.k is None else r.k for r in results], dtype=np.float64)


def _grouped(matrix: ScoreMatrix, targets: Sequence[str], values: np.ndarray) -> dict:
    groups: dict[str, list[float]] = {}
    for a, v in zip(targets, values):
        groups.setdefault(matrix.namespaces[matrix.model_index(a)], []).append(float(v))
    return groups


def _ci(summary: stats.BootstrapSummary) -> dict:
    return {"point": summary.point, "lower": summary.lower, "upper": summary.upper}


def _rule_summary(config: RunConfig, matrix: ScoreMatrix, targets: list[str],
                  results: list[RobustnessResult]) -> dict:
    m = matrix.m
    ks = _k_values(results)
    groups = _grouped(matrix, targets, ks)
    seed = 0 if config.seed is None else config.seed
    out = {
        "targets": len(results),
        "infeasible": int(np.isinf(ks).sum()),
        "median_k": float(np.median(ks)),
        "median_k_pct": float(np.median(ks)) / m * 100.0,
    }
    median_ci = stats.bootstrap_ci(groups, lambda v: float(np.median(v)),
                                   config.resamples, seed, name="median_k")
    out["median_k_ci"] = _ci(median_ci)
    fractions = {}
    for K in config.k_thresholds:
        ci = stats.bootstrap_ci(groups, lambda v, K=K: 100.0 * float(np.mean(v <= K)),
                                config.resamples, seed, name=f"pct_k_le_{K}")
        fractions[str(K)] = _ci(ci)
    out["pct_k_le"] = fractions
    finite = ks[np.isfinite(ks)]
    out["ecdf_k_fraction"] = (
        [{"x": x, "F": f} for x, f in stats.ecdf(finite / m)] if finite.size else []
    )
    norm = [(a, r.normalized) for a, r in zip(targets, results) if r.normalized is not None]
    out["median_normalized"] = float(np.median([v for _, v in norm])) if norm else None
    if len(norm) >= 2:
        means = matrix.scores.mean(axis=1)
        x = [means[matrix.model_index(a)] for a, _ in norm]
        out["spearman_mean_vs_normalized"] = stats.spearman_rho(x, [v for _, v in norm])
    else:
        out["spearman_mean_vs_normalized"] = None
    return out


def cmd_summary(config: RunConfig) -> int:
    if config.seed is None:
        raise InputError("--seed is required for bootstrap summaries")
    matrix, info = _load(config)
    targets = _targets(config, matrix)
    results = _compute(config, matrix)
    payload = {
        "preprocessing": info,
        "n": matrix.n,
        "m": matrix.m,
        "seed": config.seed,
        "resamples": config.resamples,
        "bootstrap_method": stats.BOOTSTRAP_METHOD,
        "condorcet": {
            "strict_winner_after_tie_break": condorcet_winner(matrix),
            "weak_winners": weak_condorcet_winners(matrix),
        },
        "rules": {rule.value: _rule_summary(config, matrix, targets, results[rule])
                  for rule in config.rules},
    }
    _write(_dump_json(payload), config.output)
    return EXIT_OK


def cmd_compare(config: RunConfig) -> int:
    if len(config.rules) < 2:
        raise InputError("compare needs at least two rules")
    matrix, info = _load(config)
    results = _compute(config, matrix)
    k_by_rule = {rule.value: [r.k for r in results[rule]] for rule in config.rules}
    comparisons = stats.paired_rule_comparison(k_by_rule, matrix.m)
    payload = {
        "preprocessing": info,
        "n": matrix.n,
        "m": matrix.m,
        "wilcoxon_method": stats.WILCOXON_METHOD,
        "difference": "k(rule_a) - k(rule_b) per target",
        "pairs": [
            {
                "rule_a": c.rule_a,
                "rule_b": c.rule_b,
                "median_difference_tasks": c.median_difference,
                "median_difference_pp": c.median_difference_pp,
                "p_value": c.p_value,
                "p_holm": c.p_adjusted,
                "n_pairs": c.n_pairs,
                "excluded_infeasible": c.excluded,
                "degenerate": c.degenerate,
            }
            for c in comparisons
        ],
    }
    _write(_dump_json(payload), config.output)
    return EXIT_OK


def _read_costs(path: Optional[Path], matrix: ScoreMatrix) -> list[float]:
    if path is None:
        return [1.0] * matrix.m
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        table = {k: float(v) for k, v in json.loads(text).items()}
    else:
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != ["task", "cost"]:
            raise InputError(f"{path}: costs CSV header must be 'task,cost'")
        table = {row["task"]: float(row["cost"]) for row in reader}
    missing = [d for d in matrix.task_ids if d not in table]
    if missing:
        raise InputError(f"costs file misses tasks {missing}")
    return [table[d] for d in matrix.task_ids]


def cmd_bribery(config: RunConfig, costs: Optional[Path], budget: float) -> int:
    matrix, info = _load(config)
    if config.target.upper() == "ALL":
        raise InputError("bribery needs a single --target")
    instance = bst_to_bribery(matrix, config.target, _read_costs(costs, matrix), budget)
    outcome = min_cost_shift_bribery(instance, limit=config.oracle_limit)
    payload = {
        "preprocessing": info,
        "instance": {
            "candidates": list(instance.profile.candidates),
            "voters": list(matrix.task_ids),
            "votes": [list(v) for v in instance.profile.votes],
            "preferred": instance.preferred,
            "costs": list(instance.costs),
            "budget": instance.budget,
            "rule": "borda",
        },
        "min_cost": outcome.cost,
        "bribed_voters": [matrix.task_ids[v] for v in outcome.bribed],
        "feasible_within_budget": outcome.within_budget,
    }
    _write(_dump_json(payload), config.output)
    return EXIT_OK


def cmd_oracle_check(config: RunConfig, count: int, max_models: int, max_tasks: int,
                     restricted: int) -> int:
    if max_tasks > config.oracle_limit:
        raise InputError(f"--max-tasks {max_tasks} exceeds the oracle limit {config.oracle_limit}")
    if max_models < 2 or max_tasks < 1 or count < 1 or not 0 <= restricted <= count:
        raise InputError("invalid oracle-check sizes")
    seed = 0 if config.seed is None else config.seed
    agree = {r.value: 0 for r in ROBUSTNESS_RULES}
    total = {r.value: 0 for r in ROBUSTNESS_RULES}
    mismatches = []
    for inst in oracle.instances(seed, count, max_models, max_tasks, restricted):
        found = oracle.check(inst, config.oracle_limit)
        bad = {mm.rule for mm in found}
        for rule in inst.rules:
            total[rule.value] += 1
            if rule not in bad:
                agree[rule.value] += 1
        for mm in found:
            mismatches.append({"rule": mm.rule.value, "closed_form": mm.closed_form,
                               "enumerated": mm.enumerated, "instance": inst.to_dict()})
    payload = {"seed": seed, "instances": count, "restricted_caps": restricted,
               "agreement": agree, "checked": total, "mismatches": mismatches}
    _write(_dump_json(payload), config.output)
    return EXIT_VERIFY if mismatches else EXIT_OK


# -- argument parsing --------------------------------------------------------

def _csv_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _add_common(p: argparse.ArgumentParser, rules_default: str) -> None:
    p.add_argument("--input", type=Path, help="score file (CSV long/wide or JSON)")
    p.add_argument("--format", choices=["csv", "json"], help="input format (default: by suffix)")
    p.add_argument("--rules", default=rules_default,
                   help="comma-separated subset of mean,median,winrate,majority")
    p.add_argument("--target", default="ALL", help="model id or ALL")
    p.add_argument("--caps", type=Path, help="per-task gain caps (CSV or JSON); default score-to-1")
    p.add_argument("--seed", type=int, help="RNG seed (required by summary; oracle-check defaults to 0)")
    p.add_argument("--resamples", type=int, default=10_000, help="bootstrap resamples")
    p.add_argument("--k-thresholds", default="5,10",
                   help="comma-separated K for the share of targets with k <= K")
    p.add_argument("--dedup-namespaces", action="store_true",
                   help="keep only the best-mean model per namespace")
    p.add_argument("--output", type=Path, help="write the report here instead of stdout")
    p.add_argument("--report-format", choices=["json", "csv"], default="json")
    p.add_argument("--oracle-limit", type=int, default=DEFAULT_ORACLE_LIMIT,
                   help="largest task count the enumeration oracle accepts")
    p.add_argument("--node-limit", type=int, default=DEFAULT_NODE_LIMIT,
                   help="branch-and-bound node budget per target (exit 3 when exceeded)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leadrig",
        description="Minimum benchmark-specific training needed to top a leaderboard.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    all_rules = ",".join(r.value for r in ROBUSTNESS_RULES)
    _add_common(sub.add_parser("robustness", help="per-target robustness table"), all_rules)
    _add_common(sub.add_parser("summary", help="medians, K-fractions, bootstrap CIs, ECDF"),
                all_rules)
    _add_common(sub.add_parser("compare", help="paired Wilcoxon + Holm across rules"), all_rules)
    p = sub.add_parser("bribery", help="Borda shift-bribery view of one target")
    _add_common(p, "borda")
    p.add_argument("--costs", type=Path, help="per-task costs (CSV task,cost or JSON)")
    p.add_argument("--budget", type=float, default=0.0, help="bribery budget")
    p = sub.add_parser("oracle-check", help="closed forms vs. brute-force enumeration")
    _add_common(p, all_rules)
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--max-models", type=int, default=6)
    p.add_argument("--max-tasks", type=int, default=12)
    p.add_argument("--restricted", type=int, default=50,
                   help="how many instances use random restricted caps")
    return parser


def _config(args) -> RunConfig:
    rules = tuple(Rule.parse(r) for r in _csv_list(args.rules))
    if not rules:
        raise InputError("--rules must name at least one rule")
    if args.command != "bribery" and Rule.BORDA in rules:
        raise InputError("robustness is computed for mean, median, winrate and majority")
    if args.resamples < 1:
        raise InputError("--resamples must be >= 1")
    try:
        thresholds = tuple(int(x) for x in _csv_list(args.k_thresholds))
    except ValueError:
        raise InputError(f"bad --k-thresholds {args.k_thresholds!r}") from None
    try:
        workers = int(os.environ.get("LEADRIG_THREADS", "1"))
    except ValueError:
        raise InputError("LEADRIG_THREADS must be an integer") from None
    return RunConfig(
        input=args.input, format=args.format, rules=rules, target=args.target,
        caps=args.caps, seed=args.seed, resamples=args.resamples,
        k_thresholds=thresholds, dedup_namespaces=args.dedup_namespaces,
        output=args.output, report_format=args.report_format,
        oracle_limit=args.oracle_limit, node_limit=args.node_limit,
        workers=max(1, workers),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config(args)
        if args.command == "robustness":
            return cmd_robustness(config)
        if args.command == "summary":
            return cmd_summary(config)
        if args.command == "compare":
            return cmd_compare(config)
        if args.command == "bribery":
            return cmd_bribery(config, args.costs, args.budget)
        return cmd_oracle_check(config, args.instances, args.max_models, args.max_tasks,
                                args.restricted)
    except InputError as exc:
        print(f"leadrig: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ResourceLimitError, MemoryError) as exc:
        print(f"leadrig: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"leadrig: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
