"""Experiment harness: seeded replicates, sweeps, metrics, CSV emission.

Every run row is a pure function of its seeds, so re-running a sweep with the
same configuration produces a byte-identical file.  Wall-clock timing is
therefore left blank unless explicitly requested.  Within one replicate all
algorithms share the weak oracle's counter-based substreams, which makes
strong-call comparisons exactly paired.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .certify import ALGORITHMS, CertificationReport
from .core import (
    Instance,
    ambiguous_set,
    check_lemma1,
    coverage_event_holds,
    near_tie_mass,
    true_top_k,
)
from .instances import GapInstanceSpec, PackingSpec, generate_gap_instance, generate_packing_instance
from .oracles import BudgetExceededError, OracleStats, StrongOracle, WeakOracle, snapshot_and_reset
from .validation import check_int

EXPERIMENTS = ("scaling_n", "scaling_k", "hardness", "lower_bound", "coverage")

COLUMNS = (
    "kind",
    "status",
    "experiment",
    "algorithm",
    "n",
    "k",
    "gap",
    "sigma",
    "n_weak",
    "weak_budget",
    "w_min",
    "w_max",
    "delta",
    "seed",
    "replicates",
    "strong_calls",
    "strong_calls_ci95",
    "weak_pulls",
    "ambiguous_initial",
    "ambiguous_final",
    "eps_max",
    "eps_max_ambiguous",
    "m_eps",
    "m_4eps",
    "rho",
    "correct",
    "coverage_held",
    "wall_ms",
    "note",
)

BASE_DEFAULTS = {
    "n": 1000,
    "k": 100,
    "gap": 0.05,
    "delta": 0.05,
    "delta_weak_fraction": 1.0,
    "n_weak": 12,
    "weak_budget": None,
    "w_min": 6,
    "w_max": None,
    "near_ties": None,
    "tail_fraction": 0.35,
    "oracle.noise": "gaussian",
    "oracle.sigma": 0.1,
    "oracle.seed": 0,
    "oracle.strong_cap": None,
    "ci.method": "subgaussian",
    "ci.sigma": None,
    "ci.range": 1.0,
    "ci.clamp": False,
}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentRow:
    """One CSV record: either a seeded run, a summary, or an error marker."""

    kind: str = "run"
    status: str = "ok"
    experiment: str = ""
    algorithm: str = ""
    n: Optional[int] = None
    k: Optional[int] = None
    gap: Optional[float] = None
    sigma: Optional[float] = None
    n_weak: Optional[int] = None
    weak_budget: Optional[int] = None
    w_min: Optional[int] = None
    w_max: Optional[int] = None
    delta: Optional[float] = None
    seed: Optional[int] = None
    replicates: Optional[int] = None
    strong_calls: Optional[float] = None
    strong_calls_ci95: Optional[float] = None
    weak_pulls: Optional[float] = None
    ambiguous_initial: Optional[float] = None
    ambiguous_final: Optional[float] = None
    eps_max: Optional[float] = None
    eps_max_ambiguous: Optional[float] = None
    m_eps: Optional[float] = None
    m_4eps: Optional[float] = None
    rho: Optional[float] = None
    correct: Optional[object] = None
    coverage_held: Optional[object] = None
    wall_ms: Optional[float] = None
    note: str = ""

    def record(self) -> list[str]:
        return [_fmt(getattr(self, column)) for column in COLUMNS]

    def as_dict(self) -> dict:
        return {column: getattr(self, column) for column in COLUMNS}


def compute_metrics(report: CertificationReport, instance: Instance, truth=None) -> dict:
    """Fill ground-truth metrics for one report.

    Asserts the ambiguity bound |A0| <= m(4 eps_max) whenever the coverage
    event holds; a violation would mean an implementation bug, not bad luck.
    """
    if truth is None:
        truth = true_top_k(instance)
    correct = tuple(int(x) for x in truth) == report.selected
    state = report.weak_state
    coverage = coverage_event_holds(instance, state)
    m_eps = near_tie_mass(instance, report.eps_max)
    m_4eps = near_tie_mass(instance, 4.0 * report.eps_max)
    if coverage and not check_lemma1(instance, state):
        raise RuntimeError("ambiguity bound violated on a covered run")
    if coverage and report.ambiguous_initial > m_4eps:
        raise RuntimeError("initial ambiguous set exceeds m(4 eps_max) on a covered run")
    return {
        "correct": correct,
        "coverage_held": coverage,
        "m_eps": m_eps,
        "m_4eps": m_4eps,
        "rho": report.strong_calls / m_eps,
    }


def _certifier(name: str, k: int, n: int, cfg: dict):
    ci_sigma = cfg["ci.sigma"] if cfg["ci.sigma"] is not None else cfg["oracle.sigma"]
    common = dict(
        delta=cfg["delta"],
        ci_method=cfg["ci.method"],
        ci_sigma=ci_sigma,
        ci_range=cfg["ci.range"],
        delta_weak_fraction=cfg["delta_weak_fraction"],
    )
    if name == "brute":
        return ALGORITHMS[name](k)
    if name == "ace_w":
        budget = cfg["weak_budget"] if cfg["weak_budget"] is not None else cfg["n_weak"] * n
        return ALGORITHMS[name](
            k, weak_budget=budget, w_min=cfg["w_min"], w_max=cfg["w_max"], **common
        )
    return ALGORITHMS[name](k, n_weak=cfg["n_weak"], **common)


@dataclass
class ReplicateResult:
    algorithm: str
    report: Optional[CertificationReport]
    stats: Optional[OracleStats]
    wall_ms: Optional[float]
    error: Optional[str] = None


def run_replicate(
    instance: Instance,
    seed: int,
    algorithms: Sequence[str],
    cfg: dict,
    initial_state=None,
    timing: bool = False,
) -> list[ReplicateResult]:
    """Run several algorithms on one instance with shared weak substreams."""
    weak = None
    if initial_state is None:
        weak = WeakOracle(
            instance,
            noise=cfg["oracle.noise"],
            sigma=cfg["oracle.sigma"],
            seed=seed,
            clamp=cfg["ci.clamp"],
        )
    strong = StrongOracle(instance, cap=cfg["oracle.strong_cap"])
    results = []
    for name in algorithms:
        certifier = _certifier(name, instance.k, instance.n, cfg)
        start = time.perf_counter()
        try:
            certifier.fit(weak, strong, initial_state=initial_state)
        except (BudgetExceededError, ValueError) as err:
            snapshot_and_reset(weak, strong)
            results.append(ReplicateResult(name, None, None, None, error=str(err)))
            continue
        wall = (time.perf_counter() - start) * 1e3
        stats = snapshot_and_reset(weak, strong)
        results.append(ReplicateResult(name, certifier.report_, stats, wall if timing else None))
    return results


@dataclass
class SweepSpec:
    """A parameter sweep: one experiment, a grid, seeded replicates."""

    experiment: str
    grid: Sequence
    replicates: int = 10
    base: dict = field(default_factory=dict)
    algorithms: Sequence[str] = ("stc", "ace", "ace_w", "ta")
    base_seed: int = 0
    timing: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not self.grid:
            raise ValueError("grid must be non-empty")
        check_int(self.replicates, "replicates", minimum=1)
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {name!r}")

    def config(self) -> dict:
        cfg = dict(BASE_DEFAULTS)
        cfg.update(self.base)
        return cfg


def _point_config(spec: SweepSpec, point) -> dict:
    cfg = spec.config()
    if spec.experiment == "scaling_n":
        cfg["n"] = int(point)
    elif spec.experiment == "scaling_k":
        cfg["k"] = int(point)
    elif spec.experiment == "hardness":
        cfg["gap"] = float(point)
    elif spec.experiment == "lower_bound":
        cfg["m"] = int(point)
    elif spec.experiment == "coverage":
        cfg["n"] = int(point)
    return cfg


def _point_instance(spec: SweepSpec, cfg: dict, seed: int):
    if spec.experiment == "lower_bound":
        pack = PackingSpec(n=cfg["n"], k=cfg["k"], m=cfg["m"])
        return generate_packing_instance(pack, seed=seed)
    gap_spec = GapInstanceSpec(
        n=cfg["n"],
        k=cfg["k"],
        gap=cfg["gap"],
        near_ties=cfg["near_ties"],
        tail_fraction=cfg["tail_fraction"],
        seed=seed,
    )
    return generate_gap_instance(gap_spec), None


def _run_row(spec, cfg, point, seed, result: ReplicateResult, instance, truth) -> ExperimentRow:
    row = ExperimentRow(
        kind="run",
        experiment=spec.experiment,
        algorithm=result.algorithm,
        n=instance.n,
        k=instance.k,
        gap=cfg["gap"],
        sigma=cfg["oracle.sigma"],
        n_weak=cfg["n_weak"],
        weak_budget=cfg["weak_budget"] if cfg["weak_budget"] is not None else cfg["n_weak"] * instance.n,
        w_min=cfg["w_min"],
        w_max=cfg["w_max"],
        delta=cfg["delta"],
        seed=seed,
        wall_ms=result.wall_ms,
    )
    if result.error is not None:
        row.status = "error"
        row.note = result.error
        return row
    report = result.report
    metrics = compute_metrics(report, instance, truth)
    row.strong_calls = report.strong_calls
    row.weak_pulls = report.weak_pulls
    row.ambiguous_initial = report.ambiguous_initial
    row.ambiguous_final = report.ambiguous_final
    row.eps_max = report.eps_max
    row.eps_max_ambiguous = report.eps_max_ambiguous
    row.m_eps = metrics["m_eps"]
    row.m_4eps = metrics["m_4eps"]
    row.rho = metrics["rho"]
    row.correct = metrics["correct"]
    row.coverage_held = metrics["coverage_held"]
    return row


def _coverage_rows(spec: SweepSpec, cfg, point, seed, instance) -> list[ExperimentRow]:
    from .confidence import DeltaBudget, build_fixed_intervals, ci_method_from_config

    weak = WeakOracle(
        instance, noise=cfg["oracle.noise"], sigma=cfg["oracle.sigma"], seed=seed, clamp=cfg["ci.clamp"]
    )
    ci_sigma = cfg["ci.sigma"] if cfg["ci.sigma"] is not None else cfg["oracle.sigma"]
    method = ci_method_from_config(cfg["ci.method"], ci_sigma, cfg["ci.range"])
    budget = DeltaBudget.split(cfg["delta"], instance.n, cfg["delta_weak_fraction"])
    state = build_fixed_intervals(weak, cfg["n_weak"], budget, method)
    row = ExperimentRow(
        kind="run",
        experiment="coverage",
        algorithm="coverage",
        n=instance.n,
        k=instance.k,
        gap=cfg["gap"],
        sigma=cfg["oracle.sigma"],
        n_weak=cfg["n_weak"],
        delta=cfg["delta"],
        seed=seed,
        strong_calls=0,
        weak_pulls=weak.total_pulls,
        eps_max=float(state.radius().max()),
        coverage_held=coverage_event_holds(instance, state),
    )
    return [row]


def run_sweep(spec: SweepSpec) -> list[ExperimentRow]:
    """Run the sweep and return run rows followed by per-point summaries."""
    rows: list[ExperimentRow] = []
    run_rows: dict[tuple, list[ExperimentRow]] = {}
    for point in spec.grid:
        cfg = _point_config(spec, point)
        for r in range(spec.replicates):
            seed = spec.base_seed + r
            try:
                instance, initial_state = _point_instance(spec, cfg, seed)
            except (ValueError, TypeError) as err:
                row = ExperimentRow(
                    kind="run",
                    status="error",
                    experiment=spec.experiment,
                    algorithm="*",
                    seed=seed,
                    note=str(err),
                )
                rows.append(row)
                continue
            if spec.experiment == "coverage":
                point_rows = _coverage_rows(spec, cfg, point, seed, instance)
            else:
                truth = true_top_k(instance)
                results = run_replicate(
                    instance,
                    seed,
                    spec.algorithms,
                    cfg,
                    initial_state=initial_state,
                    timing=spec.timing,
                )
                point_rows = [
                    _run_row(spec, cfg, point, seed, result, instance, truth)
                    for result in results
                ]
            rows.extend(point_rows)
            for row in point_rows:
                run_rows.setdefault((point, row.algorithm), []).append(row)
    for (point, algorithm), group in run_rows.items():
        rows.append(_summary_row(spec, point, algorithm, group))
    return rows


def _summary_row(spec: SweepSpec, point, algorithm: str, group: list[ExperimentRow]) -> ExperimentRow:
    ok = [row for row in group if row.status == "ok"]
    row = ExperimentRow(
        kind="summary",
        experiment=spec.experiment,
        algorithm=algorithm,
        replicates=len(group),
        note=f"point={point}",
    )
    if not ok:
        row.status = "error"
        return row
    template = ok[0]
    for name in ("n", "k", "gap", "sigma", "n_weak", "weak_budget", "w_min", "w_max", "delta"):
        setattr(row, name, getattr(template, name))
    calls = np.asarray([r.strong_calls for r in ok], dtype=np.float64)
    row.strong_calls = float(calls.mean())
    if calls.size > 1:
        row.strong_calls_ci95 = float(1.96 * calls.std(ddof=1) / np.sqrt(calls.size))
    else:
        row.strong_calls_ci95 = 0.0
    row.weak_pulls = float(np.mean([r.weak_pulls for r in ok]))
    if ok[0].rho is not None:
        row.rho = float(np.mean([r.rho for r in ok]))
        row.ambiguous_initial = float(np.mean([r.ambiguous_initial for r in ok]))
        row.eps_max = float(np.mean([r.eps_max for r in ok]))
    if ok[0].correct is not None:
        row.correct = float(np.mean([1.0 if r.correct else 0.0 for r in ok]))
    if ok[0].coverage_held is not None:
        row.coverage_held = float(np.mean([1.0 if r.coverage_held else 0.0 for r in ok]))
    return row


def write_rows(rows: Sequence[ExperimentRow], path, fmt: str = "csv") -> None:
    """Write rows as CSV (RFC-4180 quoting) or JSON lines."""
    import csv as _csv

    if fmt == "csv":
        with open(path, "w", newline="") as handle:
            writer = _csv.writer(handle)
            writer.writerow(COLUMNS)
            for row in rows:
                writer.writerow(row.record())
    elif fmt == "jsonl":
        with open(path, "w") as handle:
            for row in rows:
                handle.write(json.dumps(row.as_dict()) + "\n")
    else:
        raise ValueError(f"format must be 'csv' or 'jsonl', got {fmt!r}")


def rows_to_csv_text(rows: Sequence[ExperimentRow]) -> str:
    import csv as _csv
    import io

    buffer = io.StringIO()
    writer = _csv.writer(buffer, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow(row.record())
    return buffer.getvalue()


def verify_invariants(seeds: Sequence[int], cfg: Optional[dict] = None) -> list[str]:
    """Run the structural invariant battery over a seed range.

    Checks, per seed: one-shot strong calls equal the ambiguous-set size;
    adaptive strong calls never exceed one-shot calls and stay inside the
    initial ambiguous set; traces are duplicate-free; the adaptive weak phase
    respects its budget and per-item cap; covered runs recover the exact
    top-k and satisfy the ambiguity bound.  Returns human-readable problem
    strings; empty means all invariants hold.
    """
    full = dict(BASE_DEFAULTS)
    full.update(cfg or {})
    problems: list[str] = []
    algorithms = ("stc", "ace", "ace_w", "ta")
    for seed in seeds:
        spec = GapInstanceSpec(
            n=full["n"],
            k=full["k"],
            gap=full["gap"],
            near_ties=full["near_ties"],
            tail_fraction=full["tail_fraction"],
            seed=seed,
        )
        instance = generate_gap_instance(spec)
        truth = tuple(int(x) for x in true_top_k(instance))
        results = run_replicate(instance, seed, algorithms, full)
        by_name = {res.algorithm: res for res in results}
        for res in results:
            if res.error is not None:
                problems.append(f"seed {seed}: {res.algorithm} failed: {res.error}")
                continue
            report = res.report
            if len(set(report.trace)) != len(report.trace):
                problems.append(f"seed {seed}: {res.algorithm} repeated a strong query")
            if report.strong_calls != len(report.trace):
                problems.append(f"seed {seed}: {res.algorithm} miscounted strong calls")
            metrics = compute_metrics(report, instance, np.asarray(truth))
            if metrics["coverage_held"] and report.selected != truth:
                problems.append(f"seed {seed}: {res.algorithm} wrong set on a covered run")
        stc_res, ace_res = by_name.get("stc"), by_name.get("ace")
        if stc_res and stc_res.report is not None:
            if stc_res.report.strong_calls != stc_res.report.ambiguous_initial:
                problems.append(f"seed {seed}: one-shot strong calls != |ambiguous set|")
        if stc_res and ace_res and stc_res.report is not None and ace_res.report is not None:
            if ace_res.report.strong_calls > stc_res.report.strong_calls:
                problems.append(f"seed {seed}: adaptive used more strong calls than one-shot")
            amb0 = set(int(x) for x in ambiguous_set(ace_res.report.weak_state, instance.k))
            if not set(ace_res.report.trace) <= amb0:
                problems.append(f"seed {seed}: adaptive queried outside the ambiguous set")
        acew_res = by_name.get("ace_w")
        if acew_res and acew_res.report is not None and acew_res.stats is not None:
            budget = full["weak_budget"] if full["weak_budget"] is not None else full["n_weak"] * instance.n
            w_max = full["w_max"] if full["w_max"] is not None else budget
            if acew_res.stats.weak_pulls_total > budget:
                problems.append(f"seed {seed}: adaptive weak phase overspent its budget")
            if acew_res.stats.weak_pulls_per_item.max() > w_max:
                problems.append(f"seed {seed}: adaptive weak phase exceeded the per-item cap")
    return problems
