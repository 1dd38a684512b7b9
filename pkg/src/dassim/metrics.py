"""Trace reductions: average execution time, energy, EDP, decision
distributions, and scheduler-overhead summaries, plus the sweep CSV export.

"Execution time" of a run is the mean per-frame completion latency
(injection to last task done), the quantity that matters for streaming
workloads; makespan is carried as a secondary column.  EDP is total energy
(task energy plus scheduler overhead energy) times that mean latency; the
operands are fixed and identical for every policy so ratios are meaningful.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .schedulers import FAST


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class Metrics:
    avg_job_exec_time_ns: float
    total_energy_nj: float
    edp_nj_ns: float
    decisions_f: int
    decisions_s: int
    avg_sched_latency_ns: float
    avg_sched_energy_nj: float
    task_energy_nj: float
    sched_energy_nj: float
    makespan_ns: float
    n_jobs: int
    n_tasks: int
    n_invocations: int

    @property
    def frac_f(self) -> float:
        total = self.decisions_f + self.decisions_s
        return self.decisions_f / total if total else 0.0

    @property
    def frac_s(self) -> float:
        total = self.decisions_f + self.decisions_s
        return self.decisions_s / total if total else 0.0


def reduce(trace) -> Metrics:
    """Pure reduction of a completed SimTrace."""
    if not trace.jobs or not trace.decisions:
        raise MetricsError("cannot reduce an empty trace")
    avg_latency = sum(j.latency_ns for j in trace.jobs) / len(trace.jobs)
    total_energy = trace.task_energy_nj + trace.sched_energy_nj
    n_f = sum(1 for d in trace.decisions if d.policy == FAST)
    n_s = len(trace.decisions) - n_f
    n_inv = len(trace.invocations)
    return Metrics(
        avg_job_exec_time_ns=avg_latency,
        total_energy_nj=total_energy,
        edp_nj_ns=total_energy * avg_latency,
        decisions_f=n_f,
        decisions_s=n_s,
        avg_sched_latency_ns=trace.sched_latency_ns / n_inv if n_inv else 0.0,
        avg_sched_energy_nj=trace.sched_energy_nj / n_inv if n_inv else 0.0,
        task_energy_nj=trace.task_energy_nj,
        sched_energy_nj=trace.sched_energy_nj,
        makespan_ns=trace.makespan_ns,
        n_jobs=len(trace.jobs),
        n_tasks=len(trace.tasks),
        n_invocations=n_inv,
    )


@dataclass(frozen=True)
class Comparison:
    speedup: float  # baseline time / candidate time
    edp_ratio: float  # candidate EDP / baseline EDP (0.55 = "45% lower EDP")


def compare(baseline: Metrics, candidate: Metrics) -> Comparison:
    if candidate.avg_job_exec_time_ns == 0 or baseline.edp_nj_ns == 0:
        raise MetricsError("degenerate metrics: zero execution time or EDP")
    return Comparison(
        speedup=baseline.avg_job_exec_time_ns / candidate.avg_job_exec_time_ns,
        edp_ratio=candidate.edp_nj_ns / baseline.edp_nj_ns,
    )


@dataclass(frozen=True)
class SweepResult:
    scenario_id: int
    data_rate_mbps: float
    policy: str
    seed: int
    metrics: Metrics


METRIC_COLUMNS = [
    "scenario_id", "data_rate_mbps", "policy", "seed",
    "avg_job_exec_time_ns", "total_energy_nj", "edp_nj_ns", "makespan_ns",
    "decisions_f", "decisions_s", "frac_f", "frac_s",
    "avg_sched_latency_ns", "avg_sched_energy_nj",
    "task_energy_nj", "sched_energy_nj",
    "n_jobs", "n_tasks", "n_invocations",
]

DECISION_DIST_COLUMNS = [
    "scenario_id", "data_rate_mbps", "policy", "seed",
    "decisions_f", "decisions_s", "frac_f", "frac_s",
]


def _sorted_results(results):
    return sorted(results, key=lambda r: (r.scenario_id, r.data_rate_mbps, r.policy))


def export_csv(results, path, manifest_hash=None):
    """One row per (scenario, rate, policy), sorted by that key.

    Byte-identical for identical results; the optional manifest hash is
    appended as a constant column so outputs carry their provenance.
    """
    columns = list(METRIC_COLUMNS)
    if manifest_hash is not None:
        columns.append("manifest_hash")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in _sorted_results(results):
            m = r.metrics
            row = [
                r.scenario_id, repr(r.data_rate_mbps), r.policy, r.seed,
                repr(m.avg_job_exec_time_ns), repr(m.total_energy_nj),
                repr(m.edp_nj_ns), repr(m.makespan_ns),
                m.decisions_f, m.decisions_s, repr(m.frac_f), repr(m.frac_s),
                repr(m.avg_sched_latency_ns), repr(m.avg_sched_energy_nj),
                repr(m.task_energy_nj), repr(m.sched_energy_nj),
                m.n_jobs, m.n_tasks, m.n_invocations,
            ]
            if manifest_hash is not None:
                row.append(manifest_hash)
            w.writerow(row)


def export_decision_csv(results, path, manifest_hash=None):
    """Decision-distribution table (frac_f + frac_s == 1 per row)."""
    columns = list(DECISION_DIST_COLUMNS)
    if manifest_hash is not None:
        columns.append("manifest_hash")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in _sorted_results(results):
            m = r.metrics
            row = [
                r.scenario_id, repr(r.data_rate_mbps), r.policy, r.seed,
                m.decisions_f, m.decisions_s, repr(m.frac_f), repr(m.frac_s),
            ]
            if manifest_hash is not None:
                row.append(manifest_hash)
            w.writerow(row)


def summary_table(results) -> str:
    """Plain-text sweep summary for stdout."""
    header = f"{'scen':>5} {'rate':>9} {'policy':>12} {'avg_time_ns':>14} " \
             f"{'energy_nj':>12} {'edp':>14} {'F%':>6} {'S%':>6}"
    lines = [header]
    for r in _sorted_results(results):
        m = r.metrics
        lines.append(
            f"{r.scenario_id:>5} {r.data_rate_mbps:>9.1f} {r.policy:>12} "
            f"{m.avg_job_exec_time_ns:>14.1f} {m.total_energy_nj:>12.1f} "
            f"{m.edp_nj_ns:>14.4g} {100 * m.frac_f:>5.1f} {100 * m.frac_s:>5.1f}"
        )
    return "\n".join(lines)
