"""Scheduling policies: constant-time table lookup (fast path), earliest-
finish-time list scheduling (slow path), the adaptive switcher, and a
data-rate threshold baseline.

All scheduling functions are pure with respect to the simulation state they
receive: the slow scheduler works on a provisional copy of PE busy times, so
a policy can be queried without perturbing a run.  ``state`` is any object
exposing ``platform``, ``pe_busy`` (per-PE busy-until, ns) and ``instances``
(task instances indexed by instance id); the engine satisfies this directly.

Determinism contract: every argmin is resolved by a total order.  The slow
scheduler breaks ties by (finish time, task instance id, PE id); the table
scheduler by (busy-until, candidate order); the table itself ties on the
lower cluster id.
"""

from __future__ import annotations

from dataclasses import dataclass

FAST = "F"
SLOW = "S"


@dataclass(frozen=True)
class LutPolicy:
    """Lookup table mapping each known task type to its preferred cluster.

    The preferred cluster minimizes power * exec_time over the clusters
    supporting the type (ties to the lower cluster id).  Types missing from
    the table fall back to the next available CPU core, in ``cpu_fallback``
    cluster order.
    """

    preferred: dict[int, int]
    cpu_fallback: tuple[int, ...]

    @classmethod
    def from_platform(cls, platform) -> "LutPolicy":
        preferred = {}
        for tid, prof in platform.profiles.items():
            best_cluster = -1
            best_cost = None
            for cid in sorted(prof.timings):
                exec_ns, power_mw = prof.timings[cid]
                cost = exec_ns * power_mw
                if best_cost is None or cost < best_cost:
                    best_cost = cost
                    best_cluster = cid
            preferred[tid] = best_cluster
        return cls(preferred=preferred, cpu_fallback=platform.cpu_cluster_ids)


@dataclass(frozen=True)
class Decision:
    """One (task, PE) assignment plus the predicted finish time."""

    task: object  # TaskInstance
    pe_id: int
    finish_ns: float
    policy: str  # FAST | SLOW


def data_ready_ns(task, pe_id, state) -> float:
    """Earliest time the task's input data can be present on pe_id.

    ready_time plus the worst predecessor transfer cost; ready_time alone
    for source tasks.
    """
    platform = state.platform
    if not task.preds:
        return task.ready_time
    dst_cluster = platform.pe_cluster[pe_id]
    worst = 0.0
    instances = state.instances
    for pred_id, nbytes in task.preds:
        src_cluster = platform.pe_cluster[instances[pred_id].pe_id]
        c = platform.cluster_comm_cost(src_cluster, dst_cluster, nbytes)
        if c > worst:
            worst = c
    return task.ready_time + worst


def finish_time(task, pe_id, state, busy=None) -> float:
    """Predicted finish of ``task`` on ``pe_id``: the slow scheduler's metric.

    max(PE busy-until, data-ready time) + execution time.  Pure function of
    the given state; ``busy`` overrides the live busy-until vector (used for
    provisional commitments inside one slow-scheduler invocation).
    """
    platform = state.platform
    cluster = platform.pe_cluster[pe_id]
    timing = platform.profiles[task.task_type_id].timings.get(cluster)
    if timing is None:
        raise ValueError(
            f"PE {pe_id} (cluster {cluster}) does not support task type {task.task_type_id}"
        )
    busy_until = (busy if busy is not None else state.pe_busy)[pe_id]
    ready = data_ready_ns(task, pe_id, state)
    start = busy_until if busy_until > ready else ready
    return start + timing[0]


def etf_schedule(ready_tasks, state, until_task=None) -> list[Decision]:
    """Slow scheduler: repeatedly commit the (task, PE) pair with minimum
    predicted finish time until the ready set is empty.

    Commitments are provisional within the invocation: a committed pair
    advances the candidate PE's busy-until, so later picks see it.  Ties
    break on (finish, task instance id, PE id).  Cost is quadratic in the
    number of ready tasks.  ``until_task`` stops early once that instance id
    has been assigned (used by the dual-query oracle run).
    """
    platform = state.platform
    busy = list(state.pe_busy)
    cluster_pes = platform.cluster_pes
    pe_cluster = platform.pe_cluster

    # Per task: candidate PEs and per-cluster (data-ready, exec) constants.
    pending = []
    for task in sorted(ready_tasks, key=lambda t: t.instance_id):
        timings = platform.profiles[task.task_type_id].timings
        cands = []
        for cid in sorted(timings):
            exec_ns = timings[cid][0]
            ready = data_ready_ns(task, cluster_pes[cid][0], state)
            for pe in cluster_pes[cid]:
                cands.append((pe, ready, exec_ns))
        cands.sort(key=lambda c: c[0])
        pending.append((task, cands))

    decisions: list[Decision] = []
    while pending:
        best_ft = None
        best_idx = -1
        best_pe = -1
        for idx, (task, cands) in enumerate(pending):
            for pe, ready, exec_ns in cands:
                b = busy[pe]
                start = b if b > ready else ready
                ft = start + exec_ns
                if best_ft is None or ft < best_ft:
                    best_ft = ft
                    best_idx = idx
                    best_pe = pe
        task, _ = pending.pop(best_idx)
        busy[best_pe] = best_ft
        decisions.append(Decision(task=task, pe_id=best_pe, finish_ns=best_ft, policy=SLOW))
        if until_task is not None and task.instance_id == until_task:
            break
    return decisions


def lut_schedule(task, state, lut: LutPolicy) -> Decision:
    """Fast scheduler: earliest-available PE in the task type's preferred
    cluster; unknown types go to the next available CPU core."""
    platform = state.platform
    busy = state.pe_busy
    cluster = lut.preferred.get(task.task_type_id)
    if cluster is not None:
        candidates = platform.cluster_pes[cluster]
    else:
        timings = platform.profiles[task.task_type_id].timings
        candidates = [
            pe
            for cid in lut.cpu_fallback
            if cid in timings
            for pe in platform.cluster_pes[cid]
        ]
        if not candidates:
            raise ValueError(f"no CPU fallback for task type {task.task_type_id}")
    best_pe = candidates[0]
    best_busy = busy[best_pe]
    for pe in candidates[1:]:
        if busy[pe] < best_busy:
            best_busy = busy[pe]
            best_pe = pe
    return Decision(
        task=task,
        pe_id=best_pe,
        finish_ns=finish_time(task, best_pe, state),
        policy=FAST,
    )


def das_schedule(ready_tasks, state, lut: LutPolicy, cached_label: str) -> list[Decision]:
    """Adaptive dispatch: the label precomputed at the last counter refresh
    picks the fast path (head task via the table) or the slow path (full
    ready set via earliest finish time)."""
    if cached_label == FAST:
        head = min(ready_tasks, key=lambda t: (t.ready_time, t.instance_id))
        return [lut_schedule(head, state, lut)]
    return etf_schedule(ready_tasks, state)


def threshold_schedule(ready_tasks, state, lut: LutPolicy, theta_mbps: float,
                       rate_mbps: float) -> list[Decision]:
    """Static baseline: fast path strictly below the rate threshold, slow
    path at or above it."""
    label = FAST if rate_mbps < theta_mbps else SLOW
    return das_schedule(ready_tasks, state, lut, label)


# ---------------------------------------------------------------------------
# Policy objects consumed by the engine
# ---------------------------------------------------------------------------

class SchedulingPolicy:
    """Per-invocation policy: returns FAST or SLOW given the live state."""

    name = "?"
    zero_overhead = False
    uses_classifier = False

    def select(self, sim) -> str:
        raise NotImplementedError

    def describe(self) -> str:
        return self.name


class LutOnly(SchedulingPolicy):
    name = "lut"

    def select(self, sim) -> str:
        return FAST


class EtfOnly(SchedulingPolicy):
    name = "etf"

    def select(self, sim) -> str:
        return SLOW


class EtfIdeal(EtfOnly):
    """Slow scheduler with all latency/energy overhead ignored (reference)."""

    name = "etf-ideal"
    zero_overhead = True


class DasPolicy(SchedulingPolicy):
    """Switches per decision using a trained classifier over the prefetched
    counter snapshot; the label is charged zero latency on the task path."""

    name = "das"
    uses_classifier = True

    def __init__(self, tree):
        self.tree = tree

    def select(self, sim) -> str:
        return sim.classifier_label(self.tree)

    def describe(self) -> str:
        return f"das(depth={self.tree.max_depth})"


class ThresholdPolicy(SchedulingPolicy):
    """Fast below a fixed estimated-data-rate threshold, slow at or above."""

    name = "threshold"

    def __init__(self, theta_mbps: float):
        self.theta_mbps = float(theta_mbps)

    def select(self, sim) -> str:
        return FAST if sim.rate_estimate_mbps() < self.theta_mbps else SLOW

    def describe(self) -> str:
        return f"threshold({self.theta_mbps:g})"
