"""Deterministic discrete-event simulator for streaming DAG workloads.

One run injects frames per the scenario's arrival schedule, tracks task
lifecycles (waiting -> ready -> running -> done), invokes the configured
scheduling policy, charges scheduler latency/energy per the overhead model,
and keeps the performance-counter snapshot that feeds the preselection
classifier.

Determinism: events are processed in (time, kind priority, insertion
sequence) order with task finishes before frame arrivals before
scheduler-completion events at equal timestamps.  The scheduler is a single
serialized resource; invocations begin only after all events at the current
timestamp have been applied, and assigned tasks start no earlier than the
invocation's end.  Identical (platform, apps, scenario, policy, overhead
model, seed) reproduce an identical trace.
"""

from __future__ import annotations

import csv
import heapq
from collections import deque
from dataclasses import dataclass, field, replace

from . import schedulers
from .schedulers import FAST, SLOW, LutPolicy
from .workload import generate_arrivals

EVENT_FINISH = 0
EVENT_ARRIVAL = 1
EVENT_SCHED_DONE = 2

RATE_ENTRIES = 8  # shift-register depth of the data-rate tracker
RATE_ENTRY_MAX = (1 << 16) - 1  # 16-bit saturating counters


class EngineError(RuntimeError):
    pass


@dataclass
class OverheadModel:
    """Latency/energy charged per scheduler invocation.

    Fast path: constants per decision.  Slow path: latency quadratic in the
    ready-queue length n (c0 + c1*n + c2*n^2), energy proportional to that
    latency.  The classifier runs off the critical path, so it charges
    energy only (its latency constant exists for completeness and defaults
    to zero on the task path).
    """

    fast_latency_ns: float = 6.0
    fast_energy_nj: float = 2.3
    slow_c0_ns: float = 40.0
    slow_c1_ns: float = 10.0
    slow_c2_ns: float = 2.0
    slow_power_nj_per_ns: float = 0.4
    classifier_latency_ns: float = 0.0
    classifier_energy_nj: float = 1.9

    def __post_init__(self):
        for name in (
            "fast_latency_ns", "fast_energy_nj", "slow_c0_ns", "slow_c1_ns",
            "slow_c2_ns", "slow_power_nj_per_ns", "classifier_latency_ns",
            "classifier_energy_nj",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"overhead constant {name} must be >= 0")

    def slow_latency_ns(self, n_ready: int) -> float:
        n = n_ready
        return self.slow_c0_ns + self.slow_c1_ns * n + self.slow_c2_ns * n * n

    @classmethod
    def zeroed(cls) -> "OverheadModel":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


class RateTracker:
    """Input data-rate estimator: 8 windowed 16-bit saturating bit counters.

    Each entry counts injected bits (in units of ``scale_bits``) during one
    wall-clock window; the estimate is the mean rate over the 8 most recent
    windows.  Estimates therefore lag and quantize by at most one window.
    """

    def __init__(self, window_ns: float = 8000.0, scale_bits: int = 1):
        if window_ns <= 0 or scale_bits < 1:
            raise ValueError("window_ns must be > 0 and scale_bits >= 1")
        self.window_ns = float(window_ns)
        self.scale_bits = int(scale_bits)
        self._bits = [0] * RATE_ENTRIES  # raw bits per window, newest last
        self._window = 0  # absolute index of the newest window

    def _roll(self, now: float):
        idx = int(now // self.window_ns)
        if idx > self._window:
            shift = idx - self._window
            if shift >= RATE_ENTRIES:
                self._bits = [0] * RATE_ENTRIES
            else:
                self._bits = self._bits[shift:] + [0] * shift
            self._window = idx

    def add(self, bits: float, now: float):
        if bits < 0:
            raise ValueError("bits must be >= 0")
        self._roll(now)
        self._bits[-1] += int(bits)

    def entries(self) -> list[int]:
        """The 16-bit counter values, oldest first."""
        return [min(b // self.scale_bits, RATE_ENTRY_MAX) for b in self._bits]

    def estimate_mbps(self, now: float) -> float:
        """Mean injected rate over the register horizon, in Mbps (1e-3 bits/ns)."""
        self._roll(now)
        counted_bits = sum(self.entries()) * self.scale_bits
        return 1000.0 * counted_bits / (RATE_ENTRIES * self.window_ns)


@dataclass(slots=True)
class TaskInstance:
    """One runtime task: a DFG node instantiated for one frame (job)."""

    instance_id: int
    job_id: int
    app_id: int
    app_type: int
    node_id: int
    task_type_id: int
    depth: int
    preds: tuple  # ((pred_instance_id, nbytes), ...)
    pending_preds: int
    ready_time: float = -1.0
    start_time: float = -1.0
    finish_time: float = -1.0
    pe_id: int = -1
    state: str = "waiting"


@dataclass
class FeatureSnapshot:
    """Performance-counter snapshot consumed by the preselection classifier.

    Task-scoped fields describe the head of the ready queue (-1 sentinels
    when the queue is empty).  Time-valued fields (pe_ready, cluster_avail)
    are absolute simulated times >= snapshot_time; ``features()`` exposes
    them as deltas from snapshot_time so the vector is comparable across
    points in a run.
    """

    snapshot_time: float
    task_type_id: int
    depth: int
    app_id: int
    app_type: int
    pred_task_type_id: int
    pred_cluster_id: int
    pending_comm_ns: float
    input_rate_mbps: float
    exec_ns: list[float]  # per cluster, -1 where unsupported
    power_mw: list[float]
    cluster_avail: list[float]  # absolute, per cluster
    pe_ready: list[float]  # absolute, per PE
    pe_util: list[float]

    def features(self) -> list[float]:
        t = self.snapshot_time
        vec = [
            float(self.task_type_id),
            float(self.depth),
            float(self.app_id),
            float(self.app_type),
            float(self.pred_task_type_id),
            float(self.pred_cluster_id),
            self.pending_comm_ns,
            self.input_rate_mbps,
        ]
        vec.extend(self.exec_ns)
        vec.extend(self.power_mw)
        vec.extend(a - t for a in self.cluster_avail)
        vec.extend(r - t for r in self.pe_ready)
        vec.extend(self.pe_util)
        return vec


def feature_names(platform) -> list[str]:
    """Column names matching FeatureSnapshot.features() for this platform."""
    names = [
        "task_type", "depth", "app_id", "app_type",
        "pred_task_type", "pred_cluster", "pending_comm_ns", "input_rate_mbps",
    ]
    names += [f"exec_ns_{c.name}" for c in platform.clusters]
    names += [f"power_mw_{c.name}" for c in platform.clusters]
    names += [f"avail_{c.name}" for c in platform.clusters]
    names += [f"pe_ready_{p.pe_id}" for p in platform.pes]
    names += [f"pe_util_{p.pe_id}" for p in platform.pes]
    return names


@dataclass(slots=True)
class DecisionRecord:
    """One (task, PE) assignment.  Invocation-level overhead is carried on
    the first record of its invocation so per-record sums equal
    per-invocation sums."""

    seq: int
    time_ns: float
    policy: str
    ready_len: int
    inv_id: int
    instance_id: int
    pe_id: int
    overhead_ns: float
    overhead_nj: float
    classifier_nj: float


@dataclass(slots=True)
class InvocationRecord:
    inv_id: int
    time_ns: float
    policy: str
    ready_len: int
    n_assigned: int
    latency_ns: float
    energy_nj: float
    classifier_nj: float


@dataclass(slots=True)
class TaskRecord:
    instance_id: int
    job_id: int
    app_id: int
    node_id: int
    task_type_id: int
    pe_id: int
    cluster_id: int
    ready_ns: float
    start_ns: float
    finish_ns: float
    energy_nj: float


@dataclass(slots=True)
class JobRecord:
    job_id: int
    app_id: int
    arrival_ns: float
    finish_ns: float
    latency_ns: float


DECISION_COLUMNS = [
    "seq", "time_ns", "policy", "ready_len", "inv_id", "instance_id", "pe_id",
    "overhead_ns", "overhead_nj", "classifier_nj",
]
JOB_COLUMNS = ["job_id", "app_id", "arrival_ns", "finish_ns", "latency_ns"]


@dataclass
class SimTrace:
    """Complete, ordered record of one run."""

    policy: str
    scenario_id: int
    data_rate_mbps: float
    seed: int
    decisions: list[DecisionRecord] = field(default_factory=list)
    invocations: list[InvocationRecord] = field(default_factory=list)
    tasks: list[TaskRecord] = field(default_factory=list)
    jobs: list[JobRecord] = field(default_factory=list)
    task_energy_nj: float = 0.0
    sched_energy_nj: float = 0.0  # scheduler + classifier energy
    sched_latency_ns: float = 0.0  # sum of invocation latencies
    makespan_ns: float = 0.0

    def decision_counts(self) -> tuple[int, int]:
        n_f = sum(1 for d in self.decisions if d.policy == FAST)
        return n_f, len(self.decisions) - n_f

    def write_decisions_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DECISION_COLUMNS)
            for d in self.decisions:
                w.writerow([
                    d.seq, repr(d.time_ns), d.policy, d.ready_len, d.inv_id,
                    d.instance_id, d.pe_id, repr(d.overhead_ns),
                    repr(d.overhead_nj), repr(d.classifier_nj),
                ])

    def write_jobs_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(JOB_COLUMNS)
            for j in self.jobs:
                w.writerow([
                    j.job_id, j.app_id, repr(j.arrival_ns), repr(j.finish_ns),
                    repr(j.latency_ns),
                ])


class _Simulation:
    """Single-run state.  Also serves as the ``state`` object for the
    scheduling functions and the snapshot source for the classifier."""

    def __init__(self, platform, apps, scenario, policy, overhead, *,
                 rate_window_ns=8000.0, util_window_ns=50000.0, max_events=None):
        self.platform = platform
        self.apps = apps
        self.scenario = scenario
        self.policy = policy
        self.overhead = overhead
        self.lut = LutPolicy.from_platform(platform)
        self.now = 0.0
        self.pe_busy = [0.0] * platform.pe_count
        self.pe_intervals = [deque() for _ in range(platform.pe_count)]
        self.instances: list[TaskInstance] = []
        self.ready: list[tuple[float, int]] = []  # heap of (ready_time, instance_id)
        self.events: list[tuple] = []  # heap of (time, kind, seq, payload)
        self.event_seq = 0
        self.sched_free_at = 0.0
        self.tracker = RateTracker(window_ns=rate_window_ns)
        self.util_window_ns = util_window_ns
        self.max_events = max_events
        self._epoch = 0  # bumps on every processed event (counter refresh)
        self._fv_epoch = -1
        self._fv = None
        self._label_epoch = -1
        self._label = FAST
        self._jobs_arrival: list[float] = []
        self._jobs_app: list[int] = []
        self._jobs_remaining: list[int] = []
        self.trace = SimTrace(
            policy=policy.name,
            scenario_id=scenario.scenario_id,
            data_rate_mbps=scenario.data_rate_mbps,
            seed=scenario.seed,
        )
        self.decision_probe = None

    # -- policy-facing views ------------------------------------------------

    def rate_estimate_mbps(self) -> float:
        return self.tracker.estimate_mbps(self.now)

    def classifier_label(self, tree) -> str:
        """Label produced at the latest counter refresh (cached per event)."""
        if self._label_epoch != self._epoch:
            self._label = tree.decide(self.feature_vector())
            self._label_epoch = self._epoch
        return self._label

    def feature_vector(self) -> list[float]:
        if self._fv_epoch != self._epoch:
            self._fv = self.snapshot_counters().features()
            self._fv_epoch = self._epoch
        return self._fv

    # -- counters -------------------------------------------------------------

    def _pe_utilization(self, pe_id: int, t: float) -> float:
        window = self.util_window_ns
        lo = t - window
        dq = self.pe_intervals[pe_id]
        while dq and dq[0][1] < lo:
            dq.popleft()
        busy = 0.0
        for s, f in dq:
            if s >= t:
                break
            span = (f if f < t else t) - (s if s > lo else lo)
            if span > 0:
                busy += span
        frac = busy / window
        return 1.0 if frac > 1.0 else frac

    def snapshot_counters(self) -> FeatureSnapshot:
        """Counter snapshot at the current simulated time (Table-style
        task/PE/system features for the head of the ready queue)."""
        platform = self.platform
        t = self.now
        pe_ready = [b if b > t else t for b in self.pe_busy]
        cluster_avail = [
            min(pe_ready[pe] for pe in pes) for pes in platform.cluster_pes
        ]
        pe_util = [self._pe_utilization(p, t) for p in range(platform.pe_count)]
        n_clusters = platform.cluster_count

        if self.ready:
            head = self.instances[self.ready[0][1]]
            prof = platform.profiles[head.task_type_id]
            exec_ns = [-1.0] * n_clusters
            power_mw = [-1.0] * n_clusters
            for cid, (e, p) in prof.timings.items():
                exec_ns[cid] = e
                power_mw[cid] = p
            pred_type, pred_cluster = -1, -1
            latest = -1.0
            pending_bytes = 0.0
            for pid, nbytes in head.preds:
                pred = self.instances[pid]
                pending_bytes += nbytes
                if pred.finish_time > latest:
                    latest = pred.finish_time
                    pred_type = pred.task_type_id
                    pred_cluster = platform.pe_cluster[pred.pe_id]
            pending_comm = pending_bytes / platform.comm_model.bytes_per_ns_per_link
            task_fields = dict(
                task_type_id=head.task_type_id,
                depth=head.depth,
                app_id=head.app_id,
                app_type=head.app_type,
                pred_task_type_id=pred_type,
                pred_cluster_id=pred_cluster,
                pending_comm_ns=pending_comm,
            )
        else:
            task_fields = dict(
                task_type_id=-1, depth=-1, app_id=-1, app_type=-1,
                pred_task_type_id=-1, pred_cluster_id=-1, pending_comm_ns=0.0,
            )
            exec_ns = [-1.0] * n_clusters
            power_mw = [-1.0] * n_clusters

        return FeatureSnapshot(
            snapshot_time=t,
            input_rate_mbps=self.tracker.estimate_mbps(t),
            exec_ns=exec_ns,
            power_mw=power_mw,
            cluster_avail=cluster_avail,
            pe_ready=pe_ready,
            pe_util=pe_util,
            **task_fields,
        )

    # -- event handling ---------------------------------------------------

    def _push_event(self, time, kind, payload):
        heapq.heappush(self.events, (time, kind, self.event_seq, payload))
        self.event_seq += 1

    def _handle_arrival(self, app_id):
        dfg = self.apps[app_id]
        job_id = len(self._jobs_arrival)
        self._jobs_arrival.append(self.now)
        self._jobs_app.append(app_id)
        self._jobs_remaining.append(dfg.node_count)
        base = len(self.instances)
        for node in dfg.nodes:
            if node.task_type_id not in self.platform.profiles:
                raise EngineError(
                    f"task type {node.task_type_id} has no platform profile: no schedulable PE"
                )
            preds = tuple((base + p, nb) for p, nb in dfg.preds[node.node_id])
            inst = TaskInstance(
                instance_id=base + node.node_id,
                job_id=job_id,
                app_id=app_id,
                app_type=dfg.app_type,
                node_id=node.node_id,
                task_type_id=node.task_type_id,
                depth=node.depth,
                preds=preds,
                pending_preds=len(preds),
            )
            self.instances.append(inst)
            if not preds:
                inst.ready_time = self.now
                inst.state = "ready"
                heapq.heappush(self.ready, (self.now, inst.instance_id))
        self.tracker.add(dfg.frame_bits, self.now)

    def _handle_finish(self, instance_id):
        inst = self.instances[instance_id]
        inst.state = "done"
        job = inst.job_id
        self._jobs_remaining[job] -= 1
        if self._jobs_remaining[job] == 0:
            arrival = self._jobs_arrival[job]
            self.trace.jobs.append(JobRecord(
                job_id=job,
                app_id=self._jobs_app[job],
                arrival_ns=arrival,
                finish_ns=self.now,
                latency_ns=self.now - arrival,
            ))
        dfg = self.apps[inst.app_id]
        base = instance_id - inst.node_id
        for succ_node in dfg.succs[inst.node_id]:
            succ = self.instances[base + succ_node]
            succ.pending_preds -= 1
            if succ.pending_preds == 0:
                succ.ready_time = self.now  # == max predecessor finish
                succ.state = "ready"
                heapq.heappush(self.ready, (self.now, succ.instance_id))

    def _commit(self, decisions, inv: InvocationRecord):
        """Apply an invocation's assignments at its completion time."""
        platform = self.platform
        end = inv.time_ns + inv.latency_ns
        first = True
        for d in decisions:
            task = d.task
            cluster = platform.pe_cluster[d.pe_id]
            exec_ns, power_mw = platform.profiles[task.task_type_id].timings[cluster]
            data_ready = schedulers.data_ready_ns(task, d.pe_id, self)
            start = max(end, self.pe_busy[d.pe_id], data_ready)
            finish = start + exec_ns
            self.pe_busy[d.pe_id] = finish
            self.pe_intervals[d.pe_id].append((start, finish))
            task.start_time = start
            task.finish_time = finish
            task.pe_id = d.pe_id
            task.state = "running"
            self._push_event(finish, EVENT_FINISH, task.instance_id)
            energy = power_mw * exec_ns * 1e-3
            self.trace.task_energy_nj += energy
            self.trace.tasks.append(TaskRecord(
                instance_id=task.instance_id,
                job_id=task.job_id,
                app_id=task.app_id,
                node_id=task.node_id,
                task_type_id=task.task_type_id,
                pe_id=d.pe_id,
                cluster_id=cluster,
                ready_ns=task.ready_time,
                start_ns=task.start_time,
                finish_ns=finish,
                energy_nj=energy,
            ))
            self.trace.decisions.append(DecisionRecord(
                seq=len(self.trace.decisions),
                time_ns=inv.time_ns,
                policy=d.policy,
                ready_len=inv.ready_len,
                inv_id=inv.inv_id,
                instance_id=task.instance_id,
                pe_id=d.pe_id,
                overhead_ns=inv.latency_ns if first else 0.0,
                overhead_nj=inv.energy_nj if first else 0.0,
                classifier_nj=inv.classifier_nj if first else 0.0,
            ))
            first = False

    def _try_invoke(self):
        """Start scheduler invocations while the resource is free and tasks
        are ready.  Zero-latency invocations commit immediately; otherwise
        the commitment rides on a scheduler-done event."""
        oh = self.overhead
        policy = self.policy
        while self.ready and self.sched_free_at <= self.now:
            probe_fv = probe_ready = None
            if self.decision_probe is not None:
                # Snapshot before the head task leaves the queue: this is the
                # state the prefetched classifier features describe.
                probe_fv = self.snapshot_counters().features()
                probe_ready = [self.instances[i] for _, i in sorted(self.ready)]
            label = policy.select(self)
            n_ready = len(self.ready)
            if label == FAST:
                _, head_id = heapq.heappop(self.ready)
                head = self.instances[head_id]
                decisions = [schedulers.lut_schedule(head, self, self.lut)]
                latency = 0.0 if policy.zero_overhead else oh.fast_latency_ns
                energy = 0.0 if policy.zero_overhead else oh.fast_energy_nj
            else:
                tasks = []
                while self.ready:
                    tasks.append(self.instances[heapq.heappop(self.ready)[1]])
                decisions = schedulers.etf_schedule(tasks, self)
                if policy.zero_overhead:
                    latency = energy = 0.0
                else:
                    latency = oh.slow_latency_ns(n_ready)
                    energy = oh.slow_power_nj_per_ns * latency
            classifier_nj = (
                oh.classifier_energy_nj
                if policy.uses_classifier and not policy.zero_overhead
                else 0.0
            )
            inv = InvocationRecord(
                inv_id=len(self.trace.invocations),
                time_ns=self.now,
                policy=label,
                ready_len=n_ready,
                n_assigned=len(decisions),
                latency_ns=latency,
                energy_nj=energy,
                classifier_nj=classifier_nj,
            )
            self.trace.invocations.append(inv)
            self.trace.sched_latency_ns += latency
            self.trace.sched_energy_nj += energy + classifier_nj
            if self.decision_probe is not None:
                self.decision_probe(self, label, decisions, probe_ready, probe_fv)
            if latency > 0.0:
                self.sched_free_at = self.now + latency
                self._push_event(self.sched_free_at, EVENT_SCHED_DONE, (decisions, inv))
            else:
                self._commit(decisions, inv)

    def run(self) -> SimTrace:
        arrivals = generate_arrivals(self.scenario, self.apps)
        for t, app in arrivals:
            self._push_event(t, EVENT_ARRIVAL, app)
        expected_tasks = sum(self.apps[a].node_count for _, a in arrivals)
        cap = self.max_events
        if cap is None:
            cap = 1000 + 12 * (expected_tasks + len(arrivals))
        processed = 0
        while self.events:
            t = self.events[0][0]
            self.now = t
            while self.events and self.events[0][0] == t:
                _, kind, _, payload = heapq.heappop(self.events)
                processed += 1
                if processed > cap:
                    raise EngineError(f"event cap {cap} exceeded; run not terminating")
                if kind == EVENT_FINISH:
                    self._handle_finish(payload)
                elif kind == EVENT_ARRIVAL:
                    self._handle_arrival(payload)
                else:
                    decisions, inv = payload
                    self._commit(decisions, inv)
                self._epoch += 1
            self._try_invoke()
        not_done = sum(1 for i in self.instances if i.state != "done")
        if not_done:
            raise EngineError(f"{not_done} task instances never completed")
        self.trace.makespan_ns = max((j.finish_ns for j in self.trace.jobs), default=0.0)
        return self.trace


def run(platform, apps, scenario, policy, overhead_model=None, seed=None,
        decision_probe=None, **sim_kwargs) -> SimTrace:
    """Execute one scenario under one policy and return the trace.

    ``apps`` maps app_id -> Dfg.  ``seed`` overrides the scenario seed when
    given.  ``decision_probe(sim, label, decisions, ready_tasks, features)``
    is called at each invocation before commitment (read-only; used by
    oracle labeling).
    """
    if overhead_model is None:
        overhead_model = OverheadModel()
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    sim = _Simulation(platform, apps, scenario, policy, overhead_model, **sim_kwargs)
    sim.decision_probe = decision_probe
    return sim.run()
