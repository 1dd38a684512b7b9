"""Heterogeneous SoC description: PE clusters, task performance/power profiles,
and the mesh communication-cost model.

A platform is loaded from a YAML file (see ``data/platform_dssoc19.yaml`` for
the shipped 19-PE default), validated once, and treated as immutable
afterwards.  All mutable simulation state (PE busy times, utilization) lives
in the engine, so one Platform instance can back any number of concurrent
runs.

Units used throughout: time in ns, power in mW, energy in nJ, data in bytes
(frame payloads in bits).  Energy conversion: mW * ns * 1e-3 = nJ.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import yaml

DEFAULT_PLATFORM_RESOURCE = "platform_dssoc19.yaml"


class PlatformConfigError(ValueError):
    """A platform description failed validation.

    Carries the full list of violations so a config author sees everything
    wrong in one pass instead of one error per attempt.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n".join("  - " + v for v in self.violations)
        super().__init__(f"invalid platform description:\n{lines}")


@dataclass(frozen=True)
class Cluster:
    cluster_id: int
    name: str
    pe_count: int
    mesh_position: tuple[int, int]  # (row, col) of the cluster's mesh node
    is_cpu: bool = False


@dataclass(frozen=True)
class Pe:
    """Static identity of one processing element (core or accelerator lane)."""

    pe_id: int
    cluster_id: int


@dataclass(frozen=True)
class TaskProfile:
    """Per-cluster execution time and power draw for one task type.

    ``timings`` maps cluster_id -> (exec_ns, power_mw).  A cluster absent
    from the map cannot run the task type.
    """

    task_type_id: int
    name: str
    timings: dict[int, tuple[float, float]]

    @property
    def supported_clusters(self) -> set[int]:
        return set(self.timings)

    def exec_ns(self, cluster_id: int) -> float:
        return self.timings[cluster_id][0]

    def power_mw(self, cluster_id: int) -> float:
        return self.timings[cluster_id][1]


@dataclass(frozen=True)
class CommModel:
    """Cluster-granular mesh cost: Manhattan hops plus bandwidth-limited transfer.

    PEs within one cluster share a mesh node, so intra-cluster transfers are
    free.  Between clusters:
        cost = hops * per_hop_latency_ns + nbytes / bytes_per_ns_per_link
    """

    bytes_per_ns_per_link: float
    per_hop_latency_ns: float


@dataclass
class Platform:
    """Validated, immutable SoC model.  Construct via :func:`validate_platform`."""

    name: str
    clusters: list[Cluster]
    pes: list[Pe]
    profiles: dict[int, TaskProfile]
    comm_model: CommModel

    # Derived lookup structures, filled in __post_init__.
    pe_cluster: list[int] = field(init=False, repr=False)
    cluster_pes: list[list[int]] = field(init=False, repr=False)
    cpu_cluster_ids: tuple[int, ...] = field(init=False, repr=False)
    _hops: list[list[int]] = field(init=False, repr=False)

    def __post_init__(self):
        self.pe_cluster = [pe.cluster_id for pe in self.pes]
        self.cluster_pes = [[] for _ in self.clusters]
        for pe in self.pes:
            self.cluster_pes[pe.cluster_id].append(pe.pe_id)
        self.cpu_cluster_ids = tuple(c.cluster_id for c in self.clusters if c.is_cpu)
        n = len(self.clusters)
        self._hops = [[0] * n for _ in range(n)]
        for a in self.clusters:
            for b in self.clusters:
                (r1, c1), (r2, c2) = a.mesh_position, b.mesh_position
                self._hops[a.cluster_id][b.cluster_id] = abs(r1 - r2) + abs(c1 - c2)

    @property
    def pe_count(self) -> int:
        return len(self.pes)

    @property
    def cluster_count(self) -> int:
        return len(self.clusters)

    @property
    def counters_width(self) -> int:
        """Length of the performance-counter feature vector for this platform.

        Layout (see engine.feature_names): 8 scalar task/system counters,
        exec and power vectors over clusters, per-cluster availability,
        per-PE readiness and utilization.
        """
        return 8 + 3 * self.cluster_count + 2 * self.pe_count

    def cluster_of(self, pe_id: int) -> int:
        return self.pe_cluster[pe_id]

    def hops(self, cluster_a: int, cluster_b: int) -> int:
        return self._hops[cluster_a][cluster_b]

    def comm_cost(self, src_pe: int, dst_pe: int, nbytes: float) -> float:
        """Transfer cost in ns for moving ``nbytes`` from src_pe to dst_pe.

        Zero within a cluster; symmetric; monotone in nbytes.
        """
        if not (0 <= src_pe < len(self.pes)) or not (0 <= dst_pe < len(self.pes)):
            raise ValueError(f"unknown PE id in comm_cost({src_pe}, {dst_pe})")
        if nbytes < 0:
            raise ValueError("nbytes must be >= 0")
        ca, cb = self.pe_cluster[src_pe], self.pe_cluster[dst_pe]
        if ca == cb:
            return 0.0
        m = self.comm_model
        return self._hops[ca][cb] * m.per_hop_latency_ns + nbytes / m.bytes_per_ns_per_link

    def cluster_comm_cost(self, cluster_a: int, cluster_b: int, nbytes: float) -> float:
        """comm_cost restricted to cluster granularity (hot path for schedulers)."""
        if cluster_a == cluster_b:
            return 0.0
        m = self.comm_model
        return self._hops[cluster_a][cluster_b] * m.per_hop_latency_ns + nbytes / m.bytes_per_ns_per_link

    def energy_of(self, task_type_id: int, cluster_id: int, exec_ns: float) -> float:
        """Task energy in nJ: power(mW) * time(ns) * 1e-3."""
        profile = self.profiles.get(task_type_id)
        if profile is None:
            raise ValueError(f"unknown task type {task_type_id}")
        if cluster_id not in profile.timings:
            raise ValueError(
                f"cluster {cluster_id} does not support task type {task_type_id}"
            )
        return profile.power_mw(cluster_id) * exec_ns * 1e-3

    def summary(self) -> str:
        lines = [
            f"platform {self.name}: {self.pe_count} PEs in {self.cluster_count} clusters,"
            f" {len(self.profiles)} task types, {self.counters_width} counters",
        ]
        for c in self.clusters:
            kind = "cpu" if c.is_cpu else "accelerator"
            lines.append(
                f"  cluster {c.cluster_id} {c.name}: {c.pe_count} PEs, mesh {c.mesh_position}, {kind}"
            )
        m = self.comm_model
        lines.append(
            f"  comm: {m.bytes_per_ns_per_link} B/ns per link, {m.per_hop_latency_ns} ns/hop"
        )
        for t in sorted(self.profiles):
            p = self.profiles[t]
            per = ", ".join(
                f"{self.clusters[c].name}={p.exec_ns(c):g}ns/{p.power_mw(c):g}mW"
                for c in sorted(p.timings)
            )
            lines.append(f"  type {t} {p.name}: {per}")
        return "\n".join(lines)


def validate_platform(raw: dict, name: str = "custom") -> Platform:
    """Validate a parsed platform description and build the Platform.

    Collects every violation before raising, so the error message names all
    problems (duplicate ids, unsupported task types, non-positive timings,
    bad comm constants).
    """
    violations: list[str] = []
    if not isinstance(raw, dict):
        raise PlatformConfigError(["top level must be a mapping"])

    clusters: list[Cluster] = []
    raw_clusters = raw.get("clusters") or []
    seen_ids: set[int] = set()
    seen_mesh: set[tuple[int, int]] = set()
    names: dict[str, int] = {}
    for entry in raw_clusters:
        try:
            cid = int(entry["id"])
            cname = str(entry["name"])
            pe_count = int(entry["pe_count"])
            mesh = tuple(int(x) for x in entry["mesh"])
            is_cpu = bool(entry.get("is_cpu", False))
        except (KeyError, TypeError, ValueError) as exc:
            violations.append(f"malformed cluster entry {entry!r}: {exc}")
            continue
        if cid in seen_ids:
            violations.append(f"duplicate cluster id {cid}")
            continue
        seen_ids.add(cid)
        if pe_count < 1:
            violations.append(f"cluster {cid} ({cname}): pe_count must be >= 1")
        if len(mesh) != 2:
            violations.append(f"cluster {cid} ({cname}): mesh must be (row, col)")
            continue
        if mesh in seen_mesh:
            violations.append(f"cluster {cid} ({cname}): mesh position {mesh} already used")
        seen_mesh.add(mesh)
        if cname in names:
            violations.append(f"duplicate cluster name {cname!r}")
        names[cname] = cid
        clusters.append(Cluster(cid, cname, pe_count, mesh, is_cpu))

    if not clusters:
        violations.append("no clusters defined")
    else:
        expected = set(range(len(clusters)))
        if seen_ids != expected:
            violations.append(
                f"cluster ids must be dense 0..{len(clusters) - 1}, got {sorted(seen_ids)}"
            )
    clusters.sort(key=lambda c: c.cluster_id)

    comm_raw = raw.get("comm") or {}
    bw = float(comm_raw.get("bytes_per_ns_per_link", 0.0))
    hop = float(comm_raw.get("per_hop_latency_ns", -1.0))
    if bw <= 0:
        violations.append("comm.bytes_per_ns_per_link must be > 0")
    if hop < 0:
        violations.append("comm.per_hop_latency_ns must be >= 0")
    comm = CommModel(bytes_per_ns_per_link=bw, per_hop_latency_ns=hop)

    cluster_ids = {c.cluster_id for c in clusters}
    cpu_ids = {c.cluster_id for c in clusters if c.is_cpu}
    profiles: dict[int, TaskProfile] = {}
    for entry in raw.get("task_types") or []:
        try:
            tid = int(entry["id"])
            tname = str(entry["name"])
            raw_profiles = dict(entry["profiles"])
        except (KeyError, TypeError, ValueError) as exc:
            violations.append(f"malformed task type entry {entry!r}: {exc}")
            continue
        if tid in profiles:
            violations.append(f"duplicate task type id {tid}")
            continue
        timings: dict[int, tuple[float, float]] = {}
        for cluster_name, timing in raw_profiles.items():
            cid = names.get(str(cluster_name))
            if cid is None or cid not in cluster_ids:
                violations.append(
                    f"task type {tid} ({tname}): unknown cluster {cluster_name!r}"
                )
                continue
            try:
                exec_ns = float(timing["exec_ns"])
                power_mw = float(timing["power_mw"])
            except (KeyError, TypeError, ValueError) as exc:
                violations.append(f"task type {tid} ({tname}): bad timing {timing!r}: {exc}")
                continue
            if exec_ns <= 0:
                violations.append(
                    f"task type {tid} ({tname}): exec_ns must be > 0 on {cluster_name}"
                )
            if power_mw <= 0:
                violations.append(
                    f"task type {tid} ({tname}): power_mw must be > 0 on {cluster_name}"
                )
            timings[cid] = (exec_ns, power_mw)
        if not timings:
            violations.append(f"task type {tid} ({tname}): no supported cluster")
        elif not (set(timings) & cpu_ids):
            violations.append(
                f"task type {tid} ({tname}): no CPU cluster supports it (no fallback)"
            )
        profiles[tid] = TaskProfile(tid, tname, timings)

    if violations:
        raise PlatformConfigError(violations)

    pes: list[Pe] = []
    for cluster in clusters:
        for _ in range(cluster.pe_count):
            pes.append(Pe(len(pes), cluster.cluster_id))

    return Platform(
        name=str(raw.get("name", name)),
        clusters=clusters,
        pes=pes,
        profiles=profiles,
        comm_model=comm,
    )


def load_platform(path) -> Platform:
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return validate_platform(raw, name=str(path))


def default_platform() -> Platform:
    """The shipped 19-PE, 6-cluster configuration."""
    text = resources.files("dassim.data").joinpath(DEFAULT_PLATFORM_RESOURCE).read_text()
    return validate_platform(yaml.safe_load(text), name="dssoc19")
