"""Streaming workloads: DFG applications, frame arrival schedules, scenario suites.

An application is a DAG of typed tasks; one arriving frame instantiates one
job (a full copy of the graph).  A scenario mixes applications at given
ratios and injects frames at a target data rate, where

    data rate (Mbps) = mean frame bits / inter-arrival time

so the periodic inter-arrival in ns is ``1000 * mean_frame_bits / rate_mbps``
(1 Mbps = 1e-3 bits/ns).  Everything here is pure given (config, seed), so
scenario generation is safe to share across processes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import yaml

ARRIVAL_MODELS = ("periodic", "poisson")

SUITE_FORMAT = "dassim-suite"
APPS_FORMAT = "dassim-apps"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class DfgNode:
    node_id: int
    task_type_id: int
    depth: int  # longest-path distance from any source


@dataclass(frozen=True)
class DfgEdge:
    src: int
    dst: int
    nbytes: float


@dataclass
class Dfg:
    """One streaming application template.  Immutable after build_dfg()."""

    app_id: int
    name: str
    nodes: tuple[DfgNode, ...]
    edges: tuple[DfgEdge, ...]
    frame_bits: float
    app_type: int

    # node_id -> tuple of (pred_id, nbytes); derived
    preds: dict[int, tuple[tuple[int, float], ...]] = field(init=False, repr=False)
    succs: dict[int, tuple[int, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        preds: dict[int, list[tuple[int, float]]] = {n.node_id: [] for n in self.nodes}
        succs: dict[int, list[int]] = {n.node_id: [] for n in self.nodes}
        for e in self.edges:
            preds[e.dst].append((e.src, e.nbytes))
            succs[e.src].append(e.dst)
        self.preds = {k: tuple(v) for k, v in preds.items()}
        self.succs = {k: tuple(v) for k, v in succs.items()}

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def task_types_used(self) -> set[int]:
        return {n.task_type_id for n in self.nodes}


def compute_depths(node_ids, edges) -> dict[int, int]:
    """Longest-path depth from the sources (sources are depth 0).

    ``edges`` is an iterable of (src, dst) or (src, dst, nbytes).
    Raises ValueError if the graph has a cycle.
    """
    node_ids = list(node_ids)
    adj: dict[int, list[int]] = {n: [] for n in node_ids}
    indeg: dict[int, int] = {n: 0 for n in node_ids}
    for e in edges:
        src, dst = e[0], e[1]
        adj[src].append(dst)
        indeg[dst] += 1

    depth = {n: 0 for n in node_ids}
    frontier = [n for n in node_ids if indeg[n] == 0]
    seen = 0
    while frontier:
        n = frontier.pop()
        seen += 1
        for m in adj[n]:
            depth[m] = max(depth[m], depth[n] + 1)
            indeg[m] -= 1
            if indeg[m] == 0:
                frontier.append(m)
    if seen != len(node_ids):
        raise ValueError("cycle detected in task graph")
    return depth


def build_dfg(app_id, name, node_types, edges, frame_bits, app_type=None) -> Dfg:
    """Construct a validated Dfg from node types and (src, dst, nbytes) edges."""
    node_ids = list(range(len(node_types)))
    id_set = set(node_ids)
    for src, dst, nbytes in edges:
        if src not in id_set or dst not in id_set:
            raise ValueError(f"edge ({src}, {dst}) references unknown node")
        if nbytes < 0:
            raise ValueError(f"edge ({src}, {dst}) has negative byte count")
    if frame_bits <= 0:
        raise ValueError("frame_bits must be > 0")
    depths = compute_depths(node_ids, edges)
    nodes = tuple(DfgNode(i, t, depths[i]) for i, t in enumerate(node_types))
    dfg_edges = tuple(DfgEdge(s, d, float(b)) for s, d, b in edges)
    return Dfg(
        app_id=app_id,
        name=name,
        nodes=nodes,
        edges=dfg_edges,
        frame_bits=float(frame_bits),
        app_type=app_id if app_type is None else app_type,
    )


@dataclass(frozen=True)
class Scenario:
    """One workload point: an application mix injected at a fixed data rate."""

    scenario_id: int
    mix: tuple[tuple[int, float], ...]  # (app_id, weight), weights sum to 1
    data_rate_mbps: float
    frame_count: int
    seed: int
    arrival_model: str = "periodic"

    def __post_init__(self):
        if not self.mix:
            raise ValueError("scenario mix must not be empty")
        total = sum(w for _, w in self.mix)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mix weights must sum to 1, got {total}")
        if any(w <= 0 for _, w in self.mix):
            raise ValueError("mix weights must be positive")
        if self.data_rate_mbps <= 0:
            raise ValueError("data_rate_mbps must be > 0")
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if self.arrival_model not in ARRIVAL_MODELS:
            raise ValueError(f"arrival_model must be one of {ARRIVAL_MODELS}")


def mean_frame_bits(mix, apps: dict[int, Dfg]) -> float:
    return sum(w * apps[a].frame_bits for a, w in mix)


def generate_arrivals(scenario: Scenario, apps: dict[int, Dfg]) -> list[tuple[float, int]]:
    """Ordered (arrival_ns, app_id) list for one scenario.  Deterministic per seed."""
    for app_id, _ in scenario.mix:
        if app_id not in apps:
            raise ValueError(f"scenario references unknown app {app_id}")
    inter_ns = 1000.0 * mean_frame_bits(scenario.mix, apps) / scenario.data_rate_mbps
    rng = random.Random(scenario.seed)
    app_ids = [a for a, _ in scenario.mix]
    weights = [w for _, w in scenario.mix]
    arrivals: list[tuple[float, int]] = []
    t = 0.0
    for k in range(scenario.frame_count):
        if scenario.arrival_model == "periodic":
            t = k * inter_ns
        else:
            t += rng.expovariate(1.0 / inter_ns)
        app = rng.choices(app_ids, weights)[0]
        arrivals.append((t, app))
    return arrivals


# ---------------------------------------------------------------------------
# Synthetic application library
# ---------------------------------------------------------------------------
# Five stand-in streaming apps with distinct structural roles: a transmit
# chain, a fork-join receive pipeline, a wide fan-out detector, a deep
# accelerator-heavy decode pipeline (hammers the single-PE FEC cluster), and
# a large mixed graph.  frame_bits is proportional to each app's aggregate
# service demand so that a given Mbps figure loads the SoC comparably across
# mixes.

def synth_app_library() -> list[Dfg]:
    apps = []
    # app 0: transmit chain, 6 nodes
    apps.append(build_dfg(
        0, "tx_chain",
        node_types=[6, 1, 2, 3, 7, 5],
        edges=[(0, 1, 800), (1, 2, 1200), (2, 3, 1200), (3, 4, 900), (4, 5, 600)],
        frame_bits=360,
    ))
    # app 1: fork-join receive pipeline, 7 nodes
    apps.append(build_dfg(
        1, "rx_forkjoin",
        node_types=[6, 1, 1, 2, 3, 0, 5],
        edges=[
            (0, 1, 1000), (0, 2, 1000), (0, 3, 800),
            (1, 4, 1200), (2, 4, 1200), (3, 4, 700),
            (4, 5, 900), (5, 6, 600),
        ],
        frame_bits=730,
    ))
    # app 2: wide fan-out detector, 14 nodes (10 parallel transforms)
    fan_edges = [(0, i, 600) for i in range(1, 11)]
    fan_edges += [(i, 11, 400) for i in range(1, 6)]
    fan_edges += [(i, 12, 400) for i in range(6, 11)]
    fan_edges += [(11, 13, 500), (12, 13, 500)]
    apps.append(build_dfg(
        2, "fanout_detect",
        node_types=[6] + [1] * 10 + [0, 0, 5],
        edges=fan_edges,
        frame_bits=1160,
    ))
    # app 3: deep decode pipeline, 12 nodes, five FEC stages
    apps.append(build_dfg(
        3, "decode_pipe",
        node_types=[6, 3, 1, 3, 2, 3, 4, 3, 7, 1, 3, 5],
        edges=[(i, i + 1, 1000) for i in range(11)],
        frame_bits=1800,
    ))
    # app 4: mixed dual-branch graph, 18 nodes
    apps.append(build_dfg(
        4, "radar_mix",
        node_types=[6, 0, 1, 2, 2, 4, 1, 3, 7, 3, 0, 4, 1, 5, 5, 6, 7, 5],
        edges=[
            (0, 1, 900), (0, 2, 900),
            (1, 3, 800), (1, 4, 800),
            (2, 5, 1000), (2, 6, 1000),
            (3, 7, 700), (4, 8, 700),
            (5, 9, 900), (6, 10, 600),
            (7, 11, 800), (8, 11, 800),
            (9, 12, 900), (10, 12, 600),
            (11, 13, 500), (12, 14, 500),
            (13, 15, 400), (14, 15, 400),
            (15, 16, 500), (16, 17, 400),
        ],
        frame_bits=1760,
    ))
    return apps


def app_map(apps) -> dict[int, Dfg]:
    return {a.app_id: a for a in apps}


# ---------------------------------------------------------------------------
# Scenario suites
# ---------------------------------------------------------------------------

def default_rate_ladder(n: int = 14, lo: float = 25.0, hi: float = 3900.0) -> list[float]:
    """Geometrically spaced data rates in Mbps, low (idle) to high (congested)."""
    if n == 1:
        return [lo]
    ratio = (hi / lo) ** (1.0 / (n - 1))
    return [round(lo * ratio ** i, 3) for i in range(n)]


def _suite_mixes(count: int, rng: random.Random, app_ids: list[int]):
    """Mix list: the single-app corners, the uniform mix, then random blends."""
    mixes = []
    for i in range(count):
        if i < len(app_ids):
            mixes.append(((app_ids[i], 1.0),))
        elif i == len(app_ids):
            w = 1.0 / len(app_ids)
            mixes.append(tuple((a, w) for a in app_ids))
        else:
            k = rng.randint(2, len(app_ids))
            chosen = sorted(rng.sample(app_ids, k))
            raw = [rng.uniform(0.5, 2.0) for _ in chosen]
            total = sum(raw)
            weights = [r / total for r in raw]
            # force exact sum-to-1 despite float division
            weights[-1] = 1.0 - sum(weights[:-1])
            mixes.append(tuple(zip(chosen, weights)))
    return mixes


def workload_suite(
    count: int,
    seed: int,
    rates=None,
    frame_count: int = 40,
    arrival_model: str = "periodic",
    apps=None,
) -> list[Scenario]:
    """Cross ``count`` application mixes with a data-rate ladder.

    Returns count * len(rates) scenarios, mix-major then rate-ascending.
    Scenario ids number the mixes, so (scenario_id, data_rate_mbps) is the
    sweep-point key.  Fully reproducible from (count, seed, rates).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if rates is None:
        rates = default_rate_ladder()
    if apps is None:
        apps = synth_app_library()
    app_ids = sorted(a.app_id for a in apps)
    rng = random.Random(seed)
    mixes = _suite_mixes(count, rng, app_ids)
    mix_seeds = [rng.getrandbits(63) for _ in range(count)]
    scenarios = []
    for mix_id, (mix, mix_seed) in enumerate(zip(mixes, mix_seeds)):
        for rate in rates:
            scenarios.append(Scenario(
                scenario_id=mix_id,
                mix=mix,
                data_rate_mbps=float(rate),
                frame_count=frame_count,
                seed=mix_seed,
                arrival_model=arrival_model,
            ))
    return scenarios


# ---------------------------------------------------------------------------
# File formats (YAML)
# ---------------------------------------------------------------------------

def save_app_library(apps, path):
    doc = {
        "format": APPS_FORMAT,
        "version": FORMAT_VERSION,
        "apps": [
            {
                "id": a.app_id,
                "name": a.name,
                "app_type": a.app_type,
                "frame_bits": a.frame_bits,
                "nodes": [{"id": n.node_id, "type": n.task_type_id} for n in a.nodes],
                "edges": [{"src": e.src, "dst": e.dst, "bytes": e.nbytes} for e in a.edges],
            }
            for a in apps
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_app_library(path) -> list[Dfg]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or doc.get("format") != APPS_FORMAT:
        raise ValueError(f"{path}: not an app-library file")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {doc.get('version')}")
    apps = []
    for entry in doc["apps"]:
        nodes = sorted(entry["nodes"], key=lambda n: n["id"])
        if [n["id"] for n in nodes] != list(range(len(nodes))):
            raise ValueError(f"app {entry.get('id')}: node ids must be dense 0..N-1")
        apps.append(build_dfg(
            app_id=int(entry["id"]),
            name=str(entry["name"]),
            node_types=[int(n["type"]) for n in nodes],
            edges=[(int(e["src"]), int(e["dst"]), float(e["bytes"])) for e in entry["edges"]],
            frame_bits=float(entry["frame_bits"]),
            app_type=int(entry.get("app_type", entry["id"])),
        ))
    return apps


def save_suite(scenarios, path):
    doc = {
        "format": SUITE_FORMAT,
        "version": FORMAT_VERSION,
        "scenarios": [
            {
                "id": s.scenario_id,
                "mix": [[a, w] for a, w in s.mix],
                "rate_mbps": s.data_rate_mbps,
                "frames": s.frame_count,
                "seed": s.seed,
                "arrival": s.arrival_model,
            }
            for s in scenarios
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_suite(path) -> list[Scenario]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or doc.get("format") != SUITE_FORMAT:
        raise ValueError(f"{path}: not a workload-suite file")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {doc.get('version')}")
    return [
        Scenario(
            scenario_id=int(e["id"]),
            mix=tuple((int(a), float(w)) for a, w in e["mix"]),
            data_rate_mbps=float(e["rate_mbps"]),
            frame_count=int(e["frames"]),
            seed=int(e["seed"]),
            arrival_model=str(e["arrival"]),
        )
        for e in doc["scenarios"]
    ]
