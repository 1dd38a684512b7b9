"""Offline pipeline for the fast/slow preselection classifier and its online
decision function.

Labeling runs every training scenario twice.  The first execution follows
the fast scheduler while also querying the slow scheduler at each decision:
agreeing decisions are labeled F immediately, disagreements stay pending.
The second execution follows the slow scheduler throughout; whichever run
wins the target metric resolves all of the scenario's pending labels at once
(per-decision credit assignment is deliberately avoided: one early decision
changes the entire downstream schedule, so individual replays don't scale).

The classifier itself is a small binary decision tree trained by greedy Gini
splitting with fully deterministic tie-breaking, so a given sample set
always yields the identical tree.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass

import numpy as np

from . import engine, metrics, schedulers
from .schedulers import FAST, SLOW

LABELS = (FAST, SLOW)

TREE_FORMAT = "dassim-tree"
TREE_VERSION = 1


class ClassifierError(ValueError):
    pass


class TreeFormatError(ClassifierError):
    pass


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainingSample:
    features: tuple
    label: str  # F | S | pending (None) before resolution
    scenario_id: int
    decision_index: int


@dataclass
class SampleSet:
    """Columnar training data: one row per scheduling decision."""

    X: np.ndarray  # (n, d) float64 feature matrix
    y: np.ndarray  # (n,) uint8: 0 = F, 1 = S
    scenario_ids: np.ndarray  # (n,) int64
    decision_index: np.ndarray  # (n,) int64
    feature_names: list[str]

    def __len__(self):
        return len(self.y)

    def sample(self, i: int) -> TrainingSample:
        return TrainingSample(
            features=tuple(self.X[i]),
            label=LABELS[self.y[i]],
            scenario_id=int(self.scenario_ids[i]),
            decision_index=int(self.decision_index[i]),
        )

    def label_counts(self) -> tuple[int, int]:
        n_s = int(self.y.sum())
        return len(self.y) - n_s, n_s

    @classmethod
    def concat(cls, parts) -> "SampleSet":
        parts = list(parts)
        if not parts:
            raise ClassifierError("cannot concatenate zero sample sets")
        names = parts[0].feature_names
        for p in parts[1:]:
            if p.feature_names != names:
                raise ClassifierError("sample sets have mismatched features")
        return cls(
            X=np.concatenate([p.X for p in parts]),
            y=np.concatenate([p.y for p in parts]),
            scenario_ids=np.concatenate([p.scenario_ids for p in parts]),
            decision_index=np.concatenate([p.decision_index for p in parts]),
            feature_names=list(names),
        )

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(self.feature_names) + ["label", "scenario_id", "decision_index"])
            for i in range(len(self.y)):
                row = [repr(v) for v in self.X[i].tolist()]
                row += [LABELS[self.y[i]], int(self.scenario_ids[i]), int(self.decision_index[i])]
                w.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[-3:] != ["label", "scenario_id", "decision_index"]:
                raise ClassifierError(f"{path}: not a samples CSV")
            names = header[:-3]
            xs, ys, sids, dids = [], [], [], []
            for row in reader:
                xs.append([float(v) for v in row[: len(names)]])
                label = row[len(names)]
                if label not in LABELS:
                    raise ClassifierError(f"{path}: bad label {label!r}")
                ys.append(LABELS.index(label))
                sids.append(int(row[len(names) + 1]))
                dids.append(int(row[len(names) + 2]))
        if not ys:
            raise ClassifierError(f"{path}: no samples")
        return cls(
            X=np.asarray(xs, dtype=np.float64),
            y=np.asarray(ys, dtype=np.uint8),
            scenario_ids=np.asarray(sids, dtype=np.int64),
            decision_index=np.asarray(dids, dtype=np.int64),
            feature_names=list(names),
        )


# ---------------------------------------------------------------------------
# Oracle labeling
# ---------------------------------------------------------------------------

def _metric_value(m, metric: str) -> float:
    if metric == "exec_time":
        return m.avg_job_exec_time_ns
    if metric == "edp":
        return m.edp_nj_ns
    raise ClassifierError(f"unknown target metric {metric!r} (use exec_time or edp)")


def label_scenario(platform, apps, scenario, overhead_model=None,
                   metric: str = "exec_time") -> SampleSet:
    """Two-execution oracle labeling for one scenario.

    Execution 1 follows the fast scheduler and also asks the slow scheduler
    at every decision; execution 2 follows the slow scheduler.  Pending
    labels resolve to S only if execution 2 wins the target metric.
    """
    if overhead_model is None:
        overhead_model = engine.OverheadModel()
    if metric not in ("exec_time", "edp"):
        raise ClassifierError(f"unknown target metric {metric!r} (use exec_time or edp)")

    feature_rows: list[list[float]] = []
    agreed: list[bool] = []

    def probe(sim, label, decisions, ready_tasks, fv):
        d = decisions[0]  # fast path: single table decision for the head task
        slow = schedulers.etf_schedule(ready_tasks, sim, until_task=d.task.instance_id)
        slow_pe = slow[-1].pe_id
        feature_rows.append(fv)
        agreed.append(slow_pe == d.pe_id)

    trace_fast = engine.run(platform, apps, scenario, schedulers.LutOnly(),
                            overhead_model, decision_probe=probe)
    trace_slow = engine.run(platform, apps, scenario, schedulers.EtfOnly(), overhead_model)
    fast_val = _metric_value(metrics.reduce(trace_fast), metric)
    slow_val = _metric_value(metrics.reduce(trace_slow), metric)
    pending_label = 1 if slow_val < fast_val else 0

    n = len(feature_rows)
    y = np.fromiter(
        (0 if ok else pending_label for ok in agreed), dtype=np.uint8, count=n
    )
    return SampleSet(
        X=np.asarray(feature_rows, dtype=np.float64),
        y=y,
        scenario_ids=np.full(n, scenario.scenario_id, dtype=np.int64),
        decision_index=np.arange(n, dtype=np.int64),
        feature_names=engine.feature_names(platform),
    )


def oracle_dataset(platform, apps, scenarios, overhead_model=None,
                   metric: str = "exec_time", progress=None) -> SampleSet:
    """Label every scenario and concatenate the samples."""
    parts = []
    for i, sc in enumerate(scenarios):
        parts.append(label_scenario(platform, apps, sc, overhead_model, metric))
        if progress is not None:
            progress(i + 1, len(scenarios))
    return SampleSet.concat(parts)


# ---------------------------------------------------------------------------
# Decision tree
# ---------------------------------------------------------------------------

@dataclass
class TreeLeaf:
    label: str


@dataclass
class TreeNode:
    feature: int
    threshold: float
    left: object  # TreeNode | TreeLeaf
    right: object


@dataclass
class DecisionTree:
    """Depth-bounded binary classifier over the counter feature vector.

    Walk rule: feature value strictly below the threshold goes left; values
    on the boundary go right.
    """

    max_depth: int
    features: tuple[int, ...]  # feature indices the tree was grown on
    root: object
    feature_names: tuple[str, ...] = ()

    def decide(self, vector) -> str:
        node = self.root
        while isinstance(node, TreeNode):
            try:
                v = vector[node.feature]
            except IndexError:
                raise ClassifierError(
                    f"feature index {node.feature} missing from input of length {len(vector)}"
                ) from None
            node = node.left if v < node.threshold else node.right
        return node.label

    def depth(self) -> int:
        def d(node):
            if isinstance(node, TreeLeaf):
                return 0
            return 1 + max(d(node.left), d(node.right))
        return d(self.root)

    def node_count(self) -> int:
        def c(node):
            if isinstance(node, TreeLeaf):
                return 1
            return 1 + c(node.left) + c(node.right)
        return c(self.root)

    @classmethod
    def constant(cls, label: str) -> "DecisionTree":
        if label not in LABELS:
            raise ClassifierError(f"label must be one of {LABELS}")
        return cls(max_depth=0, features=(), root=TreeLeaf(label))


def classify(tree: DecisionTree, snapshot) -> str:
    """Online decision: F or S for the next ready task.

    ``snapshot`` is a FeatureSnapshot or a raw feature sequence.
    """
    vec = snapshot.features() if hasattr(snapshot, "features") else snapshot
    return tree.decide(vec)


def _gini_pair(n0, n1) -> float:
    n = n0 + n1
    if n == 0:
        return 0.0
    p0 = n0 / n
    p1 = n1 / n
    return 1.0 - p0 * p0 - p1 * p1


def _best_split(X, y, rows, features):
    """Best (feature, threshold, gain) for the rows, or None.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values.  Ties resolve to the lower feature index, then the lower
    threshold (guaranteed by ascending scan order and strict comparison).
    """
    n = len(rows)
    total1 = int(y[rows].sum())
    total0 = n - total1
    parent = _gini_pair(total0, total1)
    best = None
    best_gain = 0.0
    for f in features:
        xs = X[rows, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        ys_sorted = y[rows][order]
        boundaries = np.nonzero(xs_sorted[1:] != xs_sorted[:-1])[0] + 1
        if boundaries.size == 0:
            continue
        ones_left = np.cumsum(ys_sorted)[boundaries - 1].astype(np.float64)
        n_left = boundaries.astype(np.float64)
        zeros_left = n_left - ones_left
        n_right = n - n_left
        ones_right = total1 - ones_left
        zeros_right = n_right - ones_right
        gini_left = 1.0 - (zeros_left / n_left) ** 2 - (ones_left / n_left) ** 2
        gini_right = 1.0 - (zeros_right / n_right) ** 2 - (ones_right / n_right) ** 2
        gains = parent - (n_left * gini_left + n_right * gini_right) / n
        i = int(np.argmax(gains))  # first maximum = lowest threshold
        if gains[i] > best_gain:
            best_gain = float(gains[i])
            b = boundaries[i]
            threshold = (xs_sorted[b - 1] + xs_sorted[b]) / 2.0
            best = (f, float(threshold), best_gain)
    return best


def _grow(X, y, rows, features, depth_left, importance, n_total):
    n1 = int(y[rows].sum())
    n0 = len(rows) - n1
    majority = FAST if n0 >= n1 else SLOW  # tie goes to the fast label
    if depth_left == 0 or n0 == 0 or n1 == 0:
        return TreeLeaf(majority)
    split = _best_split(X, y, rows, features)
    if split is None:
        return TreeLeaf(majority)
    f, threshold, gain = split
    importance[f] += gain * len(rows) / n_total
    mask = X[rows, f] < threshold
    left_rows = rows[mask]
    right_rows = rows[~mask]
    return TreeNode(
        feature=f,
        threshold=threshold,
        left=_grow(X, y, left_rows, features, depth_left - 1, importance, n_total),
        right=_grow(X, y, right_rows, features, depth_left - 1, importance, n_total),
    )


def train_tree(samples: SampleSet, depth: int, features=None) -> DecisionTree:
    """Greedy Gini-split training at a fixed depth bound on a feature subset."""
    if len(samples) == 0:
        raise ClassifierError("cannot train on an empty sample set")
    if depth < 1:
        raise ClassifierError("depth must be >= 1")
    d = samples.X.shape[1]
    if features is None:
        features = tuple(range(d))
    else:
        features = tuple(int(f) for f in features)
        if any(f < 0 or f >= d for f in features):
            raise ClassifierError(f"feature index out of range 0..{d - 1}")
    importance = np.zeros(d)
    rows = np.arange(len(samples))
    root = _grow(samples.X, samples.y, rows, features, depth, importance, len(samples))
    names = tuple(samples.feature_names[f] for f in features)
    return DecisionTree(max_depth=depth, features=features, root=root, feature_names=names)


RANK_TREE_DEPTH = 16  # reference depth for impurity-based feature ranking


def rank_features(samples: SampleSet, depth: int = RANK_TREE_DEPTH):
    """Feature indices with normalized Gini-gain importance, descending.

    Importance is accumulated over a deep reference tree grown on all
    features; a feature never split on (e.g. a constant) scores 0.
    """
    n_f, n_s = samples.label_counts()
    if n_f == 0 or n_s == 0:
        raise ClassifierError("feature ranking needs samples from both classes")
    d = samples.X.shape[1]
    importance = np.zeros(d)
    rows = np.arange(len(samples))
    _grow(samples.X, samples.y, rows, tuple(range(d)), depth, importance, len(samples))
    total = importance.sum()
    if total > 0:
        importance = importance / total
    order = sorted(range(d), key=lambda f: (-importance[f], f))
    return [(f, float(importance[f])) for f in order]


def predict(tree: DecisionTree, X: np.ndarray) -> np.ndarray:
    """Batch decide: uint8 labels (0 = F, 1 = S) for each row of X."""
    out = np.zeros(len(X), dtype=np.uint8)

    def walk(node, rows):
        if isinstance(node, TreeLeaf):
            out[rows] = LABELS.index(node.label)
            return
        mask = X[rows, node.feature] < node.threshold
        walk(node.left, rows[mask])
        walk(node.right, rows[~mask])

    walk(tree.root, np.arange(len(X)))
    return out


def accuracy(tree: DecisionTree, samples: SampleSet) -> float:
    if len(samples) == 0:
        raise ClassifierError("cannot score an empty sample set")
    return float((predict(tree, samples.X) == samples.y).mean())


def split_by_scenario(samples: SampleSet, train_frac: float = 0.7, seed: int = 0):
    """Train/held-out split at scenario granularity (no leakage between the
    decisions of one run)."""
    ids = sorted(set(samples.scenario_ids.tolist()))
    if len(ids) < 2:
        raise ClassifierError("need at least two scenarios to split")
    rng = random.Random(seed)
    rng.shuffle(ids)
    n_train = max(1, min(len(ids) - 1, int(round(train_frac * len(ids)))))
    train_ids = set(ids[:n_train])
    mask = np.fromiter(
        (int(s) in train_ids for s in samples.scenario_ids), dtype=bool,
        count=len(samples),
    )

    def subset(m):
        return SampleSet(
            X=samples.X[m], y=samples.y[m],
            scenario_ids=samples.scenario_ids[m],
            decision_index=samples.decision_index[m],
            feature_names=samples.feature_names,
        )

    return subset(mask), subset(~mask)


# ---------------------------------------------------------------------------
# Tree serialization
# ---------------------------------------------------------------------------

def _node_to_doc(node):
    if isinstance(node, TreeLeaf):
        return {"kind": "leaf", "label": node.label}
    return {
        "kind": "split",
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_doc(node.left),
        "right": _node_to_doc(node.right),
    }


def _node_from_doc(doc):
    if not isinstance(doc, dict) or "kind" not in doc:
        raise TreeFormatError(f"malformed tree node: {doc!r}")
    if doc["kind"] == "leaf":
        label = doc.get("label")
        if label not in LABELS:
            raise TreeFormatError(f"bad leaf label {label!r}")
        return TreeLeaf(label)
    if doc["kind"] == "split":
        try:
            return TreeNode(
                feature=int(doc["feature"]),
                threshold=float(doc["threshold"]),
                left=_node_from_doc(doc["left"]),
                right=_node_from_doc(doc["right"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TreeFormatError(f"malformed split node: {exc}") from None
    raise TreeFormatError(f"unknown node kind {doc['kind']!r}")


def save_tree(tree: DecisionTree, path):
    doc = {
        "format": TREE_FORMAT,
        "version": TREE_VERSION,
        "max_depth": tree.max_depth,
        "features": list(tree.features),
        "feature_names": list(tree.feature_names),
        "root": _node_to_doc(tree.root),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_tree(path) -> DecisionTree:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise TreeFormatError(f"{path}: not valid tree JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != TREE_FORMAT:
        raise TreeFormatError(f"{path}: not a {TREE_FORMAT} file")
    if doc.get("version") != TREE_VERSION:
        raise TreeFormatError(
            f"{path}: version {doc.get('version')!r} unsupported (expected {TREE_VERSION})"
        )
    return DecisionTree(
        max_depth=int(doc["max_depth"]),
        features=tuple(int(f) for f in doc.get("features", [])),
        root=_node_from_doc(doc["root"]),
        feature_names=tuple(doc.get("feature_names", [])),
    )
