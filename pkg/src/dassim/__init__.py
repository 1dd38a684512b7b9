"""dassim: discrete-event scheduling simulator for heterogeneous SoCs.

Simulates streaming DAG workloads on a clustered SoC under a set of
scheduling policies (constant-time lookup table, earliest-finish-time list
scheduler, an overhead-free reference, a data-rate threshold baseline, and
an adaptive policy that switches per decision using a trained decision
tree), together with the offline oracle-labeling and tree-training pipeline.
"""

__version__ = "0.1.0"

from .platform import Platform, default_platform, load_platform, validate_platform
from .workload import Scenario, synth_app_library, workload_suite
from .engine import OverheadModel, SimTrace, run
from .schedulers import (
    DasPolicy, EtfIdeal, EtfOnly, LutOnly, LutPolicy, ThresholdPolicy,
)
from .classifier import DecisionTree, label_scenario, load_tree, save_tree, train_tree
from .metrics import Metrics, compare, reduce

__all__ = [
    "Platform", "default_platform", "load_platform", "validate_platform",
    "Scenario", "synth_app_library", "workload_suite",
    "OverheadModel", "SimTrace", "run",
    "DasPolicy", "EtfIdeal", "EtfOnly", "LutOnly", "LutPolicy", "ThresholdPolicy",
    "DecisionTree", "label_scenario", "load_tree", "save_tree", "train_tree",
    "Metrics", "compare", "reduce",
    "__version__",
]
