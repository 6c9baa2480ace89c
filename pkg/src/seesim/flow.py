"""Stage helpers chaining campaign results into training, prediction and the
campaign-vs-prediction comparison."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .campaign import CampaignResult, NodeStat, inject_all, node_injection_list, tally
from .clustering import Cluster
from .faultdb import FaultDb
from .gatesim import Stimulus, simulate
from .learn.features import FEATURE_NAMES, Dataset, FeatureVector, extract_features, label_nodes, preprocess
from .learn.metrics import Metrics, confusion, roc
from .learn.selection import (DEFAULT_C_GRID, DEFAULT_GAMMA_GRID, Prediction, cross_validate,
                              forward_feature_selection, grid_search, predict_sensitivity)
from .learn.svm import SvmModel, train_svm
from .netlist import FlatDesign


def node_features(design: FlatDesign, clusters: Sequence[Cluster], stim: Stimulus) -> list[FeatureVector]:
    golden = simulate(design, stim, record="all")
    return extract_features(design, clusters, golden)


def sensitivities(nodes: Mapping[int, NodeStat]) -> dict[int, float]:
    return {cid: st.sensitivity for cid, st in nodes.items() if st.injections > 0}


@dataclass
class TrainOutcome:
    model: SvmModel
    dataset: Dataset
    tau: float
    curve: list[float]
    order: list[int]
    C: float
    gamma: float
    cv_accuracy: float
    grid: list[tuple[float, float, float]]
    cv_metrics: Metrics
    fold_metrics: list[Metrics]
    roc_points: list[tuple[float, float]]
    auc: float

    def metrics_doc(self) -> dict:
        per_fold = [m.as_dict() for m in self.fold_metrics]
        keys = ("TPR", "TNR", "precision", "accuracy", "F1")
        return {
            "tau": self.tau,
            "num_samples": len(self.dataset),
            "num_positive": int((self.dataset.y > 0).sum()),
            "selected_features": [FEATURE_NAMES[i] for i in np.flatnonzero(self.dataset.mask)],
            "selection_order": [FEATURE_NAMES[i] for i in self.order],
            "selection_curve": self.curve,
            "C": self.C,
            "gamma": self.gamma,
            "grid": [{"C": c, "gamma": g, "accuracy": a} for c, g, a in self.grid],
            "cv_pooled": self.cv_metrics.as_dict(),
            "cv_fold_mean": {k: float(np.mean([f[k] for f in per_fold])) for k in keys},
            "auc": self.auc,
        }


def train_from_campaign(vectors: Sequence[FeatureVector], result: CampaignResult, tau: float | None = None,
                        folds: int = 10, seed: int = 0, C_grid=DEFAULT_C_GRID, gamma_grid=DEFAULT_GAMMA_GRID,
                        jobs: int = 1) -> TrainOutcome:
    """Label injected nodes, select features, tune (C, gamma), cross-validate and fit."""
    tau = result.chip_ser if tau is None else tau
    labeled = label_nodes(vectors, sensitivities(result.nodes), tau)
    ds = preprocess(labeled)
    mask, curve, order = forward_feature_selection(ds, folds, seed)
    ds = ds.with_mask(mask)
    C, gamma, acc, grid = grid_search(ds, C_grid, gamma_grid, folds, seed, jobs=jobs)
    pooled, scores, per_fold = cross_validate(ds, C, gamma, folds, seed)
    points, auc = roc(scores, ds.y)
    model = train_svm(ds, C, gamma, seed=seed)
    return TrainOutcome(model, ds, tau, curve, order, C, gamma, acc, grid, pooled, per_fold, points, auc)


@dataclass
class Verification:
    """Ground truth for predicted nodes from direct injection."""

    nodes: dict[int, NodeStat]
    labels: dict[int, int]
    metrics: Metrics
    wall_time: float


def verify_by_injection(design: FlatDesign, stim: Stimulus, clusters: Sequence[Cluster], db: FaultDb,
                        prediction: Prediction, tau: float, per_node: int, let: float, seed: int,
                        jobs: int = 1) -> Verification:
    """Inject ``per_node`` strikes into every predicted node and score the prediction."""
    t0 = time.perf_counter()
    events = node_injection_list(design, prediction.nodes, per_node, db, let, stim, seed)
    outcomes = inject_all(design, stim, events, jobs=jobs)
    wall = time.perf_counter() - t0
    nodes = tally(outcomes, clusters).nodes
    labels = {cid: (1 if st.sensitivity >= tau else -1) for cid, st in nodes.items()}
    truth = [labels[n] for n in prediction.nodes]
    return Verification(nodes, labels, confusion(prediction.labels, truth), wall)


def unlabeled_nodes(vectors: Sequence[FeatureVector], result: CampaignResult) -> list[FeatureVector]:
    measured = sensitivities(result.nodes)
    return [v for v in vectors if v.node not in measured]


def module_of(path: Sequence[str], module_map: Mapping[str, Sequence[str]]) -> str:
    """Group of the first map entry whose instance prefix matches ``path``."""
    for group, prefixes in module_map.items():
        for prefix in prefixes:
            parts = tuple(prefix.split("."))
            if tuple(path[:len(parts)]) == parts:
                return group
    return "other"


def high_sensitivity_proportions(design: FlatDesign, classes: Mapping[int, int],
                                 module_map: Mapping[str, Sequence[str]]) -> dict:
    """Share (percent) of high-sensitivity nodes falling in each module group."""
    groups = list(module_map) + ["other"]
    high = {g: 0 for g in groups}
    total = {g: 0 for g in groups}
    for cid, label in classes.items():
        g = module_of(design.cells[cid].path, module_map)
        total[g] += 1
        if label > 0:
            high[g] += 1
    n_high = sum(high.values())
    if total["other"] == 0:
        groups.remove("other")
    return {
        g: {
            "nodes": total[g],
            "high": high[g],
            "share_percent": 100.0 * high[g] / n_high if n_high else 0.0,
            "within_group_percent": 100.0 * high[g] / total[g] if total[g] else 0.0,
        }
        for g in groups
    }


@dataclass
class Comparison:
    injection_time: float
    prediction_time: float
    nodes: int
    accuracy: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def speedup(self) -> float:
        return self.injection_time / self.prediction_time if self.prediction_time > 0 else float("inf")


def combined_classes(result: CampaignResult, tau: float, prediction: Prediction) -> dict[int, int]:
    """Measured class for injected nodes, predicted class for the rest."""
    classes = {cid: (1 if s >= tau else -1) for cid, s in sensitivities(result.nodes).items()}
    for node, label in zip(prediction.nodes, prediction.labels):
        classes.setdefault(node, int(label))
    return dict(sorted(classes.items()))

