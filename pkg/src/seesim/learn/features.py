"""Per-node structural features, labels and min-max preprocessing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from ..clustering import Cluster
from ..gatesim import Trace
from ..netlist import FlatDesign, fan_in, fan_out, levelize, reverse_levelize
from .svm import SingleClassDataset

FEATURE_NAMES = (
    "fan_in",
    "fan_out",
    "depth_from_inputs",
    "depth_to_outputs",
    "is_sequential",
    "hierarchy_depth",
    "cluster_size",
    "toggle_count",
)
BOOLEAN_FEATURES = frozenset({"is_sequential"})

HIGH = 1
LOW = -1


@dataclass(frozen=True)
class FeatureVector:
    node: int
    values: tuple[float, ...]
    label: int | None = None  # +1 high sensitivity, -1 low, None unknown

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))


def extract_features(design: FlatDesign, clusters: Sequence[Cluster], golden: Trace) -> list[FeatureVector]:
    """One vector per cell.

    ``golden`` must record every cell output net (``simulate(..., record="all")``).
    """
    levels = levelize(design)
    rlevels = reverse_levelize(design)
    size_of = {cid: cl.size for cl in clusters for cid in cl.members}
    out = []
    for c in design.cells:
        net = design.nets[c.output_net]
        if net not in golden.changes:
            raise ValueError(f"golden trace does not record net {net!r}; simulate with record='all'")
        vals = (
            fan_in(design, c.id),
            fan_out(design, c.id),
            levels[c.id],
            rlevels[c.id],
            1 if c.is_sequential else 0,
            len(c.path),
            size_of.get(c.id, 1),
            golden.toggle_count(net),
        )
        out.append(FeatureVector(c.id, tuple(float(v) for v in vals)))
    return out


def label_nodes(vectors: Sequence[FeatureVector], sensitivity: Mapping[int, float], tau: float) -> list[FeatureVector]:
    """+1 where the node's empirical sensitivity reaches ``tau``, -1 below it;
    nodes without a measurement stay unlabeled."""
    out = []
    for v in vectors:
        s = sensitivity.get(v.node)
        label = None if s is None else (HIGH if s >= tau else LOW)
        out.append(replace(v, label=label))
    return out


@dataclass
class Dataset:
    X: np.ndarray  # normalized candidate features, (n, d)
    y: np.ndarray  # +1 / -1
    norm_min: np.ndarray
    norm_max: np.ndarray
    nodes: list[int] = field(default_factory=list)
    mask: np.ndarray | None = None
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        if self.mask is None:
            self.mask = np.ones(self.X.shape[1], dtype=bool)

    def __len__(self):
        return len(self.y)

    def with_mask(self, mask) -> "Dataset":
        return replace(self, mask=np.asarray(mask, dtype=bool))

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return replace(self, X=self.X[rows], y=self.y[rows], nodes=[self.nodes[r] for r in rows])

    def denormalize(self) -> np.ndarray:
        return self.norm_min + self.X * (self.norm_max - self.norm_min)

    def to_json(self) -> str:
        doc = {
            "feature_names": list(self.feature_names),
            "nodes": list(self.nodes),
            "X": self.X.tolist(),
            "y": self.y.astype(int).tolist(),
            "norm_min": self.norm_min.tolist(),
            "norm_max": self.norm_max.tolist(),
            "mask": self.mask.tolist(),
        }
        return json.dumps(doc) + "\n"


def normalize(raw: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (raw - lo) / safe, 0.0)


def preprocess(vectors: Sequence[FeatureVector]) -> Dataset:
    """Drop unlabeled rows, then min-max scale every feature over the labeled rows.

    Booleans are already 0/1 and pass through the same scaling unchanged;
    constant columns map to 0.
    """
    rows = [v for v in vectors if v.label is not None]
    labels = np.array([v.label for v in rows], dtype=float)
    if len(rows) < 2 or len(np.unique(labels)) < 2:
        raise SingleClassDataset("need at least two labeled nodes covering both classes")
    raw = np.array([v.values for v in rows], dtype=float)
    for k, name in enumerate(FEATURE_NAMES):
        if name in BOOLEAN_FEATURES and not np.isin(raw[:, k], (0.0, 1.0)).all():
            raise ValueError(f"feature {name} must be 0/1")
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    return Dataset(normalize(raw, lo, hi), labels, lo, hi, [v.node for v in rows])


def raw_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    if not vectors:
        return np.zeros((0, len(FEATURE_NAMES)))
    return np.array([v.values for v in vectors], dtype=float)
