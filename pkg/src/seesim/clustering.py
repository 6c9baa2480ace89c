"""Medoid clustering of cells by hierarchical distance.

Two cells are compared layer by layer along their module-instance paths
(outermost layer first).  A mismatch at layer ``i`` (1-based) of ``LN`` costs
``2**(LN - i)``, so disagreement high in the hierarchy dominates.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .netlist import CellInfo

PAD = "-"


class ClusteringError(ValueError):
    pass


class TooFewCells(ClusteringError):
    pass


class EmptyCluster(ClusteringError):
    pass


@dataclass(frozen=True)
class ClusterParams:
    kn: int
    ln: int
    seed: int = 0
    max_iterations: int = 100

    def __post_init__(self):
        if self.kn < 1 or self.ln < 1 or self.max_iterations < 1:
            raise ClusteringError(f"invalid clustering parameters {self}")


@dataclass
class Cluster:
    cluster_id: int
    center: int
    members: list[int] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.members)


def layer(path: Sequence[str], li: int) -> str:
    """Module at 1-based layer ``li`` of ``path``, or the padding token."""
    return path[li - 1] if li <= len(path) else PAD


def distance(a: CellInfo | Sequence[str], b: CellInfo | Sequence[str], ln: int) -> int:
    pa = a.path if isinstance(a, CellInfo) else a
    pb = b.path if isinstance(b, CellInfo) else b
    d = 0
    for li in range(1, ln + 1):
        if layer(pa, li) != layer(pb, li):
            d += 1 << (ln - li)
    return d


def _layer_codes(cells: Sequence[CellInfo], ln: int) -> np.ndarray:
    """Integer-encode the padded layer vectors, shape (n, ln)."""
    vocab: dict[str, int] = {PAD: 0}
    codes = np.zeros((len(cells), ln), dtype=np.int64)
    for r, c in enumerate(cells):
        for li in range(1, ln + 1):
            codes[r, li - 1] = vocab.setdefault(layer(c.path, li), len(vocab))
    return codes


def distance_matrix(cells: Sequence[CellInfo], ln: int) -> np.ndarray:
    codes = _layer_codes(cells, ln)
    weights = 1 << np.arange(ln - 1, -1, -1, dtype=np.int64)
    mism = codes[:, None, :] != codes[None, :, :]
    return (mism * weights).sum(axis=2)


class _Space:
    """Distances between cells of one clustering run, addressed by cell id."""

    def __init__(self, cells: Sequence[CellInfo], ln: int):
        self.ids = [c.id for c in cells]
        self.pos = {cid: k for k, cid in enumerate(self.ids)}
        self.ln = ln
        # distinct paths are few; distances go through path classes
        classes: dict[tuple[str, ...], int] = {}
        reps = []
        self.cls = np.empty(len(cells), dtype=np.int64)
        for k, c in enumerate(cells):
            key = tuple(layer(c.path, li) for li in range(1, ln + 1))
            if key not in classes:
                classes[key] = len(reps)
                reps.append(c)
            self.cls[k] = classes[key]
        self.class_dist = distance_matrix(reps, ln)

    def rows(self, ids: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        ci = self.cls[[self.pos[i] for i in ids]]
        cj = self.cls[[self.pos[j] for j in cols]]
        return self.class_dist[np.ix_(ci, cj)]


def assign_cells(cells: Sequence[CellInfo], centers: Sequence[int], ln: int, _space: _Space | None = None) -> list[Cluster]:
    """Put every cell in the cluster of its nearest center (ties: lowest center index)."""
    if not centers:
        raise ClusteringError("no centers")
    if len(set(centers)) != len(centers):
        raise ClusteringError("centers must be distinct")
    space = _space or _Space(cells, ln)
    ids = [c.id for c in cells]
    d = space.rows(ids, list(centers))
    nearest = np.argmin(d, axis=1)  # first minimum = lowest index
    clusters = [Cluster(k, cid) for k, cid in enumerate(centers)]
    for cid, k in zip(ids, nearest):
        clusters[k].members.append(cid)
    return clusters


def update_centers(clusters: Sequence[Cluster], ln: int, cells: Sequence[CellInfo] | None = None,
                   _space: _Space | None = None) -> list[int]:
    """Medoid of each cluster: the member with minimal distance sum (ties: lowest id)."""
    if _space is None:
        if cells is None:
            raise ClusteringError("update_centers needs the cell list")
        _space = _Space(cells, ln)
    centers = []
    for cl in clusters:
        if not cl.members:
            raise EmptyCluster(f"cluster {cl.cluster_id} is empty")
        members = sorted(cl.members)
        sums = _space.rows(members, members).sum(axis=1)
        centers.append(members[int(np.argmin(sums))])
    return centers


def within_cluster_cost(clusters: Sequence[Cluster], space: _Space) -> int:
    """Sum over clusters of distances from members to their center."""
    return int(sum(space.rows([cl.center], cl.members).sum() for cl in clusters))


def _reseed_empty(clusters: list[Cluster], centers: list[int], space: _Space) -> list[Cluster]:
    # a cluster only empties when a lower-indexed center at distance 0 takes
    # its cells; hand it the non-center cell farthest from the live centers
    for cl in clusters:
        if cl.members:
            continue
        live = [other.center for other in clusters if other.members]
        pool = [cid for other in clusters if other.size > 1 for cid in other.members if cid != other.center]
        far = space.rows(pool, live).min(axis=1)
        pick = pool[int(np.argmax(far))]
        for other in clusters:
            if pick in other.members:
                other.members.remove(pick)
        cl.center = pick
        cl.members = [pick]
        centers[cl.cluster_id] = pick
    return clusters


def cluster_cells(cells: Sequence[CellInfo], params: ClusterParams, history: list | None = None) -> list[Cluster]:
    """Alternate nearest-center assignment and medoid update until the center
    set stops changing.

    If ``history`` is given, the within-cluster cost after every assignment
    step is appended to it.
    """
    if params.kn > len(cells):
        raise TooFewCells(f"KN={params.kn} exceeds the {len(cells)} cells")
    space = _Space(cells, params.ln)
    rng = np.random.default_rng(params.seed)
    ids = [c.id for c in cells]
    centers = [ids[k] for k in sorted(rng.choice(len(ids), size=params.kn, replace=False))]
    clusters = []
    for _ in range(params.max_iterations):
        clusters = assign_cells(cells, centers, params.ln, _space=space)
        reseeded = any(not cl.members for cl in clusters)
        if reseeded:
            clusters = _reseed_empty(clusters, centers, space)
        if history is not None:
            history.append(within_cluster_cost(clusters, space))
        new_centers = update_centers(clusters, params.ln, _space=space)
        # a reseeded center has not had cells assigned to it yet
        if set(new_centers) == set(centers) and not reseeded:
            break
        centers = new_centers
    for cl in clusters:
        cl.members.sort()
    return clusters


def cluster_of(clusters: Sequence[Cluster]) -> dict[int, int]:
    """Map cell id -> cluster id."""
    return {cid: cl.cluster_id for cl in clusters for cid in cl.members}


def clusters_to_json(clusters: Sequence[Cluster], params: ClusterParams) -> str:
    doc = {
        "params": asdict(params),
        "clusters": [{"id": cl.cluster_id, "center": cl.center, "members": list(cl.members)} for cl in clusters],
    }
    return json.dumps(doc, indent=2) + "\n"


def clusters_from_json(text: str) -> tuple[list[Cluster], ClusterParams]:
    doc = json.loads(text)
    params = ClusterParams(**doc["params"])
    clusters = [Cluster(c["id"], c["center"], list(c["members"])) for c in doc["clusters"]]
    return clusters, params
