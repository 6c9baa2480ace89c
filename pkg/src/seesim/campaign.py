"""Fault-injection campaigns: sampling, injection lists, batch simulation and
soft-error-rate aggregation."""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .clustering import Cluster
from .faultdb import FaultDb, FaultKind, InjectionEvent, UnknownCellType, cross_section, expected_kind, make_event
from .gatesim import Stimulus, Trace, compare_traces, simulate
from .netlist import FlatDesign

# stream tags keep sampling and event draws independent for one seed
_SAMPLE_STREAM = 0
_EVENT_STREAM = 1
_NODE_STREAM = 2


class CampaignError(ValueError):
    pass


class MissingFaultRecord(CampaignError):
    pass


class ZeroFluence(CampaignError):
    pass


@dataclass(frozen=True)
class CampaignConfig:
    let: float
    flux: float  # particles / (cm^2 s)
    device_area: float  # cm^2
    window: float  # s
    sample_fraction: float = 1.0
    seed: int = 0
    stimulus: str = ""

    def __post_init__(self):
        if self.let <= 0 or self.device_area <= 0 or self.window <= 0:
            raise CampaignError("let, device_area and window must be positive")
        if self.flux < 0:
            raise CampaignError("flux must be non-negative")
        if not 0 < self.sample_fraction <= 1:
            raise CampaignError("sample_fraction must be in (0, 1]")
        if self.seed < 0:
            raise CampaignError("seed must be non-negative")

    @property
    def fluence(self) -> float:
        return self.flux * self.window

    @property
    def num_events(self) -> int:
        return _round_half_up(self.flux * self.device_area * self.window)


def _round_half_up(x: float) -> int:
    # absorb float noise such as 4e8 * 1e-5 * 1e-3 = 4.000000000000001
    return int(math.floor(round(x, 9) + 0.5))


def sample_cells(clusters: Sequence[Cluster], fraction: float, seed: int) -> dict[int, list[int]]:
    """Draw ``max(1, round(n * fraction))`` members from every cluster, without replacement."""
    if not 0 < fraction <= 1:
        raise CampaignError("fraction must be in (0, 1]")
    out = {}
    for cl in clusters:
        members = sorted(cl.members)
        k = min(len(members), max(1, _round_half_up(len(members) * fraction)))
        rng = np.random.default_rng([seed, _SAMPLE_STREAM, cl.cluster_id])
        pick = rng.choice(len(members), size=k, replace=False)
        out[cl.cluster_id] = sorted(members[i] for i in pick)
    return out


def build_injection_list(design: FlatDesign, samples: dict[int, list[int]], db: FaultDb,
                         cfg: CampaignConfig, stim: Stimulus) -> list[InjectionEvent]:
    """Draw the campaign's particle strikes.

    Each strike hits a sampled cell with probability proportional to the cell's
    cross-section at the configured LET and lands at a uniform tick of the
    stimulus.
    """
    pool = sorted({cid for ids in samples.values() for cid in ids})
    weights = []
    for cid in pool:
        cell = design.cells[cid]
        try:
            weights.append(cross_section(db, cell.cell_type, expected_kind(cell.cell_type), cfg.let))
        except UnknownCellType:
            raise MissingFaultRecord(f"no fault record for {cell.cell_type} (cell {cell.name})") from None
    n = cfg.num_events
    total = float(sum(weights))
    if n == 0 or not pool or total <= 0:
        return []
    p = np.asarray(weights, dtype=float) / total
    events = []
    for i in range(n):
        rng = np.random.default_rng([cfg.seed, _EVENT_STREAM, i])
        target = pool[int(rng.choice(len(pool), p=p))]
        t = int(rng.integers(0, stim.duration))
        events.append(make_event(design.cells[target], t, cfg.let, db))
    return events


def node_injection_list(design: FlatDesign, cells: Sequence[int], per_node: int, db: FaultDb,
                        let: float, stim: Stimulus, seed: int) -> list[InjectionEvent]:
    """``per_node`` strikes on every listed cell at seeded uniform times."""
    events = []
    for cid in sorted(cells):
        rng = np.random.default_rng([seed, _NODE_STREAM, cid])
        for t in rng.integers(0, stim.duration, size=per_node):
            events.append(make_event(design.cells[cid], int(t), let, db))
    return events


# --------------------------------------------------------------------------
# simulation


@dataclass
class EventOutcome:
    event: InjectionEvent
    soft_error: bool
    divergence: tuple[str, int] | None = None


_WORKER: dict = {}


def _init_worker(design, stim, golden):
    _WORKER.update(design=design, stim=stim, golden=golden)


def _inject_one(ev: InjectionEvent, design=None, stim=None, golden=None) -> EventOutcome:
    design = design or _WORKER["design"]
    stim = stim or _WORKER["stim"]
    golden = golden or _WORKER["golden"]
    faulty = simulate(design, stim, [ev], record=golden.nets())
    verdict = compare_traces(golden, faulty, (ev.time, stim.duration))
    return EventOutcome(ev, verdict.is_error, verdict.first_divergence)


def inject_all(design: FlatDesign, stim: Stimulus, events: Sequence[InjectionEvent],
               golden: Trace | None = None, jobs: int | None = 1) -> list[EventOutcome]:
    """One independent faulty simulation per event, results in event order."""
    if golden is None:
        golden = simulate(design, stim)
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(events) < 2:
        return [_inject_one(ev, design, stim, golden) for ev in events]
    chunk = max(1, len(events) // (4 * jobs))
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(design, stim, golden)) as pool:
        return list(pool.map(_inject_one, events, chunksize=chunk))


@dataclass
class NodeStat:
    injections: int = 0
    errors: int = 0

    @property
    def sensitivity(self) -> float:
        return self.errors / self.injections if self.injections else 0.0


@dataclass
class ClusterRow:
    cluster_id: int
    size: int
    sampled: list[int]
    injections: int = 0
    errors: int = 0
    errors_set: int = 0
    errors_seu: int = 0
    ser: float = 0.0

    @property
    def unsampled(self) -> bool:
        return self.injections == 0


@dataclass
class CampaignResult:
    clusters: list[ClusterRow]
    nodes: dict[int, NodeStat] = field(default_factory=dict)
    outcomes: list[EventOutcome] = field(default_factory=list)
    chip_ser: float = 0.0
    xsect_set: float | None = None
    xsect_seu: float | None = None
    ranking: list[dict] = field(default_factory=list)

    def row(self, cluster_id: int) -> ClusterRow:
        for r in self.clusters:
            if r.cluster_id == cluster_id:
                return r
        raise KeyError(cluster_id)


def tally(outcomes: Sequence[EventOutcome], clusters: Sequence[Cluster],
          samples: dict[int, list[int]] | None = None) -> CampaignResult:
    owner = {cid: cl.cluster_id for cl in clusters for cid in cl.members}
    rows = {cl.cluster_id: ClusterRow(cl.cluster_id, cl.size, sorted((samples or {}).get(cl.cluster_id, [])))
            for cl in clusters}
    nodes: dict[int, NodeStat] = {}
    for out in outcomes:
        cid = out.event.target_cell
        row = rows[owner[cid]]
        stat = nodes.setdefault(cid, NodeStat())
        stat.injections += 1
        row.injections += 1
        if out.soft_error:
            stat.errors += 1
            row.errors += 1
            if out.event.fault_kind is FaultKind.SET:
                row.errors_set += 1
            else:
                row.errors_seu += 1
    result = CampaignResult([rows[cl.cluster_id] for cl in clusters], dict(sorted(nodes.items())), list(outcomes))
    for row, ser in zip(result.clusters, cluster_ser(result).values()):
        row.ser = ser
    return result


def run_campaign(design: FlatDesign, stim: Stimulus, events: Sequence[InjectionEvent],
                 clusters: Sequence[Cluster], samples: dict[int, list[int]] | None = None,
                 jobs: int | None = 1, golden: Trace | None = None) -> CampaignResult:
    """Simulate every event against one golden run and tally per cluster and node."""
    outcomes = inject_all(design, stim, events, golden=golden, jobs=jobs)
    return tally(outcomes, clusters, samples)


# --------------------------------------------------------------------------
# aggregation


def cluster_ser(result: CampaignResult) -> dict[int, float]:
    """Soft errors per injection for every cluster (0 for clusters never hit)."""
    return {r.cluster_id: (r.errors / r.injections if r.injections else 0.0) for r in result.clusters}


def chip_ser(result: CampaignResult, clusters: Sequence[Cluster] | None = None) -> float:
    """Cluster-size weighted mean of the cluster SERs."""
    sizes = {cl.cluster_id: cl.size for cl in clusters} if clusters is not None else \
        {r.cluster_id: r.size for r in result.clusters}
    sers = cluster_ser(result)
    total = sum(sizes[c] for c in sers)
    if total == 0:
        return 0.0
    return sum(sizes[c] * sers[c] for c in sers) / total


def weighted_ser(sizes: Sequence[int], sers: Sequence[float]) -> float:
    total = sum(sizes)
    return sum(n * s for n, s in zip(sizes, sers)) / total if total else 0.0


def estimate_xsect(result: CampaignResult, cfg: CampaignConfig) -> tuple[float, float]:
    """(SET, SEU) cross-sections in cm^2: soft errors of each kind per unit fluence."""
    fluence = cfg.fluence
    if fluence <= 0:
        raise ZeroFluence("cross-section needs a positive fluence (flux * window)")
    n_set = sum(r.errors_set for r in result.clusters)
    n_seu = sum(r.errors_seu for r in result.clusters)
    return n_set / fluence, n_seu / fluence


def rank_sensitive_nodes(result: CampaignResult, clusters: Sequence[Cluster] | None = None) -> list[dict]:
    """Injected nodes, most sensitive cluster first, then by node sensitivity."""
    sers = cluster_ser(result)
    owner = {}
    if clusters is not None:
        owner = {cid: cl.cluster_id for cl in clusters for cid in cl.members}
    else:
        for r in result.clusters:
            owner.update({cid: r.cluster_id for cid in r.sampled})
    order = sorted(sers, key=lambda c: (-sers[c], c))
    ranked = []
    for cl_id in order:
        nodes = [(cid, st) for cid, st in result.nodes.items() if owner.get(cid) == cl_id]
        nodes.sort(key=lambda p: (-p[1].sensitivity, p[0]))
        for cid, st in nodes:
            ranked.append({
                "cell": cid,
                "cluster": cl_id,
                "cluster_ser": sers[cl_id],
                "injections": st.injections,
                "errors": st.errors,
                "sensitivity": st.sensitivity,
            })
    return ranked


def finalize(result: CampaignResult, clusters: Sequence[Cluster], cfg: CampaignConfig) -> CampaignResult:
    result.chip_ser = chip_ser(result, clusters)
    if cfg.fluence > 0:
        result.xsect_set, result.xsect_seu = estimate_xsect(result, cfg)
    result.ranking = rank_sensitive_nodes(result, clusters)
    return result


def sensitivity_histogram(result: CampaignResult, bins: int = 10) -> list[int]:
    """Counts of injected nodes per sensitivity bin over [0, 1]."""
    counts = [0] * bins
    for st in result.nodes.values():
        counts[min(bins - 1, int(st.sensitivity * bins))] += 1
    return counts


# --------------------------------------------------------------------------
# reports


def campaign_report(result: CampaignResult, cfg: CampaignConfig, design: FlatDesign) -> dict:
    return {
        "config": asdict(cfg),
        "num_events": len(result.outcomes),
        "clusters": [
            {
                "id": r.cluster_id,
                "size": r.size,
                "sampled": r.sampled,
                "injections": r.injections,
                "errors": r.errors,
                "errors_set": r.errors_set,
                "errors_seu": r.errors_seu,
                "ser": r.ser,
                "unsampled": r.unsampled,
            }
            for r in result.clusters
        ],
        "chip_ser": result.chip_ser,
        "xsect_set": result.xsect_set,
        "xsect_seu": result.xsect_seu,
        "sensitivity_histogram": sensitivity_histogram(result),
        "ranking": [dict(item, name=design.cells[item["cell"]].name) for item in result.ranking],
        "nodes": {str(cid): {"injections": st.injections, "errors": st.errors} for cid, st in result.nodes.items()},
        "events": [
            dict(o.event.to_json(), soft_error=o.soft_error,
                 divergence=list(o.divergence) if o.divergence else None)
            for o in result.outcomes
        ],
    }


def report_from_json(doc: dict) -> CampaignResult:
    rows = [ClusterRow(c["id"], c["size"], list(c["sampled"]), c["injections"], c["errors"],
                       c["errors_set"], c["errors_seu"], c["ser"]) for c in doc["clusters"]]
    nodes = {int(k): NodeStat(v["injections"], v["errors"]) for k, v in doc["nodes"].items()}
    outcomes = [EventOutcome(InjectionEvent.from_json(e), e["soft_error"],
                             tuple(e["divergence"]) if e["divergence"] else None) for e in doc["events"]]
    return CampaignResult(rows, nodes, outcomes, doc["chip_ser"], doc["xsect_set"], doc["xsect_seu"],
                          [{k: v for k, v in item.items() if k != "name"} for item in doc["ranking"]])


def format_table(result: CampaignResult, cfg: CampaignConfig, label: str = "design") -> str:
    """Plain-text summary in the style of a per-module soft-error table."""
    head = f"{'Cluster':>7} {'Size':>6} {'Sampled':>7} {'Inj':>6} {'Errors':>6} {'SER (%)':>8}"
    lines = [f"{label}: LET={cfg.let:g} MeV*cm^2/mg  flux={cfg.flux:g} /cm^2/s  window={cfg.window:g} s", head]
    for r in result.clusters:
        flag = "  unsampled" if r.unsampled else ""
        lines.append(f"{r.cluster_id:>7} {r.size:>6} {len(r.sampled):>7} {r.injections:>6} {r.errors:>6} "
                     f"{100 * r.ser:>8.2f}{flag}")
    xs = lambda v: "n/a" if v is None else f"{v:.2E}"
    lines.append(f"Chip SER (%): {100 * result.chip_ser:.2f}   Clusters: {len(result.clusters)}   "
                 f"SET Xsect (cm^2): {xs(result.xsect_set)}   SEU Xsect (cm^2): {xs(result.xsect_seu)}")
    return "\n".join(lines) + "\n"


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def timed(fn, *args, **kwargs):
    """Call ``fn`` and return (result, wall seconds)."""
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
