"""Event-driven two-valued gate-level simulation with SET/SEU fault forcing.

Timing model: every combinational cell has a delay of one tick, flip-flops
sample D on the rising clock edge (value just before the edge) and update Q
one tick later.  All nets and flip-flop states start at 0 unless the stimulus
says otherwise.

Faults:

* SET -- the cell's output net is forced to the complement of its driven value
  for ``width`` ticks, then released to whatever the driver currently wants.
* SEU -- the flip-flop's Q is forced to the complement of its stored value
  from the injection time until the next rising edge of its clock, where the
  force releases and normal capture resumes.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .faultdb import FaultKind, InjectionEvent, KindMismatch
from .netlist import FlatDesign

# truth tables indexed by the packed input bits (first input = bit 0)
TRUTH_TABLES: dict[str, tuple[int, ...]] = {
    "NOT": (1, 0),
    "BUF": (0, 1),
    "AND2": (0, 0, 0, 1),
    "OR2": (0, 1, 1, 1),
    "NAND2": (1, 1, 1, 0),
    "NOR2": (1, 0, 0, 0),
    "XOR2": (0, 1, 1, 0),
    "XNOR2": (1, 0, 0, 1),
    "MUX2": (0, 1, 0, 1, 0, 0, 1, 1),
}


class SimulationError(ValueError):
    pass


class TargetNotFound(SimulationError):
    pass


class EventAfterDuration(SimulationError):
    pass


class StimulusError(SimulationError):
    pass


class NetSetMismatch(SimulationError):
    pass


@dataclass(frozen=True)
class ClockSpec:
    net: str
    period: int
    first_edge: int

    def edges(self, duration: int) -> list[tuple[int, int]]:
        """Clock waveform changes (time, value) before ``duration``."""
        high = self.period // 2
        out = []
        t = self.first_edge
        while t < duration:
            out.append((t, 1))
            if t + high < duration:
                out.append((t + high, 0))
            t += self.period
        return out


@dataclass
class Stimulus:
    duration: int
    inputs: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    clock: ClockSpec | None = None
    initial_state: dict[str, int] = field(default_factory=dict)  # flip-flop name -> value

    def __post_init__(self):
        if self.duration <= 0:
            raise StimulusError("duration must be positive")
        for net, wave in self.inputs.items():
            times = [t for t, _ in wave]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise StimulusError(f"waveform times for {net!r} must be strictly increasing")
            if any(t < 0 for t in times) or any(v not in (0, 1) for _, v in wave):
                raise StimulusError(f"bad waveform entry for {net!r}")
        if self.clock is not None:
            if self.clock.period < 2 or self.clock.first_edge < 0:
                raise StimulusError("clock period must be >= 2 and first edge >= 0")
            if self.clock.net in self.inputs:
                raise StimulusError(f"clock net {self.clock.net!r} also has a waveform")

    def rising_edges(self) -> list[int]:
        if self.clock is None:
            return []
        return [t for t, v in self.clock.edges(self.duration) if v == 1]

    @classmethod
    def from_json(cls, text: str) -> "Stimulus":
        doc = json.loads(text)
        clock = None
        if doc.get("clock"):
            c = doc["clock"]
            clock = ClockSpec(c["net"], int(c["period"]), int(c.get("first_edge", c["period"])))
        inputs = {net: [(int(t), int(v)) for t, v in wave] for net, wave in doc.get("inputs", {}).items()}
        return cls(int(doc["duration"]), inputs, clock, dict(doc.get("initial_state", {})))

    def to_json(self) -> str:
        doc: dict = {}
        if self.clock is not None:
            doc["clock"] = {"net": self.clock.net, "period": self.clock.period, "first_edge": self.clock.first_edge}
        doc["inputs"] = {net: [list(p) for p in wave] for net, wave in self.inputs.items()}
        doc["duration"] = self.duration
        if self.initial_state:
            doc["initial_state"] = self.initial_state
        return json.dumps(doc) + "\n"


@dataclass
class Trace:
    """Piecewise-constant waveforms: per net, (time, value) change points."""

    changes: dict[str, list[tuple[int, int]]]
    end_time: int = 0

    def nets(self) -> list[str]:
        return list(self.changes)

    def value_at(self, net: str, t: int) -> int:
        val = 0
        for ct, v in self.changes[net]:
            if ct > t:
                break
            val = v
        return val

    def toggle_count(self, net: str) -> int:
        """Transitions after the initial value."""
        return max(0, len(self.changes[net]) - 1)


class Outcome(str, Enum):
    NO_ERROR = "NoError"
    SOFT_ERROR = "SoftError"


@dataclass(frozen=True)
class SoftErrorVerdict:
    outcome: Outcome
    first_divergence: tuple[str, int] | None = None

    @property
    def is_error(self) -> bool:
        return self.outcome is Outcome.SOFT_ERROR


class _Compiled:
    """Flat arrays for the simulation loop, shared between runs of one design."""

    def __init__(self, design: FlatDesign):
        self.design = design
        n_nets = len(design.nets)
        self.comb_fanout: list[tuple[int, ...]] = [() for _ in range(n_nets)]
        self.ck_fanout: list[tuple[int, ...]] = [() for _ in range(n_nets)]
        self.rst_fanout: list[tuple[int, ...]] = [() for _ in range(n_nets)]
        comb: list[list[int]] = [[] for _ in range(n_nets)]
        ck: list[list[int]] = [[] for _ in range(n_nets)]
        rst: list[list[int]] = [[] for _ in range(n_nets)]
        self.table: list[tuple[int, ...] | None] = []
        for c in design.cells:
            if c.is_sequential:
                self.table.append(None)
                ck[c.inputs[1]].append(c.id)
                if c.cell_type == "DFFR":
                    rst[c.inputs[2]].append(c.id)
            else:
                self.table.append(TRUTH_TABLES[c.cell_type])
                for net in set(c.inputs):
                    comb[net].append(c.id)
        for net in range(n_nets):
            self.comb_fanout[net] = tuple(sorted(comb[net]))
            self.ck_fanout[net] = tuple(sorted(ck[net]))
            self.rst_fanout[net] = tuple(sorted(rst[net]))
        self.inputs = [c.inputs for c in design.cells]
        self.outputs = [c.output_net for c in design.cells]
        self.comb_cells = [c.id for c in design.cells if not c.is_sequential]
        self.seq_cells = [c.id for c in design.cells if c.is_sequential]


_COMPILED: dict[int, _Compiled] = {}


def _compiled(design: FlatDesign) -> _Compiled:
    key = id(design)
    comp = _COMPILED.get(key)
    if comp is None or comp.design is not design:
        comp = _Compiled(design)
        _COMPILED.clear()
        _COMPILED[key] = comp
    return comp


def _record_set(design: FlatDesign, record) -> list[int]:
    if record is None:
        return list(design.primary_outputs)
    if record == "all":
        return list(range(len(design.nets)))
    return [design.net_id(n) if isinstance(n, str) else int(n) for n in record]


def simulate(design: FlatDesign, stim: Stimulus, events: Sequence[InjectionEvent] = (),
             record: Iterable[str] | str | None = None) -> Trace:
    """Run one simulation and return the waveforms of the recorded nets.

    ``record`` selects the nets: primary outputs by default, ``"all"`` for every
    net, or an explicit list of net names.
    """
    comp = _compiled(design)
    n_cells = len(design.cells)
    dur = stim.duration

    # ---- scheduled driver updates and fault actions
    pending: dict[int, dict[int, int]] = {}
    actions: dict[int, list[tuple[str, int]]] = {}
    times: list[int] = []
    queued: set[int] = set()

    def at(t: int) -> None:
        if t not in queued:
            queued.add(t)
            heapq.heappush(times, t)

    pis = set(design.primary_inputs)
    waves = dict(stim.inputs)
    if stim.clock is not None:
        waves[stim.clock.net] = stim.clock.edges(dur)
    for name, wave in waves.items():
        try:
            net = design.net_id(name)
        except KeyError:
            raise StimulusError(f"stimulus drives unknown net {name!r}") from None
        if net not in pis:
            raise StimulusError(f"stimulus drives {name!r}, which is not a primary input")
        for t, v in wave:
            if t < dur:
                pending.setdefault(t, {})[net] = v
                at(t)

    for k, ev in enumerate(events):
        if not 0 <= ev.target_cell < n_cells:
            raise TargetNotFound(f"no cell with id {ev.target_cell}")
        if ev.time >= dur:
            raise EventAfterDuration(f"event at t={ev.time} is not before duration {dur}")
        cell = design.cells[ev.target_cell]
        if (ev.fault_kind is FaultKind.SEU) != cell.is_sequential:
            raise KindMismatch(f"{ev.fault_kind.value} on {cell.cell_type} cell {cell.name}")
        if ev.fault_kind is FaultKind.SEU:
            actions.setdefault(ev.time, []).append(("seu", k))
        else:
            actions.setdefault(ev.time, []).append(("set", k))
            if ev.time + ev.width < dur:
                actions.setdefault(ev.time + ev.width, []).append(("release", k))
                at(ev.time + ev.width)
        at(ev.time)
    at(0)

    # ---- state
    val = [0] * len(design.nets)
    drv = [0] * len(design.nets)
    state = [0] * n_cells
    forced: dict[int, int] = {}  # net -> forced value
    owner: dict[int, int] = {}  # net -> index of the SET event currently forcing it
    upset: dict[int, int] = {}  # flip-flop -> time of the SEU forcing its Q
    for name, v in stim.initial_state.items():
        cell = design.cell_by_name(name)
        if not cell.is_sequential:
            raise StimulusError(f"initial state given for combinational cell {name!r}")
        state[cell.id] = int(v) & 1
        val[cell.output_net] = drv[cell.output_net] = state[cell.id]
    initial = list(val)

    rec_nets = _record_set(design, record)
    rec_set = set(rec_nets)
    trace_lists: dict[int, list[tuple[int, int]]] = {n: [] for n in rec_nets}

    table = comp.table
    cell_in = comp.inputs
    cell_out = comp.outputs
    comb_fanout = comp.comb_fanout
    ck_fanout = comp.ck_fanout
    rst_fanout = comp.rst_fanout

    def schedule(t: int, net: int, v: int) -> None:
        nxt = pending.get(t)
        projected = nxt[net] if nxt is not None and net in nxt else drv[net]
        if v != projected:
            pending.setdefault(t, {})[net] = v
            at(t)

    while times:
        t = heapq.heappop(times)
        if t >= dur:
            break
        updates = pending.pop(t, {})
        for net, v in updates.items():
            drv[net] = v
        touched = set(updates)

        for what, k in actions.pop(t, ()):
            ev = events[k]
            cid = ev.target_cell
            net = cell_out[cid]
            if what == "set":
                forced[net] = 1 - drv[net]
                owner[net] = k
            elif what == "release":
                # a later overlapping pulse on the same net keeps its force
                if owner.get(net) == k:
                    del forced[net]
                    del owner[net]
            else:
                forced[net] = 1 - state[cid]
                upset[cid] = t
            touched.add(net)

        old: dict[int, int] = {}  # value before this step, for nets that changed
        changed: list[int] = []

        def settle(nets) -> None:
            for net in sorted(nets):
                new = forced.get(net, drv[net])
                if new != val[net]:
                    old.setdefault(net, val[net])
                    val[net] = new
                    changed.append(net)

        settle(touched)
        # flip-flop reactions; releasing an upset Q may add changes in this step
        i = 0
        while i < len(changed):
            net = changed[i]
            i += 1
            released = set()
            if val[net] == 1:
                for cid in rst_fanout[net]:
                    state[cid] = 0
                    if cid in upset:
                        del upset[cid]
                        del forced[cell_out[cid]]
                        released.add(cell_out[cid])
                    schedule(t + 1, cell_out[cid], 0)
                if old[net] == 0:
                    for cid in ck_fanout[net]:
                        ins = cell_in[cid]
                        q = cell_out[cid]
                        fresh = upset.get(cid) == t
                        if cid in upset and not fresh:
                            del upset[cid]
                            del forced[q]
                            released.add(q)
                        if len(ins) == 3 and val[ins[2]] == 1:
                            continue
                        d = ins[0]
                        state[cid] = old.get(d, val[d])
                        schedule(t + 1, q, state[cid])
                        if fresh:
                            # upset landing on the edge tick flips the newly captured bit
                            forced[q] = 1 - state[cid]
                            released.add(q)
            if released:
                settle(released)

        for net in changed:
            if net in rec_set:
                trace_lists[net].append((t, val[net]))

        if t == 0:
            to_eval = comp.comb_cells
        elif changed:
            to_eval = sorted({cid for net in changed for cid in comb_fanout[net]})
        else:
            continue
        for cid in to_eval:
            idx = 0
            for b, net in enumerate(cell_in[cid]):
                idx |= val[net] << b
            schedule(t + 1, cell_out[cid], table[cid][idx])

    changes = {}
    for net in rec_nets:
        pts = trace_lists[net]
        if not pts or pts[0][0] != 0:
            pts.insert(0, (0, initial[net]))
        # collapse to strict changes (the t=0 point is always kept)
        clean = [pts[0]]
        for p in pts[1:]:
            if p[0] == clean[-1][0]:
                clean[-1] = p
            elif p[1] != clean[-1][1]:
                clean.append(p)
        changes[design.nets[net]] = clean
    return Trace(changes, dur)


def compare_traces(golden: Trace, faulty: Trace, window: tuple[int, int]) -> SoftErrorVerdict:
    """Golden-vs-faulty check of every recorded net on ``[t0, t1)``.

    The earliest divergence wins; nets are tie-broken by name.
    """
    if set(golden.changes) != set(faulty.changes):
        raise NetSetMismatch(
            f"recorded nets differ: {sorted(set(golden.changes) ^ set(faulty.changes))}"
        )
    t0, t1 = window
    best: tuple[int, str] | None = None
    for net in sorted(golden.changes):
        g, f = golden.changes[net], faulty.changes[net]
        if g == f:
            continue
        times = sorted({t0} | {t for t, _ in g if t0 < t < t1} | {t for t, _ in f if t0 < t < t1})
        for t in times:
            if t >= t1 or (best is not None and t >= best[0]):
                break
            if golden.value_at(net, t) != faulty.value_at(net, t):
                best = (t, net)
                break
    if best is None:
        return SoftErrorVerdict(Outcome.NO_ERROR)
    return SoftErrorVerdict(Outcome.SOFT_ERROR, (best[1], best[0]))


def settled_outputs(design: FlatDesign, vector: dict[str, int]) -> dict[str, int]:
    """Apply an input vector at t=0 to a combinational design and return the
    primary-output values once everything has settled."""
    from .netlist import levelize

    depth = max(levelize(design).values(), default=0)
    stim = Stimulus(depth + 2, {name: [(0, v)] for name, v in vector.items()})
    trace = simulate(design, stim)
    return {net: trace.changes[net][-1][1] for net in trace.changes}
