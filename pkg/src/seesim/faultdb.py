"""SET/SEU soft-error database and injection-event construction.

The database maps library cell types to a fault kind (SET for combinational
cells, SEU for flip-flops), an LET -> cross-section table and, for SET, an
LET -> pulse-width table.  Example file::

    {"time_unit_ns": 1.0,
     "cell_types": {
        "DFF":   {"fault_kind": "SEU", "let_xsect": [[1.0, 1e-9], [37.0, 5e-9], [100.0, 8e-9]]},
        "NAND2": {"fault_kind": "SET", "let_xsect": [[1.0, 2e-10], [100.0, 9e-10]],
                  "pulse_width": [[1.0, 1], [100.0, 3]]}}}
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .netlist import LIBRARY, SEQUENTIAL_TYPES, CellInfo


class FaultKind(str, Enum):
    SET = "SET"
    SEU = "SEU"


class FaultDbError(ValueError):
    pass


class SchemaError(FaultDbError):
    pass


class NonMonotoneLET(FaultDbError):
    pass


class KindMismatch(FaultDbError):
    pass


class UnknownCellType(FaultDbError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


@dataclass(frozen=True)
class FaultRecord:
    cell_type: str
    fault_kind: FaultKind
    let_xsect: tuple[tuple[float, float], ...]
    pulse_width: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class InjectionEvent:
    target_cell: int
    fault_kind: FaultKind
    time: int
    width: int = 0  # SET only

    def __post_init__(self):
        if self.time < 0:
            raise ValueError(f"negative injection time {self.time}")
        if self.fault_kind is FaultKind.SET and self.width <= 0:
            raise ValueError("SET events need a positive width")

    def to_json(self) -> dict:
        doc = {"cell": self.target_cell, "kind": self.fault_kind.value, "time": self.time}
        if self.fault_kind is FaultKind.SET:
            doc["width"] = self.width
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "InjectionEvent":
        return cls(doc["cell"], FaultKind(doc["kind"]), doc["time"], doc.get("width", 0))


def expected_kind(cell_type: str) -> FaultKind:
    return FaultKind.SEU if cell_type in SEQUENTIAL_TYPES else FaultKind.SET


@dataclass(frozen=True)
class FaultDb:
    records: dict[str, FaultRecord]
    time_unit_ns: float = 1.0

    def record(self, cell_type: str, fault_kind: FaultKind | str | None = None) -> FaultRecord:
        rec = self.records.get(cell_type)
        if rec is None or (fault_kind is not None and rec.fault_kind is not FaultKind(fault_kind)):
            what = f"{FaultKind(fault_kind).value} record" if fault_kind is not None else "record"
            raise UnknownCellType(f"no {what} for cell type {cell_type!r}")
        return rec

    def to_json(self) -> str:
        cell_types = {}
        for name, rec in self.records.items():
            entry = {"fault_kind": rec.fault_kind.value, "let_xsect": [list(p) for p in rec.let_xsect]}
            if rec.pulse_width:
                entry["pulse_width"] = [list(p) for p in rec.pulse_width]
            cell_types[name] = entry
        return json.dumps({"time_unit_ns": self.time_unit_ns, "cell_types": cell_types}, indent=2) + "\n"


def _table(name: str, key: str, raw, positive: bool) -> tuple[tuple[float, float], ...]:
    if not isinstance(raw, list) or not raw:
        raise SchemaError(f"{name}.{key} must be a non-empty list of [let, value] pairs")
    pts = []
    for p in raw:
        if not (isinstance(p, (list, tuple)) and len(p) == 2 and all(isinstance(v, (int, float)) for v in p)):
            raise SchemaError(f"{name}.{key}: bad entry {p!r}")
        let, val = float(p[0]), float(p[1])
        if not (math.isfinite(let) and math.isfinite(val)) or let < 0:
            raise SchemaError(f"{name}.{key}: bad entry {p!r}")
        if (val <= 0) if positive else (val < 0):
            raise SchemaError(f"{name}.{key}: value {val} out of range")
        pts.append((let, val))
    for (a, _), (b, _) in zip(pts, pts[1:]):
        if not b > a:
            raise NonMonotoneLET(f"{name}.{key}: LET values must be strictly increasing ({a} then {b})")
    return tuple(pts)


def load_fault_db(text: str) -> FaultDb:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("cell_types"), dict):
        raise SchemaError("expected an object with a 'cell_types' map")
    unit = doc.get("time_unit_ns", 1.0)
    if not isinstance(unit, (int, float)) or unit <= 0:
        raise SchemaError("time_unit_ns must be a positive number")
    records = {}
    for name, entry in doc["cell_types"].items():
        if name not in LIBRARY:
            raise SchemaError(f"unknown library cell type {name!r}")
        if not isinstance(entry, dict):
            raise SchemaError(f"{name}: record must be an object")
        try:
            kind = FaultKind(entry.get("fault_kind"))
        except ValueError:
            raise SchemaError(f"{name}: fault_kind must be 'SET' or 'SEU'") from None
        if kind is not expected_kind(name):
            raise KindMismatch(f"{name} is {LIBRARY[name].kind.value}; {kind.value} not allowed")
        xs = _table(name, "let_xsect", entry.get("let_xsect"), positive=False)
        widths: tuple = ()
        if kind is FaultKind.SET:
            widths = _table(name, "pulse_width", entry.get("pulse_width"), positive=True)
        elif "pulse_width" in entry:
            raise SchemaError(f"{name}: pulse_width only applies to SET records")
        records[name] = FaultRecord(name, kind, xs, widths)
    return FaultDb(records, float(unit))


def _bracket(table: Sequence[tuple[float, float]], x: float):
    """Return (exact value | None, left point, right point) for ``x`` inside the table range."""
    lets = [p[0] for p in table]
    k = bisect_left(lets, x)
    if k < len(lets) and lets[k] == x:
        return table[k][1], None, None
    return None, table[k - 1], table[k]


def interp_loglinear(table: Sequence[tuple[float, float]], x: float) -> float:
    """Interpolate linearly in (x, log y), clamped to the end values.

    Segments touching a zero value fall back to linear interpolation.
    """
    if x <= table[0][0]:
        return table[0][1]
    if x >= table[-1][0]:
        return table[-1][1]
    exact, left, right = _bracket(table, x)
    if exact is not None:
        return exact
    (x0, y0), (x1, y1) = left, right
    t = (x - x0) / (x1 - x0)
    if y0 <= 0 or y1 <= 0:
        return y0 + t * (y1 - y0)
    return math.exp(math.log(y0) + t * (math.log(y1) - math.log(y0)))


def interp_linear(table: Sequence[tuple[float, float]], x: float) -> float:
    if x <= table[0][0]:
        return table[0][1]
    if x >= table[-1][0]:
        return table[-1][1]
    exact, left, right = _bracket(table, x)
    if exact is not None:
        return exact
    (x0, y0), (x1, y1) = left, right
    return y0 + (x - x0) / (x1 - x0) * (y1 - y0)


def cross_section(db: FaultDb, cell_type: str, fault_kind: FaultKind | str, let: float) -> float:
    """Cross-section in cm^2 of ``cell_type`` at ``let`` (MeV cm^2/mg)."""
    return interp_loglinear(db.record(cell_type, fault_kind).let_xsect, let)


def pulse_width(db: FaultDb, cell_type: str, let: float) -> int:
    """SET pulse width in ticks: linear in LET, rounded half-up, at least one tick."""
    w = interp_linear(db.record(cell_type, FaultKind.SET).pulse_width, let)
    return max(1, math.floor(w + 0.5))


def make_set_event(cell: CellInfo, time: int, let: float, db: FaultDb) -> InjectionEvent:
    if cell.is_sequential:
        raise KindMismatch(f"SET on sequential cell {cell.name} ({cell.cell_type})")
    return InjectionEvent(cell.id, FaultKind.SET, int(time), pulse_width(db, cell.cell_type, let))


def make_seu_event(cell: CellInfo, time: int) -> InjectionEvent:
    if not cell.is_sequential:
        raise KindMismatch(f"SEU on combinational cell {cell.name} ({cell.cell_type})")
    return InjectionEvent(cell.id, FaultKind.SEU, int(time))


def make_event(cell: CellInfo, time: int, let: float, db: FaultDb) -> InjectionEvent:
    """SET or SEU event depending on the cell kind."""
    if cell.is_sequential:
        return make_seu_event(cell, time)
    return make_set_event(cell, time, let, db)
