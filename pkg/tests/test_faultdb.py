import json
import math

import pytest
from hypothesis import given, strategies as st

from seesim.faultdb import (FaultKind, InjectionEvent, KindMismatch, NonMonotoneLET, SchemaError,
                            UnknownCellType, cross_section, load_fault_db, make_event, make_set_event,
                            make_seu_event, pulse_width)
from seesim.netlist import CellInfo, CellKind

from conftest import data_text


def db_of(cell_types):
    return load_fault_db(json.dumps({"time_unit_ns": 1.0, "cell_types": cell_types}))


DFF_DB = db_of({"DFF": {"fault_kind": "SEU", "let_xsect": [[1.0, 1e-9], [37.0, 5e-9], [100.0, 8e-9]]}})
NAND_DB = db_of({"NAND2": {"fault_kind": "SET", "let_xsect": [[1.0, 1e-9], [100.0, 2e-9]],
                           "pulse_width": [[1.0, 1], [100.0, 3]]}})
nand = CellInfo(0, (), "g", "NAND2", CellKind.COMBINATIONAL, 0, (1, 2))
dff = CellInfo(1, (), "r", "DFF", CellKind.SEQUENTIAL, 3, (4, 5))


def test_accepts_three_point_table():
    assert DFF_DB.record("DFF", FaultKind.SEU).let_xsect[1] == (37.0, 5e-9)


def test_empty_db():
    assert db_of({}).records == {}


def test_kind_mismatch_on_load():
    with pytest.raises(KindMismatch):
        db_of({"NAND2": {"fault_kind": "SEU", "let_xsect": [[1.0, 1e-9]]}})


def test_non_monotone_let():
    with pytest.raises(NonMonotoneLET):
        db_of({"DFF": {"fault_kind": "SEU", "let_xsect": [[37.0, 1e-9], [1.0, 2e-9]]}})


def test_schema_errors():
    with pytest.raises(SchemaError):
        load_fault_db("{}")
    with pytest.raises(SchemaError):
        db_of({"DFF": {"fault_kind": "SEU", "let_xsect": [[1.0, -1e-9]]}})
    with pytest.raises(SchemaError):
        db_of({"NOT": {"fault_kind": "SET", "let_xsect": [[1.0, 1e-9]], "pulse_width": [[1.0, 0]]}})


def test_cross_section_examples():
    assert cross_section(DFF_DB, "DFF", "SEU", 37.0) == 5e-9
    assert cross_section(DFF_DB, "DFF", "SEU", 0.5) == 1e-9
    assert cross_section(DFF_DB, "DFF", "SEU", 500.0) == 8e-9
    expect = math.exp(math.log(1e-9) + (19 - 1) / (37 - 1) * (math.log(5e-9) - math.log(1e-9)))
    assert cross_section(DFF_DB, "DFF", "SEU", 19.0) == pytest.approx(expect, rel=1e-12)
    assert cross_section(DFF_DB, "DFF", "SEU", 19.0) == pytest.approx(2.236e-9, rel=1e-3)


def test_zero_cross_section_segment():
    db = db_of({"DFF": {"fault_kind": "SEU", "let_xsect": [[1.0, 0.0], [3.0, 2e-9]]}})
    assert cross_section(db, "DFF", "SEU", 2.0) == pytest.approx(1e-9)


def test_unknown_cell_type():
    with pytest.raises(UnknownCellType):
        cross_section(DFF_DB, "NOR2", "SET", 1.0)


def test_set_widths():
    assert pulse_width(NAND_DB, "NAND2", 1.0) == 1
    assert pulse_width(NAND_DB, "NAND2", 50.5) == 2
    assert pulse_width(NAND_DB, "NAND2", 100.0) == 3
    assert pulse_width(NAND_DB, "NAND2", 1000.0) == 3
    ev = make_set_event(nand, 12, 50.5, NAND_DB)
    assert ev == InjectionEvent(0, FaultKind.SET, 12, 2)


def test_seu_on_combinational():
    with pytest.raises(KindMismatch):
        make_seu_event(nand, 3)
    with pytest.raises(KindMismatch):
        make_set_event(dff, 3, 1.0, NAND_DB)


def test_make_event_dispatch():
    assert make_event(dff, 4, 37.0, DFF_DB).fault_kind is FaultKind.SEU
    assert make_event(nand, 4, 37.0, NAND_DB).fault_kind is FaultKind.SET


def test_event_json_round_trip():
    for ev in (InjectionEvent(3, FaultKind.SET, 10, 2), InjectionEvent(5, FaultKind.SEU, 7)):
        assert InjectionEvent.from_json(ev.to_json()) == ev


def test_db_json_round_trip():
    db = load_fault_db(data_text("faultdb.json"))
    assert load_fault_db(db.to_json()).records == db.records


@given(st.floats(0.1, 200.0), st.floats(0.1, 200.0))
def test_monotone_in_let(a, b):
    lo, hi = sorted((a, b))
    assert cross_section(DFF_DB, "DFF", "SEU", lo) <= cross_section(DFF_DB, "DFF", "SEU", hi) * (1 + 1e-12)


def test_tabulated_points_exact():
    db = load_fault_db(data_text("faultdb.json"))
    for rec in db.records.values():
        for let, xs in rec.let_xsect:
            assert cross_section(db, rec.cell_type, rec.fault_kind, let) == xs
