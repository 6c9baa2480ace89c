import numpy as np
import pytest

from seesim.campaign import CampaignResult, ClusterRow, NodeStat
from seesim.flow import combined_classes, high_sensitivity_proportions, module_of
from seesim.learn.selection import Prediction
from seesim.netlist import load_design

from conftest import data_text


def test_module_of():
    m = {"bus": ["bus"], "alu": ["cpu.alu0"], "cpu": ["cpu"]}
    assert module_of(("bus",), m) == "bus"
    assert module_of(("cpu", "alu0"), m) == "alu"
    assert module_of(("cpu", "rf"), m) == "cpu"
    assert module_of((), m) == "other"


def test_proportions_sum_to_100(two_module):
    classes = {c.id: (1 if c.id % 3 else -1) for c in two_module.cells}
    props = high_sensitivity_proportions(two_module, classes, {"cpu": ["cpu"], "mem": ["mem"]})
    assert set(props) == {"cpu", "mem"}
    assert sum(p["share_percent"] for p in props.values()) == pytest.approx(100.0)
    assert sum(p["nodes"] for p in props.values()) == len(classes)


def test_proportions_other_group(minisoc):
    classes = {c.id: 1 for c in minisoc.cells}
    props = high_sensitivity_proportions(minisoc, classes, {"bus": ["bus"]})
    assert "other" in props
    assert props["bus"]["within_group_percent"] == 100.0
    assert sum(p["share_percent"] for p in props.values()) == pytest.approx(100.0)


def test_no_high_nodes(two_module):
    props = high_sensitivity_proportions(two_module, {0: -1, 5: -1}, {"cpu": ["cpu"], "mem": ["mem"]})
    assert all(p["share_percent"] == 0.0 for p in props.values())


def test_combined_classes_prefers_measurements():
    result = CampaignResult([ClusterRow(0, 4, [0, 1])], {0: NodeStat(4, 3), 1: NodeStat(4, 0)})
    pred = Prediction([1, 2, 3], np.array([1, 1, -1]), np.array([0.5, 0.2, -0.3]), 0.0)
    assert combined_classes(result, 0.5, pred) == {0: 1, 1: -1, 2: 1, 3: -1}
