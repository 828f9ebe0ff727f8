import re

import pytest

from graphsys.computegraph import ComputingGraph, three_node_workflow
from graphsys.errors import BadTrace
from graphsys.gantt import AXIS_PX, render_gantt, task_intervals


def fixed_two_doc():
    g = ComputingGraph()
    n = g.add_node("solo")
    n.add_attribute("x", 0)
    g.add_node_task(n, "t", lambda ctx: ctx.set("x", 1), compute_time=2.0)
    g.schedule_trigger(n, "t")
    g.execute(horizon=4)
    return g.export_trace()


def test_single_fixed_task_is_one_bar():
    doc = fixed_two_doc()
    nodes, bars = task_intervals(doc)
    assert nodes == ["solo"] and bars == {"solo": [(0.0, 2.0, "t")]}
    svg = render_gantt(doc)
    (w,) = re.findall(r'<rect [^>]*width="([0-9.]+)"', svg)
    # the axis spans the horizon, so 2 of 4 time units is half the axis
    assert float(w) == pytest.approx(2.0 * AXIS_PX / 4.0)


def workflow_doc():
    g = three_node_workflow()
    g.execute(20)
    return g.export_trace()


def test_workflow_lanes_and_determinism():
    a, b = render_gantt(workflow_doc()), render_gantt(workflow_doc())
    assert a == b
    _, bars = task_intervals(workflow_doc())
    assert a.count("<rect") == sum(len(v) for v in bars.values())
    assert all(f">{n}</text>" in a for n in ("n1", "n2", "n3"))


def test_not_a_trace():
    with pytest.raises(BadTrace):
        render_gantt({"events": []})
