import hashlib
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphsys.computegraph import (ComputingGraph, Received, Sent, Updated, dumps_trace,
                                   edge_transition, legal_triples, node_transition,
                                   series_csv, three_node_workflow, validate_trace)
from graphsys.computegraph.engine import EDGE_STATES, NODE_STATES, SIGNALS
from graphsys.errors import BadTrace, CallbackFailure, DuplicateAttribute, UnknownAttribute

from _gen import fuzz_run

# frozen from the first verified run (prefix checked by hand in test_workflow_prefix)
GOLDEN_WORKFLOW_SHA256 = "0cce0496df2dd155eeb7a2d2dcf56e6512c714d183e0c0fd6c5acfcd612295bf"


def rows(g, **match):
    out = []
    for ev in g.export_trace()["events"]:
        if all((ev["entity"]["name"] if k == "name" else ev.get(k)) == v for k, v in match.items()):
            out.append(ev)
    return out


def one_task_graph(compute_time=2.0, **kw):
    g = ComputingGraph()
    n = g.add_node("n")
    n.add_attribute("x", 0)
    g.add_node_task(n, "t", lambda ctx: ctx.set("x", ctx.get("x") + 1), compute_time=compute_time, **kw)
    return g, n


# -- transition mappings -------------------------------------------------------

def test_primary_transitions():
    assert node_transition("idle", "execute_task") == ("executing_task", True)
    assert node_transition("executing_task", "finalize_task") == ("finalized_task", True)
    assert node_transition("finalized_task", "back_to_idle") == ("idle", True)
    assert edge_transition("idle", "communicate") == ("communicating", True)
    assert edge_transition("communicating", "all_received") == ("all_received", True)
    assert edge_transition("all_received", "back_to_idle") == ("idle", True)


def test_undefined_pairs_keep_state_and_are_flagged():
    assert node_transition("idle", "finalize_task") == ("idle", False)
    assert edge_transition("idle", "all_received") == ("idle", False)
    for s, sig in itertools.product(NODE_STATES, SIGNALS):
        after, legal = node_transition(s, sig)
        assert after in NODE_STATES and (legal or after == s)
    for s, sig in itertools.product(EDGE_STATES, SIGNALS):
        after, legal = edge_transition(s, sig)
        assert after in EDGE_STATES and (legal or after == s)


def assert_legal(g):
    legal = legal_triples()
    for ev in g.export_trace()["events"]:
        kind = ev["entity"]["kind"]
        if kind == "graph":
            continue
        triple = (ev["before"], ev["signal"], ev["after"])
        if triple not in legal[kind]:
            assert ev["before"] == ev["after"] and ev.get("note", "").startswith("ignored"), ev


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fuzzed_signals_only_make_legal_transitions(seed):
    g = fuzz_run(np.random.default_rng(seed))
    assert_legal(g)
    validate_trace(g.export_trace())


# -- construction errors -------------------------------------------------------

def test_attribute_errors():
    g = ComputingGraph()
    n = g.add_node("n")
    n.add_attribute("x", np.array([1.0, 2.0]))
    with pytest.raises(DuplicateAttribute):
        n.add_attribute("x")
    with pytest.raises(UnknownAttribute):
        g.add_node_task(n, "t", lambda ctx: None, Received("nope"))
    with pytest.raises(UnknownAttribute):
        n["nope"]
    m = g.add_node("m")
    m.add_attribute("y")
    with pytest.raises(UnknownAttribute):
        g.connect(n["x"], [(m, "z")])
    with pytest.raises(ValueError):
        g.connect(n["x"], [m["y"]], send_on=Updated("x"), send_wait=3)


def test_start_value_is_stored_by_copy():
    v = np.array([1.0, 2.0])
    g = ComputingGraph()
    n = g.add_node()
    n.add_attribute("x", v)
    v[0] = 99.0
    assert n.value("x").tolist() == [1.0, 2.0]
    assert g.state_series(n, "x")[0][0] == 0.0


# -- timing semantics ------------------------------------------------------------

def test_fixed_time_task_gives_three_events():
    g, n = one_task_graph(2.0)
    g.schedule_trigger(n, "t", 0.0)
    assert g.execute() == "quiescent"
    evs = [(e["t"], e["signal"]) for e in g.export_trace()["events"] if e["signal"] != "attribute_updated"]
    assert evs == [(0.0, "execute_task"), (2.0, "finalize_task"), (2.0, "back_to_idle")]
    assert g.state_series(n, "x") == [(0.0, 0), (2.0, 1)]


def test_late_trigger_idles_until_its_time():
    g, n = one_task_graph(1.0)
    g.schedule_trigger(n, "t", 10.0)
    g.execute()
    assert rows(g, signal="execute_task")[0]["t"] == 10.0


def test_duplicate_trigger_is_queued_then_run():
    g, n = one_task_graph(2.0)
    g.schedule_trigger(n, "t", 0.0)
    g.schedule_trigger(n, "t", 0.0)
    g.execute()
    ex = rows(g, signal="execute_task")
    assert [e["t"] for e in ex] == [0.0, 0.0, 2.0]
    assert ex[1]["note"] == "queued t"
    assert n.value("x") == 2


def test_drop_policy_and_capacity():
    g, n = one_task_graph(2.0, busy_policy="drop")
    for _ in range(3):
        g.schedule_trigger(n, "t", 0.0)
    g.execute()
    assert n.value("x") == 1
    g, n = one_task_graph(2.0)
    for _ in range(4):
        g.schedule_trigger(n, "t", 1.0)
    g.execute()
    notes = [e.get("note") for e in rows(g, signal="execute_task")]
    assert notes == ["t", "queued t", "coalesced t", "coalesced t", "t"]
    assert n.value("x") == 2


def test_staged_writes_are_invisible_until_finalize():
    g = ComputingGraph()
    n = g.add_node()
    n.add_attribute("x", 0)
    seen = []
    g.add_node_task(n, "w", lambda ctx: ctx.set("x", 5), compute_time=3.0)
    g.add_node_task(n, "r",
                    lambda ctx: seen.append((ctx.now, ctx.get("x"))), compute_time=0.0)
    g.schedule_trigger(n, "w", 0.0)
    g.schedule_trigger(n, "r", 0.0)  # queued behind w, so it runs after the commit
    g.execute()
    assert seen == [(3.0, 5)]


def test_send_wait_periodic_sends():
    g = ComputingGraph()
    a, b = g.add_node("a"), g.add_node("b")
    a.add_attribute("y", 1.0)
    b.add_attribute("y", 0.0)
    g.connect(a["y"], [b["y"]], delay=0.0, send_on=Sent("y"), send_wait=60, start=5, name="s")
    g.execute(horizon=130)
    assert [e["t"] for e in rows(g, name="s", signal="communicate")] == [5.0, 65.0, 125.0]
    assert g.status == "horizon_reached"


def test_delays_and_zero_delay_ordering():
    g = ComputingGraph()
    a, b, c = g.add_node("a"), g.add_node("b"), g.add_node("c")
    for n in (a, b, c):
        n.add_attribute("x", 0)
    g.add_node_task(a, "t", lambda ctx: ctx.set("x", 7), compute_time=1.0)
    g.connect(a["x"], [b["x"]], delay=2.0, name="slow")
    g.connect(a["x"], [c["x"]], delay=0.0, name="fast")
    g.schedule_trigger(a, "t", 0.0)
    g.execute()
    (slow,) = rows(g, name="b", signal="attribute_received")
    (fast,) = rows(g, name="c", signal="attribute_received")
    (comm,) = rows(g, name="fast", signal="communicate")
    assert slow["t"] == 3.0 and fast["t"] == 1.0
    assert fast["seq"] > comm["seq"]
    assert b.value("x") == c.value("x") == 7


def test_values_are_sent_by_copy():
    g = ComputingGraph()
    a, b = g.add_node("a"), g.add_node("b")
    a.add_attribute("v", [0])
    b.add_attribute("v", [0])
    g.add_node_task(a, "t", lambda ctx: ctx.set("v", [1]), compute_time=1.0)
    g.connect(a["v"], [b["v"]], delay=1.0)
    g.schedule_trigger(a, "t")
    g.execute()
    b.value("v").append(2)
    assert a.value("v") == [1]


def test_stop_inside_callback_halts():
    g = ComputingGraph()
    n = g.add_node()
    n.add_attribute("x", 0)
    g.add_node_task(n, "t", lambda ctx: ctx.stop(), compute_time=1.0)
    g.schedule_trigger(n, "t", 0.0)
    g.schedule_trigger(n, "t", 5.0)
    assert g.execute() == "stopped"
    evs = g.export_trace()["events"]
    assert evs[-1]["signal"] == "stop" and all(e["t"] == 0.0 for e in evs)


def test_callback_failure_keeps_trace():
    g = ComputingGraph()
    n = g.add_node("bad")
    n.add_attribute("x")
    g.add_node_task(n, "t", lambda ctx: 1 / 0, compute_time=1.0)
    g.schedule_trigger(n, "t")
    with pytest.raises(CallbackFailure):
        g.execute()
    doc = g.export_trace()
    assert doc["meta"]["status"] == "failed"
    assert doc["events"][-1]["signal"] == "callback_failure"
    validate_trace(doc)


def test_callback_compute_time_and_walltime():
    g, n = one_task_graph("callback")
    n.tasks["t"].callback = lambda ctx: 0.75
    g.schedule_trigger(n, "t")
    g.execute()
    assert rows(g, signal="finalize_task")[0]["t"] == 0.75
    g, n = one_task_graph("walltime")
    g.schedule_trigger(n, "t")
    g.execute()
    assert rows(g, signal="finalize_task")[0]["t"] > 0.0


# -- three-node workflow -------------------------------------------------------

def test_workflow_prefix_matches_hand_schedule():
    # by hand: n1, n2 finish at 1 and n3 at 2; e2 (delay 1) lands at 2, which reruns n1;
    # e1 (delay 2) and e3 (delay 1, sent at 2) both land at 3
    g = three_node_workflow()
    g.execute(20)
    assert [(e["t"], e["signal"]) for e in rows(g, name="n1")
            if e["signal"] in ("execute_task", "finalize_task")][:4] == \
        [(0.0, "execute_task"), (1.0, "finalize_task"), (2.0, "execute_task"), (3.0, "finalize_task")]
    first = {e: rows(g, name=e, signal="communicate")[0]["t"] for e in ("e1", "e2", "e3")}
    assert first == {"e1": 1.0, "e2": 1.0, "e3": 2.0}
    recv = [(e["t"], e["note"]) for e in rows(g, signal="attribute_received") if "note" in e]
    assert recv[:2] == [(2.0, "from e2"), (2.0, "from e2")]
    assert sorted(recv[2:6]) == [(3.0, "from e1")] * 2 + [(3.0, "from e3")] * 2
    # n3 retriggers itself every 2 time units
    assert g.state_series("n3", "z") == [(2.0 * k, k + 1) for k in range(11)]


def test_workflow_is_byte_deterministic():
    blobs = []
    for _ in range(3):
        g = three_node_workflow()
        g.execute(20)
        blobs.append(dumps_trace(g.export_trace()).encode())
    assert blobs[0] == blobs[1] == blobs[2]
    assert hashlib.sha256(blobs[0]).hexdigest() == GOLDEN_WORKFLOW_SHA256


def test_trace_properties_on_workflow():
    g = three_node_workflow()
    g.execute(20)
    doc = g.export_trace()
    evs = doc["events"]
    assert all(a["t"] <= b["t"] and a["seq"] < b["seq"] for a, b in zip(evs, evs[1:]))
    assert_legal(g)
    delay = {e.name: e.delay for e in g.edges}
    fanout = {e.name: len(e.dests) for e in g.edges}
    sends = {}
    for e in evs:
        if e["entity"]["kind"] == "edge" and e["signal"] == "communicate" and "note" not in e:
            sends.setdefault(e["entity"]["name"], []).append(e["t"])
    got = {}
    for e in evs:
        if e["signal"] == "attribute_received" and e["entity"]["kind"] == "node":
            name = e["note"].split()[-1]
            # causality: a send on the same edge exactly one delay earlier
            assert e["t"] - delay[name] in sends[name]
            got[name] = got.get(name, 0) + 1
    for name, ts in sends.items():  # conservation for deliveries inside the horizon
        assert got.get(name, 0) == fanout[name] * sum(t + delay[name] <= 20 for t in ts)


def test_received_trigger_never_fires_spontaneously():
    g = ComputingGraph()
    n = g.add_node()
    n.add_attributes("x", "z")
    g.add_node_task(n, "t", lambda ctx: None, Received("x", "z"), compute_time=1.0)
    assert g.execute(100) == "quiescent"
    assert g.export_trace()["events"] == []


# -- trace document ------------------------------------------------------------

def test_empty_run_trace_is_valid():
    g = ComputingGraph()
    g.execute()
    doc = g.export_trace(seed=3)
    validate_trace(doc)
    assert doc["events"] == [] and doc["meta"]["status"] == "quiescent"


def test_bad_trace_rejected():
    with pytest.raises(BadTrace):
        validate_trace({"meta": {"horizon": None, "status": "weird"}, "events": []})
    ev = {"t": 1.0, "seq": 0, "entity": {"kind": "node", "name": "n"}, "signal": "x",
          "before": "idle", "after": "idle"}
    with pytest.raises(BadTrace):
        validate_trace({"meta": {"horizon": 2, "status": "quiescent"},
                        "events": [ev, dict(ev, t=0.5, seq=1)]})


def test_series_csv():
    text = series_csv([(0.0, 1.0), (2.0, 3.5)])
    assert text == "t,value\n0.0,1.0\n2.0,3.5\n"
    assert series_csv([(0.0, np.array([1.0, 2.0]))]).splitlines()[0] == "t,value0,value1"
