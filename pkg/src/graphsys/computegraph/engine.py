"""Discrete-event execution of computing graphs.

Signals live in one queue ordered by (time, seq); seq is a global insertion
counter, so simultaneous signals run FIFO. Tasks see a snapshot of their
node's attributes and stage writes, which become visible at finalize time.
"""
from __future__ import annotations

import copy
import heapq
import math
import time as _time
from dataclasses import dataclass, field

from ..errors import CallbackFailure, DuplicateAttribute, UnknownAttribute

# signal kinds
EXECUTE = "execute_task"
FINALIZE = "finalize_task"
BACK_TO_IDLE = "back_to_idle"
UPDATED = "attribute_updated"
RECEIVED = "attribute_received"
COMMUNICATE = "communicate"
SENT = "attribute_sent"
ALL_RECEIVED = "all_received"
STOP = "stop"
SIGNALS = (EXECUTE, FINALIZE, BACK_TO_IDLE, UPDATED, RECEIVED, COMMUNICATE, SENT, ALL_RECEIVED, STOP)

IDLE, EXECUTING, FINALIZED = "idle", "executing_task", "finalized_task"
COMMUNICATING, ALL_RECV = "communicating", "all_received"
NODE_STATES = (IDLE, EXECUTING, FINALIZED)
EDGE_STATES = (IDLE, COMMUNICATING, ALL_RECV)

# primary transition mappings
NODE_TRANSITIONS = {
    (IDLE, EXECUTE): EXECUTING,
    (EXECUTING, FINALIZE): FINALIZED,
    (FINALIZED, BACK_TO_IDLE): IDLE,
}
EDGE_TRANSITIONS = {
    (IDLE, COMMUNICATE): COMMUNICATING,
    (COMMUNICATING, ALL_RECEIVED): ALL_RECV,
    (ALL_RECV, BACK_TO_IDLE): IDLE,
    (ALL_RECV, COMMUNICATE): COMMUNICATING,  # a new send while the last batch is closing
}
# documented self-loops: trigger evaluation and busy handling never move the state
NODE_SELF_LOOPS = {(s, UPDATED) for s in NODE_STATES} | {(s, RECEIVED) for s in NODE_STATES} \
    | {(EXECUTING, EXECUTE), (FINALIZED, EXECUTE)}
EDGE_SELF_LOOPS = {(s, UPDATED) for s in EDGE_STATES} | {
    (COMMUNICATING, COMMUNICATE), (COMMUNICATING, SENT), (COMMUNICATING, RECEIVED)}


def node_transition(state, signal):
    """(next state, legal). Illegal pairs leave the state unchanged."""
    if (state, signal) in NODE_TRANSITIONS:
        return NODE_TRANSITIONS[(state, signal)], True
    return state, (state, signal) in NODE_SELF_LOOPS


def edge_transition(state, signal):
    if (state, signal) in EDGE_TRANSITIONS:
        return EDGE_TRANSITIONS[(state, signal)], True
    return state, (state, signal) in EDGE_SELF_LOOPS


def legal_triples():
    """Every (before, signal, after) an execution may record, per entity kind."""
    node = {(b, s, a) for (b, s), a in NODE_TRANSITIONS.items()} | {(b, s, b) for b, s in NODE_SELF_LOOPS}
    edge = {(b, s, a) for (b, s), a in EDGE_TRANSITIONS.items()} | {(b, s, b) for b, s in EDGE_SELF_LOOPS}
    return {"node": node, "edge": edge}


class Received:
    def __init__(self, *names):
        self.names = tuple(names)


class Updated:
    def __init__(self, *names):
        self.names = tuple(names)


class Sent:
    def __init__(self, *names):
        self.names = tuple(names)


@dataclass
class Attribute:
    name: str
    value: object
    last_updated: float = 0.0
    last_received: float = 0.0
    history: list = field(default_factory=list)


@dataclass
class NodeTask:
    name: str
    callback: object
    triggers: list
    compute_time: object = "walltime"  # "walltime" | "callback" | number
    busy_policy: str = "queue_task"
    capacity: int = 1

    def received_by(self, attr):
        return any(isinstance(t, Received) and attr in t.names for t in self.triggers)

    def updated_by(self, attr):
        return any(isinstance(t, Updated) and attr in t.names for t in self.triggers)


class ComputeNode:
    def __init__(self, graph, nid, name):
        self.graph = graph
        self.id = nid
        self.name = name
        self.attributes: dict[str, Attribute] = {}
        self.tasks: dict[str, NodeTask] = {}
        self.state = IDLE
        self.clock = 0.0
        self.pending: list = []  # (task, cause)
        self.current = None
        self.staged: dict = {}
        self.out_edges: list = []

    def add_attribute(self, name, start=0.0):
        if name in self.attributes:
            raise DuplicateAttribute(f"{self.name} already has attribute {name!r}")
        v = copy.deepcopy(start)
        self.attributes[name] = Attribute(name, v, history=[(0.0, copy.deepcopy(v))])
        return self.attributes[name]

    def add_attributes(self, *names, start=0.0):
        for n in names:
            self.add_attribute(n, start)

    def __getitem__(self, name):
        if name not in self.attributes:
            raise UnknownAttribute(f"{self.name} has no attribute {name!r}")
        return (self, name)

    def value(self, name):
        return self.attributes[name].value

    def __repr__(self):
        return f"ComputeNode({self.name!r})"


class CommEdge:
    def __init__(self, eid, name, source, dests, delay, send_on, send_wait, start):
        self.id = eid
        self.name = name
        self.source = source  # (node, attr)
        self.dests = dests
        self.delay = float(delay)
        self.send_on = send_on  # "updated" | "sent"
        self.send_wait = send_wait
        self.start = start
        self.state = IDLE
        self.in_flight = 0
        self.clock = 0.0


class TaskContext:
    """Handle passed to task callbacks: reads see the pre-execution snapshot."""

    def __init__(self, graph, node, task, cause):
        self.graph = graph
        self.node = node
        self.task = task
        self.cause = cause  # attribute whose receipt/update triggered the task, if any
        self.compute_time = None

    @property
    def now(self):
        return self.graph.clock

    def next_signal_time(self):
        return self.graph.next_signal_time()

    def get(self, name):
        if name not in self.node.attributes:
            raise UnknownAttribute(f"{self.node.name} has no attribute {name!r}")
        return copy.deepcopy(self.node.attributes[name].value)

    def attr(self, name) -> Attribute:
        return self.node.attributes[name]

    def set(self, name, value):
        if name not in self.node.attributes:
            raise UnknownAttribute(f"{self.node.name} has no attribute {name!r}")
        self.node.staged.pop(name, None)
        self.node.staged[name] = copy.deepcopy(value)

    def stop(self):
        self.graph._stop_requested = True


@dataclass(order=True)
class Signal:
    time: float
    seq: int
    kind: str = field(compare=False)
    target: tuple = field(compare=False)  # ("node", id) | ("edge", id) | ("graph", None)
    payload: dict = field(compare=False, default_factory=dict)


class ComputingGraph:
    def __init__(self):
        self.nodes: list[ComputeNode] = []
        self.edges: list[CommEdge] = []
        self.queue: list[Signal] = []
        self.clock = 0.0
        self.trace: list[dict] = []
        self.status = "running"
        self.horizon = None
        self._seq = 0
        self._stop_requested = False
        self._started = False

    # -- construction ------------------------------------------------------
    def add_node(self, name=None) -> ComputeNode:
        n = ComputeNode(self, len(self.nodes), name or f"n{len(self.nodes)}")
        self.nodes.append(n)
        return n

    add_compute_node = add_node

    def add_node_task(self, node, name, callback, triggers=(), compute_time="walltime",
                      busy_policy="queue_task", capacity=1) -> NodeTask:
        triggers = list(triggers) if isinstance(triggers, (list, tuple)) else [triggers]
        for t in triggers:
            for a in t.names:
                if a not in node.attributes:
                    raise UnknownAttribute(f"trigger attribute {a!r} not on {node.name}")
        if busy_policy not in ("queue_task", "drop"):
            raise ValueError(f"unknown busy policy {busy_policy!r}")
        if not (compute_time in ("walltime", "callback") or
                (isinstance(compute_time, (int, float)) and compute_time >= 0)):
            raise ValueError(f"bad compute_time {compute_time!r}")
        task = NodeTask(name, callback, triggers, compute_time, busy_policy, capacity)
        node.tasks[name] = task
        return task

    def connect(self, source, dests, delay=0.0, send_on="updated", send_wait=None, start=None,
                name=None) -> CommEdge:
        if isinstance(dests, tuple):
            dests = [dests]
        for nd, a in [source] + list(dests):
            if a not in nd.attributes:
                raise UnknownAttribute(f"{nd.name} has no attribute {a!r}")
        if isinstance(send_on, (Updated, Sent)):
            send_on = "updated" if isinstance(send_on, Updated) else "sent"
        if send_on not in ("updated", "sent"):
            raise ValueError(f"bad send_on {send_on!r}")
        if send_wait is not None and send_on != "sent":
            raise ValueError("send_wait requires send_on='sent'")
        if delay < 0:
            raise ValueError("delay must be nonnegative")
        e = CommEdge(len(self.edges), name or f"e{len(self.edges)}", source, list(dests),
                     delay, send_on, send_wait, start)
        self.edges.append(e)
        source[0].out_edges.append(e)
        if send_on == "sent":
            self._push(0.0 if start is None else float(start), COMMUNICATE, ("edge", e.id))
        return e

    def schedule_trigger(self, node, task, time=0.0):
        if time < 0:
            raise ValueError("trigger time must be nonnegative")
        name = task.name if isinstance(task, NodeTask) else task
        self._push(float(time), EXECUTE, ("node", node.id), {"task": name})

    def inject(self, kind, target, time=None, **payload):
        """Enqueue an arbitrary signal (used for fault injection and fuzzing)."""
        if kind not in SIGNALS:
            raise ValueError(f"unknown signal {kind!r}")
        t = self.clock if time is None else max(float(time), self.clock)
        if isinstance(target, ComputeNode):
            target = ("node", target.id)
        elif isinstance(target, CommEdge):
            target = ("edge", target.id)
        self._push(t, kind, target, dict(payload))

    # -- queue -------------------------------------------------------------
    def _push(self, t, kind, target, payload=None):
        self._seq += 1
        heapq.heappush(self.queue, Signal(t, self._seq, kind, target, payload or {}))

    def next_signal_time(self):
        t = self.queue[0].time if self.queue else math.inf
        h = self.horizon if self.horizon is not None else math.inf
        return min(t, h)

    def _record(self, kind, name, signal, before, after, attr=None, note=None):
        ev = {"t": self.clock, "seq": len(self.trace), "entity": {"kind": kind, "name": name},
              "signal": signal, "before": before, "after": after}
        if attr is not None:
            ev["attr"] = attr
        if note is not None:
            ev["note"] = note
        self.trace.append(ev)

    # -- execution ---------------------------------------------------------
    def execute(self, horizon=None):
        self.horizon = None if horizon is None else float(horizon)
        self.status = "running"
        while True:
            if not self.queue:
                self.status = "quiescent"
                break
            if self.horizon is not None and self.queue[0].time > self.horizon:
                self.status = "horizon_reached"
                break
            sig = heapq.heappop(self.queue)
            self.clock = sig.time
            kind, ident = sig.target
            if kind == "node":
                self._dispatch_node(self.nodes[ident], sig)
            elif kind == "edge":
                self._dispatch_edge(self.edges[ident], sig)
            else:
                self._record("graph", "graph", sig.kind, "running", "running", note="ignored")
                if sig.kind == STOP:
                    self._stop_requested = True
            if self._stop_requested:
                self._stop_requested = False
                self._record("graph", "graph", STOP, "running", "stopped")
                self.status = "stopped"
                break
        return self.status

    def _node_event(self, node, signal, attr=None, note=None):
        before = node.state
        after, legal = node_transition(before, signal)
        if not legal:
            self._record("node", node.name, signal, before, before, attr,
                         "ignored" if note is None else f"ignored: {note}")
            return False
        node.state = after
        self._record("node", node.name, signal, before, after, attr, note)
        return True

    def _dispatch_node(self, node, sig):
        node.clock = self.clock
        k, p = sig.kind, sig.payload
        if k == EXECUTE:
            task = node.tasks.get(p.get("task"))
            if task is None:
                self._record("node", node.name, k, node.state, node.state,
                             note=f"ignored: no task {p.get('task')!r}")
                return
            if node.state != IDLE:
                if task.busy_policy == "drop":
                    self._node_event(node, k, note=f"dropped {task.name}")
                elif sum(1 for t, _ in node.pending if t == task.name) >= task.capacity:
                    self._node_event(node, k, note=f"coalesced {task.name}")
                else:
                    node.pending.append((task.name, p.get("cause")))
                    self._node_event(node, k, note=f"queued {task.name}")
                return
            self._node_event(node, k, note=task.name)
            self._run_task(node, task, p.get("cause"))
        elif k == FINALIZE:
            if not self._node_event(node, k, note=p.get("task")):
                return
            for name, value in node.staged.items():
                a = node.attributes[name]
                a.value = value
                a.last_updated = self.clock
                a.history.append((self.clock, copy.deepcopy(value)))
            staged, node.staged = node.staged, {}
            node.current = None
            for name in staged:
                self._push(self.clock, UPDATED, ("node", node.id), {"attr": name})
                for e in node.out_edges:
                    if e.send_on == "updated" and e.source[1] == name:
                        self._push(self.clock, UPDATED, ("edge", e.id), {"attr": name})
            self._push(self.clock, BACK_TO_IDLE, ("node", node.id))
        elif k == BACK_TO_IDLE:
            if self._node_event(node, k) and node.pending:
                name, cause = node.pending.pop(0)
                self._push(self.clock, EXECUTE, ("node", node.id), {"task": name, "cause": cause})
        elif k == UPDATED:
            attr = p.get("attr")
            self._node_event(node, k, attr)
            for t in node.tasks.values():
                if attr is not None and t.updated_by(attr):
                    self._push(self.clock, EXECUTE, ("node", node.id), {"task": t.name, "cause": attr})
        elif k == RECEIVED:
            attr = p.get("attr")
            edge = p.get("edge")
            self._node_event(node, k, attr, None if edge is None else f"from {self.edges[edge].name}")
            if attr in node.attributes and "value" in p:
                a = node.attributes[attr]
                a.value = copy.deepcopy(p["value"])
                a.last_received = self.clock
                a.history.append((self.clock, copy.deepcopy(p["value"])))
                for t in node.tasks.values():
                    if t.received_by(attr):
                        self._push(self.clock, EXECUTE, ("node", node.id), {"task": t.name, "cause": attr})
            if edge is not None:
                self._push(self.clock, RECEIVED, ("edge", edge), {"attr": attr})
        else:
            self._node_event(node, k, p.get("attr"))

    def _run_task(self, node, task, cause):
        node.current = task.name
        node.staged = {}
        ctx = TaskContext(self, node, task.name, cause)
        t0 = _time.perf_counter()
        try:
            ret = task.callback(ctx)
        except Exception as exc:  # noqa: BLE001 - user code
            self._record("node", node.name, "callback_failure", node.state, node.state,
                         note=f"{task.name}: {type(exc).__name__}: {exc}")
            self.status = "failed"
            raise CallbackFailure(f"task {task.name!r} on {node.name} failed: {exc}") from exc
        wall = _time.perf_counter() - t0
        if task.compute_time == "walltime":
            dt = wall
        elif task.compute_time == "callback":
            dt = ctx.compute_time if ctx.compute_time is not None else ret
            if dt is None or not (float(dt) >= 0.0):
                self.status = "failed"
                raise CallbackFailure(f"task {task.name!r} must provide a nonnegative compute time")
            dt = float(dt)
        else:
            dt = float(task.compute_time)
        if self._stop_requested:
            return
        self._push(self.clock + dt, FINALIZE, ("node", node.id), {"task": task.name})

    def _edge_event(self, e, signal, attr=None, note=None):
        before = e.state
        after, legal = edge_transition(before, signal)
        if not legal:
            self._record("edge", e.name, signal, before, before, attr,
                         "ignored" if note is None else f"ignored: {note}")
            return False
        e.state = after
        self._record("edge", e.name, signal, before, after, attr, note)
        return True

    def _dispatch_edge(self, e, sig):
        e.clock = self.clock
        k, p = sig.kind, sig.payload
        src_node, src_attr = e.source
        if k == UPDATED:
            self._edge_event(e, k, p.get("attr", src_attr))
            if e.send_on == "updated":
                self._push(self.clock, COMMUNICATE, ("edge", e.id),
                           {"value": copy.deepcopy(src_node.attributes[src_attr].value)})
        elif k == COMMUNICATE:
            if not self._edge_event(e, k, src_attr):
                return
            value = p["value"] if "value" in p else copy.deepcopy(src_node.attributes[src_attr].value)
            self._push(self.clock, SENT, ("edge", e.id), {"attr": src_attr})
            for dn, da in e.dests:
                self._push(self.clock + e.delay, RECEIVED, ("node", dn.id),
                           {"attr": da, "value": copy.deepcopy(value), "edge": e.id})
            e.in_flight += len(e.dests)
            if e.send_wait is not None and not p.get("oneshot"):
                self._push(self.clock + float(e.send_wait), COMMUNICATE, ("edge", e.id))
        elif k == RECEIVED:
            if not self._edge_event(e, k, p.get("attr")):
                return
            if e.in_flight > 0:
                e.in_flight -= 1
                if e.in_flight == 0:
                    self._push(self.clock, ALL_RECEIVED, ("edge", e.id))
        elif k == ALL_RECEIVED:
            if e.in_flight == 0 and self._edge_event(e, k):
                self._push(self.clock, BACK_TO_IDLE, ("edge", e.id))
            elif e.in_flight:
                self._record("edge", e.name, k, e.state, e.state, note="ignored: deliveries in flight")
        else:
            self._edge_event(e, k, p.get("attr"))

    # -- outputs -----------------------------------------------------------
    def node(self, name) -> ComputeNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def state_series(self, node, attr):
        node = self.node(node) if isinstance(node, str) else node
        return list(node.attributes[attr].history)

    def export_trace(self, seed=None) -> dict:
        meta = {"horizon": self.horizon, "status": self.status,
                "nodes": [n.name for n in self.nodes], "edges": [e.name for e in self.edges],
                "edge_sources": {e.name: e.source[0].name for e in self.edges}}
        if seed is not None:
            meta["seed"] = seed
        return {"meta": meta, "events": list(self.trace)}
