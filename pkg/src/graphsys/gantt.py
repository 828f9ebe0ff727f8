"""Hand-written SVG Gantt charts of computing-graph traces."""
from __future__ import annotations

from xml.sax.saxutils import escape

from .computegraph.engine import EXECUTE, FINALIZE, RECEIVED, SENT
from .errors import BadTrace

AXIS_PX = 1000
LEFT = 120
LANE_H = 28
TOP = 20


def _f(v):
    return f"{v:.3f}"


def task_intervals(doc):
    """Per node: list of (start, end, task) from execute/finalize pairs."""
    nodes = list(doc["meta"].get("nodes") or [])
    open_, bars = {}, {}
    for ev in doc["events"]:
        ent = ev["entity"]
        if ent["kind"] != "node":
            continue
        name = ent["name"]
        if name not in nodes:
            nodes.append(name)
        if ev["signal"] == EXECUTE and ev["before"] != ev["after"]:
            open_[name] = (ev["t"], ev.get("note", ""))
        elif ev["signal"] == FINALIZE and ev["before"] != ev["after"] and name in open_:
            t0, task = open_.pop(name)
            bars.setdefault(name, []).append((t0, ev["t"], task))
    end = max((ev["t"] for ev in doc["events"]), default=0.0)
    for name, (t0, task) in open_.items():  # still running when the trace ends
        bars.setdefault(name, []).append((t0, end, task))
    return nodes, bars


def render_gantt(doc) -> str:
    """One lane per node in creation order; bars for tasks, ticks for sends/receipts."""
    if "events" not in doc or "meta" not in doc:
        raise BadTrace("not a trace document")
    nodes, bars = task_intervals(doc)
    horizon = doc["meta"].get("horizon")
    tmax = max([ev["t"] for ev in doc["events"]] + ([horizon] if horizon else []) + [0.0])
    scale = AXIS_PX / tmax if tmax > 0 else 1.0
    lane = {n: i for i, n in enumerate(nodes)}
    edge_src = {}
    height = TOP + LANE_H * len(nodes) + 40
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{LEFT + AXIS_PX + 20}" '
           f'height="{height}" font-family="monospace" font-size="11">']
    for n, i in lane.items():
        y = TOP + i * LANE_H
        out.append(f'<text x="4" y="{y + 17}">{escape(n)}</text>')
        out.append(f'<line x1="{LEFT}" y1="{y + LANE_H}" x2="{LEFT + AXIS_PX}" '
                   f'y2="{y + LANE_H}" stroke="#ddd"/>')
        for t0, t1, task in bars.get(n, []):
            x = LEFT + t0 * scale
            w = max((t1 - t0) * scale, 0.5)
            out.append(f'<rect x="{_f(x)}" y="{y + 6}" width="{_f(w)}" height="{LANE_H - 12}" '
                       f'fill="#4a7bd0"><title>{escape(task)} {_f(t0)}-{_f(t1)}</title></rect>')
    for ev in doc["events"]:
        ent = ev["entity"]
        if ev["signal"] == RECEIVED and ent["kind"] == "node" and ent["name"] in lane:
            y = TOP + lane[ent["name"]] * LANE_H
            x = LEFT + ev["t"] * scale
            out.append(f'<line x1="{_f(x)}" y1="{y + 2}" x2="{_f(x)}" y2="{y + 8}" '
                       f'stroke="#2a2"/>')
        elif ev["signal"] == SENT and ent["kind"] == "edge":
            src = edge_src.get(ent["name"])
            if src is None:
                src = _edge_source(doc, ent["name"], ev)
                edge_src[ent["name"]] = src
            if src in lane:
                y = TOP + lane[src] * LANE_H
                x = LEFT + ev["t"] * scale
                out.append(f'<line x1="{_f(x)}" y1="{y + LANE_H - 8}" x2="{_f(x)}" '
                           f'y2="{y + LANE_H - 2}" stroke="#c22"/>')
    ya = TOP + LANE_H * len(nodes) + 4
    out.append(f'<line x1="{LEFT}" y1="{ya}" x2="{LEFT + AXIS_PX}" y2="{ya}" stroke="#000"/>')
    for k in range(11):
        t = tmax * k / 10
        x = LEFT + AXIS_PX * k / 10
        out.append(f'<line x1="{_f(x)}" y1="{ya}" x2="{_f(x)}" y2="{ya + 5}" stroke="#000"/>')
        out.append(f'<text x="{_f(x)}" y="{ya + 18}" text-anchor="middle">{t:.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _edge_source(doc, edge, sent_ev):
    return doc["meta"].get("edge_sources", {}).get(edge)
