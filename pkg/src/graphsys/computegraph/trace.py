"""Trace document schema, deterministic serialization and attribute-series CSV."""
from __future__ import annotations

import csv
import io
import json

import jsonschema
import numpy as np

from ..errors import BadTrace

TRACE_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["meta", "events"],
    "properties": {
        "meta": {
            "type": "object",
            "required": ["horizon", "status"],
            "properties": {
                "horizon": {"type": ["number", "null"]},
                "status": {"enum": ["running", "stopped", "horizon_reached", "quiescent", "failed"]},
                "seed": {"type": ["integer", "null"]},
                "nodes": {"type": "array", "items": {"type": "string"}},
                "edges": {"type": "array", "items": {"type": "string"}},
                "edge_sources": {"type": "object", "additionalProperties": {"type": "string"}},
            },
        },
        "events": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["t", "seq", "entity", "signal", "before", "after"],
                "properties": {
                    "t": {"type": "number"},
                    "seq": {"type": "integer", "minimum": 0},
                    "entity": {
                        "type": "object",
                        "required": ["kind", "name"],
                        "properties": {"kind": {"enum": ["node", "edge", "graph"]},
                                       "name": {"type": "string"}},
                    },
                    "signal": {"type": "string"},
                    "before": {"type": "string"},
                    "after": {"type": "string"},
                    "attr": {"type": "string"},
                    "note": {"type": "string"},
                },
                "additionalProperties": False,
            },
        },
    },
}


def dumps_trace(doc) -> str:
    """Canonical JSON: sorted keys, one event per line, so equal runs give equal bytes."""
    head = json.dumps(doc["meta"], sort_keys=True)
    lines = [json.dumps(ev, sort_keys=True) for ev in doc["events"]]
    body = ",\n  ".join(lines)
    return '{"meta": ' + head + ',\n "events": [' + ("\n  " + body + "\n " if lines else "") + "]}\n"


def validate_trace(doc):
    try:
        jsonschema.validate(doc, TRACE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise BadTrace(f"trace does not match schema: {exc.message}") from exc
    last = -np.inf
    for ev in doc["events"]:
        if ev["t"] < last:
            raise BadTrace("event times decrease")
        last = ev["t"]
    return doc


def load_trace(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadTrace(f"cannot read trace {path}: {exc}") from exc
    return validate_trace(doc)


def series_csv(series, columns=None) -> str:
    """t,value CSV; vector values expand into one column per component."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    first = series[0][1] if series else 0.0
    width = np.size(first)
    if columns is None:
        columns = ["value"] if np.ndim(first) == 0 else [f"value{i}" for i in range(width)]
    w.writerow(["t"] + list(columns))
    for t, v in series:
        w.writerow([repr(float(t))] + [repr(float(x)) for x in np.ravel(v)])
    return buf.getvalue()
