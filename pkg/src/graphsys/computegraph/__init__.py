from .engine import (ALL_RECEIVED, BACK_TO_IDLE, COMMUNICATE, EDGE_TRANSITIONS, EXECUTE,
                     FINALIZE, NODE_TRANSITIONS, RECEIVED, SENT, SIGNALS, STOP, UPDATED,
                     Attribute, CommEdge, ComputeNode, ComputingGraph, NodeTask, Received,
                     Sent, TaskContext, Updated, edge_transition, legal_triples,
                     node_transition)
from .trace import TRACE_SCHEMA, dumps_trace, load_trace, series_csv, validate_trace
from .workflows import three_node_workflow

__all__ = ["ComputingGraph", "ComputeNode", "CommEdge", "NodeTask", "Attribute", "TaskContext",
           "Received", "Updated", "Sent", "node_transition", "edge_transition", "legal_triples",
           "NODE_TRANSITIONS", "EDGE_TRANSITIONS", "SIGNALS", "EXECUTE", "FINALIZE",
           "BACK_TO_IDLE", "UPDATED", "RECEIVED", "COMMUNICATE", "SENT", "ALL_RECEIVED", "STOP",
           "TRACE_SCHEMA", "dumps_trace", "load_trace", "series_csv", "validate_trace",
           "three_node_workflow"]
