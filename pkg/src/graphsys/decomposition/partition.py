"""Restructure a flat model graph into one child subgraph per partition part."""
from __future__ import annotations

from ..errors import InvalidPartition
from ..hypergraph import Partition
from ..modelgraph.graph import ModelGraph


def apply_partition(graph: ModelGraph, part: Partition) -> ModelGraph:
    nodes = sorted(graph.nodes)
    if sorted(part.assignment) != nodes:
        raise InvalidPartition("partition does not assign every graph node exactly once")
    if any(not (0 <= p < part.k) for p in part.assignment.values()):
        raise InvalidPartition("part index out of range")
    sizes = [0] * part.k
    for p in part.assignment.values():
        sizes[p] += 1
    if min(sizes, default=0) == 0:
        raise InvalidPartition("empty part")

    out = ModelGraph()
    for n in nodes:
        if out.add_node(graph.model(n)) != n:
            raise InvalidPartition("node ids must be dense to restructure")
    children = [out.add_subgraph() for _ in range(part.k)]
    for n in nodes:
        children[part.assignment[n]].assign_node(n)
    for _, link in graph.all_links():
        owners = {part.assignment[n] for n in link.nodes}
        target = children[owners.pop()] if len(owners) == 1 else out
        target.add_link_constraint(link.terms, link.rhs)
    return out
