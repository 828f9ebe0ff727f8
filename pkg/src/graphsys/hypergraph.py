"""Graph containers: standard graphs, hypergraphs and directed multigraphs.

Graphs are append-only. Node and edge ids are dense integers handed out by
the root graph, so a node keeps the same id inside every subgraph it belongs
to. Edges belong to exactly one level of the hierarchy.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import sparse

from .errors import BadK, DegenerateSupport, NodeAlreadyAssigned, UnknownNode


@dataclass
class Edge:
    id: int
    support: tuple
    directed: bool = False

    @property
    def src(self):
        return self.support[0] if self.directed else None

    @property
    def dst(self):
        return self.support[1:] if self.directed else None


class Hypergraph:
    def __init__(self, parent: "Hypergraph | None" = None):
        self.parent = parent
        self.nodes: list[int] = []
        self._node_set: set[int] = set()
        self.edges: dict[int, Edge] = {}  # edges owned by this level only
        self.subgraphs: list[Hypergraph] = []
        if parent is None:
            self._next_node = 0
            self._next_edge = 0

    # -- ids -------------------------------------------------------------
    @property
    def root(self) -> "Hypergraph":
        g = self
        while g.parent is not None:
            g = g.parent
        return g

    def __contains__(self, n):
        return n in self._node_set

    def num_nodes(self):
        return len(self.nodes)

    def _check(self, n):
        if n not in self._node_set:
            raise UnknownNode(f"node {n} not in graph")

    # -- construction ----------------------------------------------------
    def add_node(self) -> int:
        """Create a node. Inside a subgraph the node is also added to every ancestor."""
        root = self.root
        n = root._next_node
        root._next_node += 1
        chain = []
        g = self
        while g is not None:
            chain.append(g)
            g = g.parent
        for g in chain:
            g.nodes.append(n)
            g._node_set.add(n)
        return n

    def add_edge(self, support: Iterable[int], directed: bool = False) -> int:
        """Add an edge. For directed edges ``support[0]`` is the source."""
        support = tuple(int(n) for n in support)
        for n in support:
            self._check(n)
        if directed:
            if len(support) < 2 or support[0] in support[1:] or len(set(support[1:])) != len(support) - 1:
                raise DegenerateSupport("directed edge needs one source and distinct destinations")
        elif len(set(support)) < 2 or len(set(support)) != len(support):
            raise DegenerateSupport(f"undirected support {support} needs >= 2 distinct nodes")
        root = self.root
        eid = root._next_edge
        root._next_edge += 1
        self.edges[eid] = Edge(eid, support, directed)
        return eid

    def add_subgraph(self) -> "Hypergraph":
        sub = Hypergraph(parent=self)
        self.subgraphs.append(sub)
        return sub

    def assign_node(self, n: int):
        """Place an existing node of the parent graph into this subgraph."""
        if self.parent is None:
            raise UnknownNode("assign_node is only meaningful on a subgraph")
        self.parent._check(n)
        for sib in self.parent.subgraphs:
            if n in sib:
                raise NodeAlreadyAssigned(f"node {n} already belongs to a subgraph")
        self.nodes.append(n)
        self._node_set.add(n)

    # -- queries ---------------------------------------------------------
    def all_edges(self) -> list[Edge]:
        """Own edges followed by descendants' edges (parent first, breadth first)."""
        out = []
        for g in self.levels():
            out.extend(g.edges.values())
        return out

    def levels(self) -> list["Hypergraph"]:
        order, queue = [], [self]
        while queue:
            g = queue.pop(0)
            order.append(g)
            queue.extend(g.subgraphs)
        return order

    def edge(self, eid) -> Edge:
        for g in self.levels():
            if eid in g.edges:
                return g.edges[eid]
        raise KeyError(eid)

    def incident_edges(self, n) -> list[int]:
        self._check(n)
        return [e.id for e in self.all_edges() if n in e.support]

    def degree(self, n) -> int:
        return len(self.incident_edges(n))

    def neighbors(self, n) -> list[int]:
        out = set()
        for e in self.all_edges():
            if n in e.support:
                out.update(e.support)
        out.discard(n)
        return sorted(out)

    def incidence_matrix(self, own_only=False) -> sparse.coo_matrix:
        """Node-by-edge incidence in coordinate form (rows follow ``self.nodes``)."""
        edges = list(self.edges.values()) if own_only else self.all_edges()
        row_of = {n: i for i, n in enumerate(self.nodes)}
        rows, cols, vals = [], [], []
        for j, e in enumerate(edges):
            for k, n in enumerate(e.support):
                rows.append(row_of[n])
                cols.append(j)
                vals.append(-1.0 if (e.directed and k == 0) else 1.0)
        return sparse.coo_matrix((vals, (rows, cols)), shape=(len(self.nodes), len(edges)))

    def dense_incidence(self, own_only=False) -> np.ndarray:
        return self.incidence_matrix(own_only).toarray()

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        edges = []
        for e in self.edges.values():
            d = {"id": e.id, "support": list(e.support), "directed": e.directed}
            if e.directed:
                d["src"] = e.src
                d["dst"] = list(e.dst)
            edges.append(d)
        return {"nodes": list(self.nodes), "edges": edges,
                "subgraphs": [s.to_dict() for s in self.subgraphs]}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "Hypergraph":
        g = cls()
        nodes = list(d["nodes"])
        if nodes != list(range(len(nodes))):
            raise ValueError("root node ids must be 0..n-1")
        for _ in nodes:
            g.add_node()
        _load_level(g, d)
        return g


def _load_level(g: Hypergraph, d: dict):
    for e in d.get("edges", []):
        eid = int(e["id"])
        g.edges[eid] = Edge(eid, tuple(e["support"]), bool(e.get("directed", False)))
        root = g.root
        root._next_edge = max(root._next_edge, eid + 1)
    for sd in d.get("subgraphs", []):
        sub = g.add_subgraph()
        for n in sd["nodes"]:
            sub.assign_node(n)
        _load_level(sub, sd)


def loads(text: str) -> Hypergraph:
    return Hypergraph.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# partitioning

@dataclass
class Partition:
    k: int
    assignment: dict
    cut_edges: list = field(default_factory=list)

    def parts(self) -> list[list[int]]:
        out = [[] for _ in range(self.k)]
        for n, p in sorted(self.assignment.items()):
            out[p].append(n)
        return out

    def sizes(self):
        return [len(p) for p in self.parts()]


def cut_edges_of(edges, assignment) -> list[int]:
    return [e.id for e in edges if len({assignment[n] for n in e.support}) > 1]


def _cut_count(supports, side):
    return sum(1 for s in supports if len({side[n] for n in s}) > 1)


def _bfs_order(start, adj, allowed):
    seen, order, queue = {start}, [start], [start]
    while queue:
        v = queue.pop(0)
        for w in adj[v]:
            if w in allowed and w not in seen:
                seen.add(w)
                order.append(w)
                queue.append(w)
    return order


def _bisect(nodes, supports, size_a, kl_passes=8):
    """Split ``nodes`` into (A, B) with |A| = size_a, KL-refined on hyperedge cut."""
    allowed = set(nodes)
    adj = {n: set() for n in nodes}
    for s in supports:
        for a in s:
            adj[a].update(x for x in s if x != a)
    adj = {n: sorted(v) for n, v in adj.items()}

    # pseudo-peripheral seed: farthest node (by BFS order) from the lowest id
    far = _bfs_order(min(nodes), adj, allowed)[-1]
    region = []
    remaining = sorted(nodes)
    seed = far
    while len(region) < size_a:
        for v in _bfs_order(seed, adj, allowed - set(region)):
            if len(region) == size_a:
                break
            region.append(v)
        remaining = [v for v in sorted(nodes) if v not in set(region)]
        if remaining:
            seed = remaining[0]
    side = {n: 1 for n in nodes}
    for v in region:
        side[v] = 0

    incident = {n: [] for n in nodes}
    for s in supports:
        for a in s:
            incident[a].append(s)

    def local_cut(vs):
        seen, c = set(), 0
        for v in vs:
            for s in incident[v]:
                if id(s) in seen:
                    continue
                seen.add(id(s))
                if len({side[x] for x in s}) > 1:
                    c += 1
        return c

    for _ in range(kl_passes):
        locked = set()
        history = []
        total = 0
        A = sorted(n for n in nodes if side[n] == 0)
        B = sorted(n for n in nodes if side[n] == 1)
        for _ in range(min(len(A), len(B))):
            best = None
            for a in A:
                if a in locked:
                    continue
                for b in B:
                    if b in locked:
                        continue
                    before = local_cut((a, b))
                    side[a], side[b] = 1, 0
                    after = local_cut((a, b))
                    side[a], side[b] = 0, 1
                    gain = before - after
                    if best is None or gain > best[0]:
                        best = (gain, a, b)
            if best is None:
                break
            gain, a, b = best
            side[a], side[b] = 1, 0
            A[A.index(a)] = b
            B[B.index(b)] = a
            locked.update((a, b))
            total += gain
            history.append((total, a, b))
        if not history:
            break
        best_total = max(h[0] for h in history)
        keep = next(i for i, h in enumerate(history) if h[0] == best_total)
        if best_total <= 0:
            keep = -1
        # undo swaps past the best prefix
        for _, a, b in reversed(history[keep + 1:]):
            side[a], side[b] = 0, 1
        if best_total <= 0:
            break
    A = sorted(n for n in nodes if side[n] == 0)
    B = sorted(n for n in nodes if side[n] == 1)
    return A, B


def partition(g: Hypergraph, k: int) -> Partition:
    """k-way partition by recursive bisection with Kernighan-Lin refinement.

    Part sizes are balanced exactly: part i gets n//k + (i < n % k) nodes.
    The objective is the number of cut hyperedges. Deterministic.
    """
    n = g.num_nodes()
    if not isinstance(k, (int, np.integer)) or k < 1 or k > n:
        raise BadK(f"k={k} must satisfy 1 <= k <= {n}")
    edges = g.all_edges()
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    assignment = {}

    def rec(nodes, part_ids):
        if len(part_ids) == 1:
            for v in nodes:
                assignment[v] = part_ids[0]
            return
        half = len(part_ids) // 2
        left, right = part_ids[:half], part_ids[half:]
        size_a = sum(sizes[p] for p in left)
        nodeset = set(nodes)
        supports = []
        for e in edges:
            s = tuple(v for v in e.support if v in nodeset)
            if len(s) >= 2:
                supports.append(s)
        A, B = _bisect(sorted(nodes), supports, size_a)
        rec(A, left)
        rec(B, right)

    rec(list(g.nodes), list(range(k)))
    return Partition(k, assignment, cut_edges_of(edges, assignment))
