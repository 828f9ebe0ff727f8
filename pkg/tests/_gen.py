"""Random instance generators shared by unit and acceptance tests."""
from __future__ import annotations

import itertools

import numpy as np

from graphsys.hypergraph import Hypergraph
from graphsys.modelgraph import ComponentModel, ModelGraph, quicksum
from graphsys.modelgraph import expr as ex


# -- hypergraphs -------------------------------------------------------------

def random_hypergraph(rng, max_nodes=12, max_edges=20, hyper=True):
    """Mixed graph: standard undirected, standard directed and (optionally) hyperedges.

    Returns (graph, edge list as (support, directed)) so tests can rebuild
    incidence facts independently of the container.
    """
    g = Hypergraph()
    n = int(rng.integers(2, max_nodes + 1))
    for _ in range(n):
        g.add_node()
    edges = []
    for _ in range(int(rng.integers(0, max_edges + 1))):
        kind = rng.integers(3 if hyper else 2)
        if kind == 2 and n >= 3:
            k = int(rng.integers(3, min(n, 5) + 1))
            support = tuple(int(v) for v in rng.choice(n, k, replace=False))
            directed = False
        else:
            support = tuple(int(v) for v in rng.choice(n, 2, replace=False))
            directed = bool(kind == 1)
        g.add_edge(support, directed=directed)
        edges.append((support, directed))
    return g, edges


# -- expressions ---------------------------------------------------------------

def random_expression(rng, nvars=4, size=12):
    """Expression DAG over x[0..nvars) whose values stay moderate on [-2, 2]^n.

    Unbounded operations are only applied to arguments that keep them tame
    (log of 1 + e^2, division by 1 + e^2, exp of a value in [-1/2, 1/2]).
    Earlier nodes are reused, so the result is a DAG rather than a tree.
    """
    pool = [ex.Var(i) for i in range(nvars)] + [ex.Const(float(rng.uniform(-2, 2)))]
    for _ in range(size):
        a = pool[int(rng.integers(len(pool)))]
        b = pool[int(rng.integers(len(pool)))]
        op = int(rng.integers(10))
        if op == 0:
            e = a + b
        elif op == 1:
            e = a - b
        elif op == 2:
            e = a * b
        elif op == 3:
            e = a / (1 + b * b)
        elif op == 4:
            e = ex.exp(a / (1 + a * a))
        elif op == 5:
            e = ex.log(1 + a * a)
        elif op == 6:
            e = ex.sabs(a, float(rng.choice([1e-3, 1e-2, 0.1])))
        elif op == 7:
            e = -a
        elif op == 8:
            e = (1 + a * a) ** float(rng.choice([0.5, 1.5, 2.0, -1.0]))
        else:
            e = a ** 2 + float(rng.uniform(-1, 1)) * b
        pool.append(e)
    return pool[-1]


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        step = h * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2 * step)
    return g


# -- model graphs ----------------------------------------------------------------

def random_qp_graph(rng, n_nodes=None, links=None, max_vars=5):
    """Convex equality-constrained QP model graph with random two-node links.

    Node n: min 1/2 x'(M'M + I)x + q'x  s.t.  Jx = r. Draws repeat until the
    stacked node and link rows have full row rank, so the KKT matrix is
    nonsingular (random links can pile onto one variable pair otherwise).
    Returns the graph and the list of node ids.
    """
    while True:
        g, nodes = _draw_qp_graph(rng, n_nodes, links, max_vars)
        flat = g.aggregate()
        rows = np.vstack([flat.eq_jacobian(flat.x0).toarray(), flat.Pi.toarray()])
        if rows.shape[0] == 0 or np.linalg.matrix_rank(rows) == rows.shape[0]:
            return g, nodes


def _draw_qp_graph(rng, n_nodes, links, max_vars):
    n_nodes = int(rng.integers(2, 7)) if n_nodes is None else n_nodes
    g = ModelGraph()
    nodes, sizes = [], []
    for k in range(n_nodes):
        nv = int(rng.integers(2, max_vars + 1))
        m = ComponentModel(f"qp{k}")
        x = m.add_variables("x", nv, start=0.0)
        for i, v in enumerate(x):
            m.start[i] = float(rng.normal())
        M = rng.normal(size=(nv, nv))
        H = M.T @ M + np.eye(nv)
        q = rng.normal(size=nv)
        quad = [0.5 * H[i, i] * x[i] * x[i] for i in range(nv)]
        quad += [H[i, j] * x[i] * x[j] for i in range(nv) for j in range(i + 1, nv)]
        m.set_objective(quicksum(quad) + quicksum(x, list(q)))
        for _ in range(int(rng.integers(0, nv - 1))):
            m.add_equality(quicksum(x, list(rng.normal(size=nv))), float(rng.normal()))
        nodes.append(g.add_node(m))
        sizes.append(nv)
    n_links = int(rng.integers(1, n_nodes + 2)) if links is None else links
    for _ in range(n_links):
        a, b = rng.choice(n_nodes, 2, replace=False)
        ia, ib = int(rng.integers(sizes[a])), int(rng.integers(sizes[b]))
        g.add_link_constraint([(nodes[a], f"x[{ia}]", float(rng.uniform(0.5, 2))),
                               (nodes[b], f"x[{ib}]", -float(rng.uniform(0.5, 2)))],
                              float(rng.normal()))
    return g, nodes


def fig2_graph():
    """Three scalar nodes joined by x1 + x2 + x3 = 0 (min sum (x_n - a_n)^2)."""
    g = ModelGraph()
    nodes = []
    for a in (1.0, 2.0, 3.0):
        m = ComponentModel()
        x = m.add_variable("x")
        m.set_objective((x - a) * (x - a))
        nodes.append(g.add_node(m))
    g.add_link_constraint([(n, "x", 1.0) for n in nodes], 0.0)
    return g, nodes


def two_node_qp(a=(0.0, 2.0)):
    """min sum (x_n - a_n)^2 with x_1 - x_2 = 0."""
    g = ModelGraph()
    nodes = []
    for an in a:
        m = ComponentModel()
        x = m.add_variable("x")
        m.set_objective((x - an) * (x - an))
        nodes.append(g.add_node(m))
    g.add_link_constraint([(nodes[0], "x", 1.0), (nodes[1], "x", -1.0)])
    return g, nodes


# -- LP oracle -------------------------------------------------------------------

def vertex_enumeration(c, A_le, b_le, tol=1e-9):
    """min c'x s.t. A_le x <= b_le, x >= 0 by enumerating basic solutions.

    Returns the optimal value, or None if no vertex is feasible. Only valid for
    bounded problems, which the callers guarantee.
    """
    m, n = A_le.shape
    G = np.vstack([A_le, -np.eye(n)])
    h = np.concatenate([b_le, np.zeros(n)])
    best = None
    for rows in itertools.combinations(range(G.shape[0]), n):
        Gs = G[list(rows)]
        if abs(np.linalg.det(Gs)) < 1e-12:
            continue
        x = np.linalg.solve(Gs, h[list(rows)])
        if np.all(G @ x <= h + tol):
            v = float(c @ x)
            best = v if best is None else min(best, v)
    return best


def fuzz_graph():
    """Two nodes and two edges with trivial tasks, the target of the legality fuzz."""
    from graphsys.computegraph import ComputingGraph, Received

    g = ComputingGraph()
    a, b = g.add_node("a"), g.add_node("b")
    a.add_attributes("u", "v")
    b.add_attributes("u", "v")
    g.add_node_task(a, "ta", lambda ctx: ctx.set("u", ctx.get("v") + 1), Received("v"),
                    compute_time=0.5)
    g.add_node_task(b, "tb", lambda ctx: ctx.set("u", ctx.get("v") - 1), Received("v"),
                    compute_time=1.0, busy_policy="drop")
    g.connect(a["u"], [b["v"]], delay=0.25, name="ab")
    g.connect(b["u"], [a["v"], b["v"]], delay=1.0, name="ba")
    return g


def fuzz_run(rng, n_signals=20):
    """Inject ``n_signals`` random signals at random times and run to quiescence."""
    from graphsys.computegraph import SIGNALS

    g = fuzz_graph()
    targets = list(g.nodes) + list(g.edges) + [("graph", None)]
    for _ in range(n_signals):
        kind = SIGNALS[rng.integers(len(SIGNALS))]
        target = targets[rng.integers(len(targets))]
        payload = {}
        r = rng.random()
        if r < 0.3:
            payload["task"] = ["ta", "tb", "nope"][rng.integers(3)]
        elif r < 0.6:
            payload["attr"] = ["u", "v"][rng.integers(2)]
        if kind == "stop" and rng.random() < 0.8:
            kind = "execute_task"  # keep most runs going past the first stop
        g.inject(kind, target, float(rng.integers(0, 8)) / 2, **payload)
    g.execute(horizon=50)
    return g
