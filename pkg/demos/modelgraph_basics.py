"""Build a small linked model graph, solve it three ways, and restructure it.

Run: python3 demos/modelgraph_basics.py
"""
import numpy as np

from graphsys.decomposition import apply_partition, lagrangian_solve
from graphsys.hypergraph import partition
from graphsys.modelgraph import ComponentModel, ModelGraph
from graphsys.solvers import newton_kkt

g = ModelGraph()
targets = [1.0, 4.0, -2.0, 0.5, 3.0, -1.0]
for k, a in enumerate(targets):
    m = ComponentModel(f"n{k}")
    x = m.add_variable("x")
    m.set_objective((x - a) * (x - a))
    g.add_node(m)
# neighbours must agree, so the optimum is the mean target
for k in range(len(targets) - 1):
    g.add_link_constraint([(k, "x", 1.0), (k + 1, "x", -1.0)], 0.0)

flat = g.aggregate()
print("connectivity matrix:")
print(g.connectivity_matrix().toarray())

for method in ("schur", "direct"):
    sol = newton_kkt(flat, method=method)
    print(f"{method:6s} x = {np.round(sol.x, 6)}  iterations {sol.iterations}")

sol, state = lagrangian_solve(g, alpha=0.4, tol=1e-9, max_iter=2000)
xs = [sol.by_node[n]["x"] for n in g.nodes]
print(f"dual decomposition x = {np.round(xs, 6)} after {state.iterations} iterations")

part = partition(g.hg, 2)
h = apply_partition(g, part)
print(f"two parts {part.parts()}, {len(h.links)} link(s) left on the top level")
print(f"restructured objective {newton_kkt(h.aggregate()).objective:.6f}")
