"""Dual decomposition over the link constraints of a model graph."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ..errors import MaxIterations
from ..modelgraph.graph import Connectivity, FlattenedProblem, NodeBlock
from ..solvers.kkt import newton_kkt


@dataclass
class LagrangianState:
    lam: np.ndarray
    alpha: float
    history: list = field(default_factory=list)  # (dual value, ||Pi x - rhs||_inf)
    norms2: list = field(default_factory=list)  # ||Pi x - rhs||_2 per iteration
    iterations: int = 0

    @property
    def residuals(self):
        return [r for _, r in self.history]


@dataclass
class LagrangianSolution:
    x: np.ndarray
    by_node: dict
    lam: np.ndarray
    objective: float


def _node_problems(flat: FlattenedProblem):
    """One single-block problem per node; kept across iterations so QP caches stay warm."""
    out = []
    for b in flat.blocks:
        con = Connectivity(sparse.csr_matrix((0, b.size)), np.zeros(0), [], {b.node: (0, b.size)})
        out.append((b, FlattenedProblem([NodeBlock(b.node, 0, b.model)], b.size, con)))
    return out


def default_step(flat: FlattenedProblem):
    fro2 = float(flat.Pi.multiply(flat.Pi).sum())
    return 0.5 / fro2 if fro2 > 0 else 1.0


def lagrangian_solve(graph, alpha=None, max_iter=500, tol=1e-6, lam0=None, newton_tol=1e-10):
    """Solve every node with objective f_n + lam' Pi_n x_n, then lam += alpha (Pi x - rhs).

    Stops when ||Pi x - rhs||_inf <= tol. Raises MaxIterations carrying the
    best iterate (smallest residual) and the state otherwise.
    """
    flat = graph.aggregate() if not isinstance(graph, FlattenedProblem) else graph
    alpha = default_step(flat) if alpha is None else float(alpha)
    lam = np.zeros(flat.n_links) if lam0 is None else np.asarray(lam0, dtype=float).copy()
    state = LagrangianState(lam, alpha)
    subs = _node_problems(flat)
    PiT = flat.Pi.T.tocsr()
    x = flat.x0.copy()
    best = None
    for it in range(1, max_iter + 1):
        lin = PiT @ lam
        dual = -float(lam @ flat.link_rhs)
        for b, sub in subs:
            sol = newton_kkt(sub, tol=newton_tol, x0=x[b.slice], linear_term=lin[b.slice])
            x[b.slice] = sol.x
            dual += sol.objective
        r = flat.link_residual(x)
        res = float(np.abs(r).max(initial=0.0))
        state.history.append((dual, res))
        state.norms2.append(float(np.linalg.norm(r)))
        state.iterations = it
        if best is None or res < best[1]:
            best = (x.copy(), res)
        if res <= tol:
            return LagrangianSolution(x.copy(), flat.by_node(x), lam.copy(), flat.objective(x)), state
        lam = lam + alpha * r
        state.lam = lam
    bx = best[0]
    raise MaxIterations(f"lagrangian_solve: residual {best[1]:.3e} after {max_iter} iterations",
                        best=LagrangianSolution(bx, flat.by_node(bx), lam.copy(), flat.objective(bx)),
                        state=state)
