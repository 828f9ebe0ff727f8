"""Synchronous L-shaped Benders with one aggregate cut per master round.

The master is a LinearProgram over first-stage columns that contains a
column theta (the recourse estimate) and whose objective is theta only. Each
cut reads  theta >= sum_xi [Q_xi + lam_xi' (w - w_hat)], where lam_xi are the
sensitivities of the scenario LP value to the rows whose rhs is w_j.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import MaxIterations, SubproblemInfeasible
from ..solvers.simplex import GE, LinearProgram, simplex_solve


@dataclass
class Cut:
    intercept: float  # sum Q - lam' w_hat
    coefs: np.ndarray  # over w

    def value(self, w):
        return float(self.intercept + self.coefs @ w)


@dataclass
class BendersState:
    cuts: list = field(default_factory=list)
    solutions: list = field(default_factory=list)  # S: per-scenario (value, lam) of the current round
    lower: float = -np.inf
    upper: float = np.inf
    iteration: int = 0
    log: list = field(default_factory=list)  # (iter, lower, upper, gap, wall_ms)
    best_w: np.ndarray | None = None

    @property
    def gap(self):
        return self.upper - self.lower

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "lower", "upper", "gap", "wall_ms"])
        for row in self.log:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()


class BendersMaster:
    """Base master LP plus a growing list of aggregate cuts."""

    def __init__(self, lp: LinearProgram, w_index, theta_index):
        self.lp = lp
        self.w_index = np.asarray(w_index, dtype=int)
        self.theta_index = int(theta_index)
        self.cuts: list[Cut] = []

    def add_cut(self, values, lams, w_hat, weights=None):
        """Aggregate per-scenario (Q, lam) pairs into one cut; scenario order is fixed by the caller."""
        weights = np.ones(len(values)) if weights is None else np.asarray(weights, dtype=float)
        Q = 0.0
        g = np.zeros(self.w_index.size)
        for p, v, lam in zip(weights, values, lams):
            Q += p * v
            g += p * np.asarray(lam, dtype=float)
        cut = Cut(Q - float(g @ w_hat), g)
        self.cuts.append(cut)
        return cut

    def build(self) -> LinearProgram:
        lp = self.lp
        rows = [lp.A]
        senses = list(lp.senses)
        rhs = [lp.b]
        for cut in self.cuts:  # theta - g'w >= intercept
            r = np.zeros(lp.n)
            r[self.theta_index] = 1.0
            r[self.w_index] -= cut.coefs
            rows.append(r[None, :])
            senses.append(GE)
            rhs.append([cut.intercept])
        return LinearProgram(lp.c, np.vstack(rows), senses, np.concatenate([np.atleast_1d(b) for b in rhs]),
                             lp.lb, lp.ub, lp.maximize, lp.names)

    def solve(self):
        sol = simplex_solve(self.build())
        if sol.status != "optimal":
            raise SubproblemInfeasible(f"master problem status {sol.status}")
        return sol

    def w_of(self, x):
        return np.asarray(x)[self.w_index]


def solve_scenario(subproblem, w_hat, xi):
    """Returns (value, lam over w) for one scenario; raises SubproblemInfeasible."""
    lp, rows = subproblem(w_hat, xi)
    sol = simplex_solve(lp)
    if sol.status != "optimal":
        raise SubproblemInfeasible(f"scenario {xi!r} at w={np.round(w_hat, 6).tolist()}: {sol.status}")
    return sol.objective, sol.duals[np.asarray(rows, dtype=int)]


def benders_solve(master: BendersMaster, subproblem, scenarios, probabilities=None,
                  tol=1e-8, max_iter=50):
    """Run synchronous Benders to a gap of at most tol.

    ``subproblem(w_hat, xi)`` returns (LinearProgram, rows) where ``rows`` lists
    the LP rows whose rhs equals w_hat_j, in w order.
    Returns (first-stage master x, BendersState).
    """
    state = BendersState()
    weights = None if probabilities is None else np.asarray(probabilities, dtype=float)
    best_x = None
    for it in range(1, max_iter + 1):
        t0 = time.perf_counter()
        msol = master.solve()
        state.lower = max(state.lower, msol.objective)
        w_hat = master.w_of(msol.x)
        vals, lams = [], []
        for xi in scenarios:
            v, lam = solve_scenario(subproblem, w_hat, xi)
            vals.append(v)
            lams.append(lam)
        state.solutions = list(zip(vals, lams))
        ub = float(np.dot(weights, vals)) if weights is not None else float(np.sum(vals))
        if ub < state.upper:
            state.upper = ub
            best_x = msol.x.copy()
            state.best_w = w_hat.copy()
        state.iteration = it
        done = state.upper - state.lower <= tol
        if not done:
            state.cuts.append(master.add_cut(vals, lams, w_hat, weights))
        state.log.append((it, state.lower, state.upper, state.upper - state.lower,
                          1000.0 * (time.perf_counter() - t0)))
        if done:
            return best_x, state
    raise MaxIterations(f"benders_solve: gap {state.gap:.3e} after {max_iter} iterations",
                        best=best_x, state=state)
