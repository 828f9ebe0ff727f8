"""Dense two-phase primal simplex with Bland's anti-cycling rule.

The LP is brought to standard form (min c'x, Ax = b, x >= 0, b >= 0) by
shifting bounded variables, splitting free ones, adding slacks/surpluses and
turning finite upper bounds into extra rows. Duals are reported for the
caller's rows as sensitivities d(objective)/d(rhs).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LE, EQ, GE = "<=", "=", ">="


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    senses: list
    b: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    maximize: bool = False
    names: list | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.senses = list(self.senses)
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float)
        self.ub = np.full(n, math.inf) if self.ub is None else np.asarray(self.ub, dtype=float)
        if len(self.senses) != self.A.shape[0] or self.b.size != self.A.shape[0]:
            raise ValueError("row count mismatch between A, senses, b")
        for s in self.senses:
            if s not in (LE, EQ, GE):
                raise ValueError(f"bad sense {s!r}")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b)) and np.all(np.isfinite(self.c))):
            raise ValueError("LP data must be finite")

    @property
    def n(self):
        return self.c.size

    @property
    def m(self):
        return self.A.shape[0]


@dataclass
class LPSolution:
    status: str
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    objective: float = math.nan
    iterations: int = 0
    info: dict = field(default_factory=dict)


class _Tableau:
    def __init__(self, A, b, basis):
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = list(basis)
        self.m, self.n = m, n

    def set_cost(self, c):
        T = self.T
        T[-1, :self.n] = c
        T[-1, self.n] = 0.0
        for i, j in enumerate(self.basis):
            if T[-1, j] != 0.0:
                T[-1, :] -= T[-1, j] * T[i, :]

    def pivot(self, r, j):
        T = self.T
        T[r, :] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        nz = np.nonzero(col)[0]
        if nz.size:
            T[nz, :] -= np.outer(col[nz], T[r, :])
        self.basis[r] = j

    def run(self, allowed, tol, max_iter):
        """Bland's rule iterations. Returns 'optimal' | 'unbounded' | 'limit'."""
        T = self.T
        it = 0
        while it < max_iter:
            rc = T[-1, :self.n]
            enter = -1
            for j in allowed:
                if rc[j] < -tol:
                    enter = j
                    break
            if enter < 0:
                return "optimal", it
            col = T[:self.m, enter]
            rhs = T[:self.m, self.n]
            best, leave = math.inf, -1
            for i in range(self.m):
                if col[i] > tol:
                    ratio = rhs[i] / col[i]
                    if ratio < best - 1e-12 or (abs(ratio - best) <= 1e-12 and self.basis[i] < self.basis[leave]):
                        best, leave = ratio, i
            if leave < 0:
                return "unbounded", it
            self.pivot(leave, enter)
            it += 1
        return "limit", it


def simplex_solve(lp: LinearProgram, tol=1e-9, max_iter=50000) -> LPSolution:
    n0, m0 = lp.n, lp.m
    sign = -1.0 if lp.maximize else 1.0
    c = sign * lp.c

    # column map: original var -> list of (std col, coefficient), plus offset
    cols = []  # per std column: (orig var, coefficient)
    shift = np.zeros(n0)
    ub_rows = []  # (std col, bound)
    for j in range(n0):
        lo, hi = lp.lb[j], lp.ub[j]
        if lo > hi or hi == -math.inf or lo == math.inf:
            return LPSolution("infeasible", info={"reason": f"empty bounds on var {j}"})
        if math.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if math.isfinite(hi):
                ub_rows.append((len(cols) - 1, hi - lo))
        elif math.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ns = len(cols)
    M = np.zeros((m0 + len(ub_rows), ns))
    for k, (j, s) in enumerate(cols):
        M[:m0, k] = s * lp.A[:, j]
    for r, (k, bound) in enumerate(ub_rows):
        M[m0 + r, k] = 1.0
    rhs = np.concatenate([lp.b - lp.A @ shift, [bnd for _, bnd in ub_rows]])
    senses = lp.senses + [LE] * len(ub_rows)
    cs = np.array([s * c[j] for j, s in cols])

    m = M.shape[0]
    flip = np.where(rhs < 0, -1.0, 1.0)
    M = M * flip[:, None]
    rhs = rhs * flip
    senses = [({LE: GE, GE: LE}[s] if f < 0 and s != EQ else s) for s, f in zip(senses, flip)]

    # slacks / surpluses, then artificials
    extra = []
    basis = [-1] * m
    for i, s in enumerate(senses):
        if s == LE:
            extra.append((i, 1.0))
            basis[i] = ns + len(extra) - 1
        elif s == GE:
            extra.append((i, -1.0))
    nslack = len(extra)
    art_rows = [i for i in range(m) if basis[i] < 0]
    ntot = ns + nslack + len(art_rows)
    A = np.zeros((m, ntot))
    A[:, :ns] = M
    for k, (i, v) in enumerate(extra):
        A[i, ns + k] = v
    for k, i in enumerate(art_rows):
        A[i, ns + nslack + k] = 1.0
        basis[i] = ns + nslack + k
    art = set(range(ns + nslack, ntot))

    tab = _Tableau(A, rhs, basis)
    scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
    iters = 0
    if art_rows:
        c1 = np.zeros(ntot)
        c1[list(art)] = 1.0
        tab.set_cost(c1)
        status, it = tab.run(range(ntot), tol, max_iter)
        iters += it
        if status == "limit":
            return LPSolution("iteration_limit", iterations=iters)
        if -tab.T[-1, -1] > tol * scale * 10:
            return LPSolution("infeasible", iterations=iters)
        # drive zero-level artificials out of the basis when possible
        for r in range(m):
            if tab.basis[r] in art:
                row = tab.T[r, :ns + nslack]
                nz = [j for j in range(ns + nslack) if abs(row[j]) > 1e-9]
                if nz:
                    tab.pivot(r, nz[0])
    c2 = np.zeros(ntot)
    c2[:ns] = cs
    tab.set_cost(c2)
    allowed = range(ns + nslack)  # artificials never re-enter
    status, it = tab.run(allowed, tol, max_iter)
    iters += it
    if status == "unbounded":
        return LPSolution("unbounded", iterations=iters)
    if status == "limit":
        return LPSolution("iteration_limit", iterations=iters)

    xs = np.zeros(ntot)
    for i, j in enumerate(tab.basis):
        xs[j] = tab.T[i, -1]
    x = shift.copy()
    for k, (j, s) in enumerate(cols):
        x[j] += s * xs[k]

    # duals from the final basis: B' y = c_B (standard rows), then undo flips
    B = A[:, tab.basis]
    cB = c2[tab.basis]
    try:
        y_std = np.linalg.solve(B.T, cB)
    except np.linalg.LinAlgError:
        y_std = np.linalg.lstsq(B.T, cB, rcond=None)[0]
    y = (y_std * flip)[:m0]
    y = sign * y
    rc = lp.c - lp.A.T @ y
    obj = float(lp.c @ x)
    return LPSolution("optimal", x, y, rc, obj, iters)
