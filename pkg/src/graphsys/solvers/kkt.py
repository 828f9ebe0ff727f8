"""Block-bordered KKT systems over flattened model graphs.

Lagrangian convention: L = sum_n [f_n + lam_n' c_n] + lam_MG' (Pi x - rhs).
For every node the block is K_n = [[W_n, J_n'], [J_n, 0]] and the border is
B_n = [Pi_n, 0]. Right-hand sides are minus the KKT residuals, so a full
Newton step is (w, lam) += solve(K, rhs).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from ..errors import HasInequalities, MaxIterations, Singular, SingularBlock, SingularSchur
from .linalg import lu_apply, lu_factor


@dataclass
class NodeKKT:
    node: int
    W: np.ndarray
    J: np.ndarray
    border: sparse.csr_matrix  # Pi_n: link rows x node vars
    rhs: np.ndarray  # -(grad_x L_n, c_n)
    cache: dict | None = None  # per-block store for factors when W, J are constant

    @property
    def nx(self):
        return self.W.shape[0]

    @property
    def nc(self):
        return self.J.shape[0]

    def K(self) -> sparse.csc_matrix:
        if not self.nc:
            return sparse.csc_matrix(self.W)
        M = np.zeros((self.nx + self.nc, self.nx + self.nc))
        M[:self.nx, :self.nx] = self.W
        M[self.nx:, :self.nx] = self.J
        M[:self.nx, self.nx:] = self.J.T
        return sparse.csc_matrix(M)

    def B(self) -> sparse.csr_matrix:
        """Border block [Pi_n, 0] (link rows x block size)."""
        if self.nc == 0:
            return self.border.tocsr()
        b = self.border.tocsr()
        return sparse.csr_matrix((b.data, b.indices, b.indptr),
                                 shape=(b.shape[0], self.nx + self.nc))


@dataclass
class BlockKKT:
    blocks: list
    rhs_link: np.ndarray  # -(Pi x - rhs)

    @property
    def n_links(self):
        return self.rhs_link.size

    def residual_norm(self):
        parts = [np.abs(b.rhs).max(initial=0.0) for b in self.blocks]
        parts.append(np.abs(self.rhs_link).max(initial=0.0))
        return float(max(parts))

    def full_matrix(self) -> sparse.csr_matrix:
        """Assemble the whole bordered matrix (node blocks first, then link rows)."""
        Ks = [b.K() for b in self.blocks]
        Bs = [b.B() for b in self.blocks]
        nl = self.n_links
        rows = [[None] * (len(Ks) + 1) for _ in range(len(Ks) + 1)]
        for i, (K, B) in enumerate(zip(Ks, Bs)):
            rows[i][i] = K
            if nl:
                rows[i][-1] = B.T
                rows[-1][i] = B
        if nl:
            rows[-1][-1] = sparse.csr_matrix((nl, nl))
        else:
            rows = [r[:-1] for r in rows[:-1]]
        if not rows:
            return sparse.csr_matrix((0, 0))
        return sparse.bmat(rows, format="csr")

    def full_rhs(self):
        return np.concatenate([b.rhs for b in self.blocks] + [self.rhs_link])


@dataclass
class KKTStep:
    dw: list  # per node: concatenated (dx_n, dlam_n)
    dlam_link: np.ndarray

    def flat(self):
        return np.concatenate(list(self.dw) + [self.dlam_link])


def _borders(flat):
    """Per-node column slices of Pi, kept on the flattened problem."""
    got = getattr(flat, "_kkt_borders", None)
    if got is not None and got[0] is flat.Pi:
        return got[1]
    Pi = flat.Pi.tocsc()
    out = {b.node: Pi[:, b.slice].tocsr() for b in flat.blocks}
    flat._kkt_borders = (flat.Pi, out)
    return out


def assemble_kkt(flat, x, lam=None, lam_link=None, linear_term=None) -> BlockKKT:
    """Linearize the KKT conditions of an equality-only flattened problem at (x, lam)."""
    if flat.n_ineq:
        raise HasInequalities("assemble_kkt needs an equality-only problem")
    x = np.asarray(x, dtype=float)
    if x.size != flat.n:
        raise ValueError(f"point has length {x.size}, problem has {flat.n} variables")
    lam = np.zeros(flat.n_eq) if lam is None else np.asarray(lam, dtype=float)
    lam_link = np.zeros(flat.n_links) if lam_link is None else np.asarray(lam_link, dtype=float)
    Pi = flat.Pi
    borders = _borders(flat)
    link_grad = Pi.T @ lam_link
    blocks = []
    eoff = 0
    for b in flat.blocks:
        xs = x[b.slice]
        ln = lam[eoff:eoff + b.n_eq]
        eoff += b.n_eq
        W = b.lagrangian_hessian(xs, ln)
        J = b.eq_jacobian(xs)
        g = b.objective_gradient(xs) + J.T @ ln + link_grad[b.slice]
        if linear_term is not None:
            g = g + linear_term[b.slice]
        c = b.eq_values(xs)
        blocks.append(NodeKKT(b.node, W, J, borders[b.node], -np.concatenate([g, c]),
                              b._structure() if b.is_qp() else None))
    r_link = -(flat.Pi @ x - flat.link_rhs)
    return BlockKKT(blocks, r_link)


def _factor_block(blk: NodeKKT):
    if blk.cache is not None and "lu" in blk.cache:
        return blk.cache["lu"]
    K = blk.K()
    if K.shape[0] == 0:
        return None
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise SingularBlock(blk.node) from exc
    d = np.abs(lu.U.diagonal())
    if d.size and d.min() <= 1e-13 * max(abs(K).max(), 1.0):
        raise SingularBlock(blk.node)
    if blk.cache is not None:
        blk.cache["lu"] = lu
    return lu


def _border_solve(blk: NodeKKT, lu, B):
    """K^{-1} B' restricted to the columns the border touches, or None."""
    key = (B.indptr.tobytes(), B.indices.tobytes(), B.data.tobytes())
    if blk.cache is not None and blk.cache.get("Zkey") == key:
        return blk.cache["Z"]
    cols = np.unique(B.indices)  # only columns touched by links matter
    Z = None
    if cols.size:
        E = np.zeros((B.shape[1], cols.size))
        E[cols, np.arange(cols.size)] = 1.0
        Z = lu.solve(E) @ B[:, cols].toarray().T
    if blk.cache is not None:
        blk.cache["Zkey"], blk.cache["Z"] = key, Z
    return Z


def solve_block(kkt: BlockKKT, method="schur") -> KKTStep:
    """Newton step from the bordered system, by dense direct LU or Schur complement."""
    sizes = [b.nx + b.nc for b in kkt.blocks]
    nl = kkt.n_links
    if method == "direct":
        M = kkt.full_matrix().toarray()
        try:
            fac = lu_factor(M, "KKT matrix")
        except Singular as exc:
            raise Singular(str(exc)) from exc
        sol = lu_apply(fac, kkt.full_rhs())
        out, off = [], 0
        for s in sizes:
            out.append(sol[off:off + s])
            off += s
        return KKTStep(out, sol[off:])
    if method != "schur":
        raise ValueError(f"unknown method {method!r}")

    facs, Zs, zs, Bs = [], [], [], []
    S = np.zeros((nl, nl))
    r = kkt.rhs_link.copy()
    for blk in kkt.blocks:  # fixed node order keeps the reduction deterministic
        lu = _factor_block(blk)
        B = blk.B()
        facs.append(lu)
        Bs.append(B)
        if lu is None:
            zs.append(np.zeros(0))
            Zs.append(None)
            continue
        z = lu.solve(blk.rhs)
        zs.append(z)
        if nl:
            Z = _border_solve(blk, lu, B)
            if Z is not None:
                S -= B @ Z
            Zs.append(Z)
            r -= B @ z
        else:
            Zs.append(None)
    if nl:
        try:
            dlam = lu_apply(lu_factor(S, "Schur complement"), r)
        except Singular as exc:
            raise SingularSchur(str(exc)) from exc
    else:
        dlam = np.zeros(0)
    dw = []
    for z, Z in zip(zs, Zs):
        dw.append(z - Z @ dlam if Z is not None else z)
    return KKTStep(dw, dlam)


@dataclass
class KKTSolution:
    x: np.ndarray
    lam: np.ndarray
    lam_link: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)
    by_node: dict = field(default_factory=dict)
    lam_nodes: dict = field(default_factory=dict)
    objective: float = float("nan")

    @property
    def residual(self):
        return self.residuals[-1]


def newton_kkt(flat, tol=1e-8, max_iter=30, method="schur", x0=None,
               lam0=None, lam_link0=None, linear_term=None) -> KKTSolution:
    """Full-step Newton on the KKT system. Converged when ||residual||_inf <= tol."""
    if flat.n_ineq:
        raise HasInequalities("newton_kkt handles equality constraints only")
    x = (flat.x0 if x0 is None else np.asarray(x0, dtype=float)).copy()
    lam = np.zeros(flat.n_eq) if lam0 is None else np.asarray(lam0, dtype=float).copy()
    lam_link = np.zeros(flat.n_links) if lam_link0 is None else np.asarray(lam_link0, dtype=float).copy()
    history = []
    it = 0
    while True:
        kkt = assemble_kkt(flat, x, lam, lam_link, linear_term)
        res = kkt.residual_norm()
        history.append(res)
        if res <= tol:
            break
        if it >= max_iter:
            raise MaxIterations(f"newton_kkt: residual {res:.3e} after {it} iterations",
                                best=(x, lam, lam_link))
        step = solve_block(kkt, method)
        eoff = 0
        for b, d in zip(flat.blocks, step.dw):
            x[b.slice] += d[:b.size]
            lam[eoff:eoff + b.n_eq] += d[b.size:]
            eoff += b.n_eq
        lam_link += step.dlam_link
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(lam))):
            raise MaxIterations("newton_kkt diverged to non-finite values", best=None)
        it += 1
    lam_nodes, eoff = {}, 0
    for b in flat.blocks:
        lam_nodes[b.node] = lam[eoff:eoff + b.n_eq].copy()
        eoff += b.n_eq
    obj = flat.objective(x)
    if linear_term is not None:
        obj += float(linear_term @ x)
    return KKTSolution(x, lam, lam_link, it, history, flat.by_node(x), lam_nodes, obj)
