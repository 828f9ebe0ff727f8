"""Component models on nodes, linear link constraints on hyperedges."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ..errors import (DanglingLink, SingleNodeLink, UnknownData, UnknownNode,
                      UnknownVariable)
from ..hypergraph import Hypergraph
from .expr import (Const, Data, Expr, Var, _as_expr, affine_form, from_json, to_json,
                   to_prefix)


class ComponentModel:
    """A node-local optimization model: variables, constraints, objective, data.

    Equalities mean ``expr == 0``; inequalities mean ``expr >= 0``.
    """

    def __init__(self, name=None):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.start: list[float] = []
        self._vars: list[Var] = []
        self._index: dict[str, int] = {}
        self.equalities: list[Expr] = []
        self.inequalities: list[Expr] = []
        self.objective: Expr = Const(0.0)
        self.data: dict = {}
        self.version = 0  # bumped on structural edits, not on data edits

    # variables
    def add_variable(self, name, lb=-math.inf, ub=math.inf, start=0.0) -> Var:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        if lb > ub:
            raise ValueError(f"bounds for {name!r}: lb > ub")
        i = len(self.var_names)
        v = Var(i, name)
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.start.append(float(start))
        self._vars.append(v)
        self._index[name] = i
        self.version += 1
        return v

    def add_variables(self, name, n, lb=-math.inf, ub=math.inf, start=0.0) -> list:
        starts = np.broadcast_to(np.asarray(start, dtype=float), (n,))
        return [self.add_variable(f"{name}[{i}]", lb, ub, starts[i]) for i in range(n)]

    def var(self, name) -> Var:
        try:
            return self._vars[self._index[name]]
        except KeyError:
            raise UnknownVariable(name) from None

    __getitem__ = var

    def has_var(self, name):
        return name in self._index

    def index_of(self, name):
        return self._index[name]

    @property
    def num_vars(self):
        return len(self.var_names)

    # data
    def add_data(self, name, value):
        """Declare a data entry; returns a Data expression (or list for vectors)."""
        arr = np.asarray(value, dtype=float)
        self.data[name] = arr.copy() if arr.ndim else float(arr)
        if arr.ndim:
            return [Data(name, i) for i in range(arr.shape[0])]
        return Data(name)

    def set_data(self, name, value):
        if name not in self.data:
            raise UnknownData(name)
        old = self.data[name]
        if isinstance(old, np.ndarray):
            arr = np.asarray(value, dtype=float)
            if arr.shape != old.shape:
                raise ValueError(f"data {name!r} shape {arr.shape} != {old.shape}")
            self.data[name] = arr.copy()
        else:
            self.data[name] = float(value)

    # constraints / objective
    def add_equality(self, expr, rhs=0.0):
        e = _as_expr(expr)
        self.equalities.append(e if rhs == 0 else e - rhs)
        self.version += 1
        return len(self.equalities) - 1

    def add_inequality(self, expr, rhs=0.0):
        e = _as_expr(expr)
        self.inequalities.append(e if rhs == 0 else e - rhs)
        self.version += 1
        return len(self.inequalities) - 1

    def set_objective(self, expr):
        self.objective = _as_expr(expr)
        self.version += 1

    # serialization
    def to_dict(self):
        data = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.data.items()}
        return {"name": self.name,
                "variables": [{"name": n, "lb": l, "ub": u, "start": s}
                              for n, l, u, s in zip(self.var_names, self.lb, self.ub, self.start)],
                "equalities": [to_json(e) for e in self.equalities],
                "inequalities": [to_json(e) for e in self.inequalities],
                "objective": to_json(self.objective),
                "data": data}

    @classmethod
    def from_dict(cls, d):
        m = cls(d.get("name"))
        for v in d["variables"]:
            m.add_variable(v["name"], v["lb"], v["ub"], v["start"])
        for k, v in d.get("data", {}).items():
            m.add_data(k, v)
        for e in d["equalities"]:
            m.add_equality(from_json(e))
        for e in d["inequalities"]:
            m.add_inequality(from_json(e))
        m.set_objective(from_json(d["objective"]))
        return m


@dataclass
class LinkConstraint:
    terms: list  # (node, var name, coefficient)
    rhs: float = 0.0

    @property
    def nodes(self):
        seen = []
        for n, _, _ in self.terms:
            if n not in seen:
                seen.append(n)
        return seen


class ModelGraph:
    def __init__(self, _hg: Hypergraph | None = None, _parent: "ModelGraph | None" = None):
        self.hg = _hg if _hg is not None else Hypergraph()
        self.parent = _parent
        self._models: dict = _parent._models if _parent is not None else {}
        self.links: dict[int, LinkConstraint] = {}
        self.subgraphs: list[ModelGraph] = []

    # -- structure -------------------------------------------------------
    @property
    def nodes(self):
        return list(self.hg.nodes)

    def add_node(self, model: ComponentModel | None = None) -> int:
        n = self.hg.add_node()
        if model is not None:
            self._models[n] = model
        return n

    def set_model(self, n, model: ComponentModel):
        if n not in self.hg:
            raise UnknownNode(n)
        self._models[n] = model

    def model(self, n) -> ComponentModel:
        if n not in self.hg:
            raise UnknownNode(n)
        return self._models.get(n)

    def add_subgraph(self) -> "ModelGraph":
        sub = ModelGraph(self.hg.add_subgraph(), self)
        self.subgraphs.append(sub)
        return sub

    def assign_node(self, n):
        self.hg.assign_node(n)

    def levels(self) -> list["ModelGraph"]:
        order, queue = [], [self]
        while queue:
            g = queue.pop(0)
            order.append(g)
            queue.extend(g.subgraphs)
        return order

    def all_links(self):
        """(edge id, LinkConstraint) in level order, parent first."""
        out = []
        for g in self.levels():
            out.extend(g.links.items())
        return out

    # -- links -----------------------------------------------------------
    def add_link_constraint(self, terms, rhs=0.0) -> int:
        merged: dict = {}
        for n, name, coef in terms:
            if n not in self.hg:
                raise UnknownNode(n)
            m = self._models.get(n)
            if m is None or not m.has_var(name):
                raise UnknownVariable(f"node {n} has no variable {name!r}")
            coef = float(coef)
            if not math.isfinite(coef) or coef == 0.0:
                raise ValueError(f"link coefficient must be finite and nonzero, got {coef}")
            merged[(n, name)] = merged.get((n, name), 0.0) + coef
        terms = [(n, name, c) for (n, name), c in merged.items() if c != 0.0]
        link = LinkConstraint(terms, float(rhs))
        support = link.nodes
        if len(support) < 2:
            raise SingleNodeLink("a link constraint must reference at least two nodes")
        eid = self.hg.add_edge(support)
        self.links[eid] = link
        return eid

    def dangling_links(self) -> list[int]:
        bad = []
        for eid, link in self.all_links():
            for n, name, _ in link.terms:
                m = self._models.get(n)
                if m is None or not m.has_var(name):
                    bad.append(eid)
                    break
        return bad

    def validate(self):
        bad = self.dangling_links()
        if bad:
            raise DanglingLink(f"link constraints {bad} reference missing variables")

    # -- data ------------------------------------------------------------
    def set_data(self, n, name, value):
        m = self.model(n)
        if m is None:
            raise UnknownNode(n)
        m.set_data(name, value)

    def warm_start_from(self, solution):
        """Copy primal values into start values, by (node, variable name)."""
        by_node = getattr(solution, "by_node", solution)
        for n, vals in by_node.items():
            m = self._models.get(n)
            if m is None:
                continue
            for name, v in vals.items():
                if m.has_var(name):
                    m.start[m.index_of(name)] = float(v)

    # -- assembly --------------------------------------------------------
    def _layout(self):
        nodes = sorted(self.hg.nodes)
        offsets, off = {}, 0
        for n in nodes:
            m = self._models.get(n)
            size = m.num_vars if m is not None else 0
            offsets[n] = (off, off + size)
            off += size
        return nodes, offsets, off

    def connectivity_matrix(self) -> "Connectivity":
        self.validate()
        nodes, offsets, nvar = self._layout()
        rows, cols, vals, rhs, row_edges = [], [], [], [], []
        for r, (eid, link) in enumerate(self.all_links()):
            for n, name, c in link.terms:
                rows.append(r)
                cols.append(offsets[n][0] + self._models[n].index_of(name))
                vals.append(c)
            rhs.append(link.rhs)
            row_edges.append(eid)
        Pi = sparse.csr_matrix((vals, (rows, cols)), shape=(len(row_edges), nvar))
        return Connectivity(Pi, np.array(rhs, dtype=float), row_edges, offsets)

    def aggregate(self) -> "FlattenedProblem":
        con = self.connectivity_matrix()
        nodes, offsets, nvar = self._layout()
        blocks = []
        for n in nodes:
            m = self._models.get(n)
            if m is None:
                continue
            a, b = offsets[n]
            blocks.append(NodeBlock(n, a, m))
        return FlattenedProblem(blocks, nvar, con)

    # -- serialization ---------------------------------------------------
    def to_dict(self):
        d = self._level_dict()
        d["models"] = {str(n): m.to_dict() for n, m in sorted(self._models.items()) if n in self.hg}
        return d

    def _level_dict(self):
        return {"nodes": list(self.hg.nodes),
                "edges": [{"id": e, "support": l.nodes, "directed": False,
                           "terms": [[n, v, c] for n, v, c in l.terms], "rhs": l.rhs}
                          for e, l in self.links.items()],
                "subgraphs": [s._level_dict() for s in self.subgraphs]}

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d):
        g = cls()
        models = {int(k): ComponentModel.from_dict(v) for k, v in d["models"].items()}
        for n in d["nodes"]:
            g.add_node(models.get(n))
        _load_links(g, d)
        return g


def _load_links(g: ModelGraph, d):
    for e in d["edges"]:
        g.add_link_constraint([tuple(t) for t in e["terms"]], e.get("rhs", 0.0))
    for sd in d.get("subgraphs", []):
        sub = g.add_subgraph()
        for n in sd["nodes"]:
            sub.assign_node(n)
        _load_links(sub, sd)


@dataclass
class Connectivity:
    """Pi_MG with row/column block accessors."""

    matrix: sparse.csr_matrix
    rhs: np.ndarray
    row_edges: list
    offsets: dict

    @property
    def shape(self):
        return self.matrix.shape

    def row_block(self, eid) -> sparse.csr_matrix:
        rows = [i for i, e in enumerate(self.row_edges) if e == eid]
        return self.matrix[rows, :]

    def col_block(self, n) -> sparse.csr_matrix:
        a, b = self.offsets[n]
        return self.matrix[:, a:b]

    def toarray(self):
        return self.matrix.toarray()


class NodeBlock:
    """One node's slice of the flattened problem, with derivative caching for QPs."""

    def __init__(self, node, offset, model: ComponentModel):
        self.node = node
        self.offset = offset
        self.model = model
        self._cache_version = None
        self._const = None

    @property
    def size(self):
        return self.model.num_vars

    @property
    def slice(self):
        return slice(self.offset, self.offset + self.model.num_vars)

    @property
    def n_eq(self):
        return len(self.model.equalities)

    @property
    def n_ineq(self):
        return len(self.model.inequalities)

    def _structure(self):
        """Detect 'quadratic objective, linear constraints, data only in constants'."""
        if self._cache_version != self.model.version:
            m = self.model
            quad = (m.objective.degree() <= 2 and not m.objective.derivatives_depend_on_data()
                    and all(e.degree() <= 1 and not e.derivatives_depend_on_data()
                            for e in m.equalities + m.inequalities))
            self._const = {"qp": quad}
            if quad:
                self._const["affine"] = self._compile_affine(m.equalities)
                if not m.objective.data_names():
                    z = np.zeros(m.num_vars)
                    self._const["f0"] = m.objective.evaluate(z, m.data)
                    self._const["g0"] = m.objective.gradient(z, m.data, m.num_vars)
            self._cache_version = m.version
        return self._const

    @staticmethod
    def _compile_affine(exprs):
        """Constant part and data references of affine rows, or None."""
        c0 = np.zeros(len(exprs))
        refs = []
        for r, e in enumerate(exprs):
            f = affine_form(e)
            if f is None:
                return None
            c0[r] = f[2]
            refs.extend((r, name, idx, coef) for (name, idx), coef in f[1].items())
        return c0, refs

    def _data_part(self, c0, refs):
        v = c0.copy()
        d = self.model.data
        for r, name, idx, coef in refs:
            if name not in d:
                raise UnknownData(name)
            val = d[name] if idx is None else d[name][idx]
            v[r] += coef * float(val)
        return v

    def is_qp(self):
        return self._structure()["qp"]

    def objective(self, x):
        st = self._structure()
        if "g0" in st:
            return float(st["f0"] + st["g0"] @ x + 0.5 * x @ (self.lagrangian_hessian(x, ()) @ x))
        return self.model.objective.evaluate(x, self.model.data)

    def objective_gradient(self, x):
        st = self._structure()
        if "g0" in st:
            return st["g0"] + self.lagrangian_hessian(x, ()) @ x
        return self.model.objective.gradient(x, self.model.data, self.size)

    def eq_values(self, x):
        st = self._structure()
        if st.get("affine") is not None:
            return self.eq_jacobian(x) @ x + self._data_part(*st["affine"])
        d = self.model.data
        return np.array([e.evaluate(x, d) for e in self.model.equalities])

    def ineq_values(self, x):
        d = self.model.data
        return np.array([e.evaluate(x, d) for e in self.model.inequalities])

    def eq_jacobian(self, x) -> np.ndarray:
        st = self._structure()
        if st["qp"] and "J" in st:
            return st["J"]
        J = self._jac(self.model.equalities, x)
        if st["qp"]:
            st["J"] = J
        return J

    def ineq_jacobian(self, x) -> np.ndarray:
        return self._jac(self.model.inequalities, x)

    def _jac(self, exprs, x):
        J = np.zeros((len(exprs), self.size))
        d = self.model.data
        for i, e in enumerate(exprs):
            j = e.jet(x, d, 1)
            if j.g is not None:
                J[i, e.vars] = j.g
        return J

    def lagrangian_hessian(self, x, lam) -> np.ndarray:
        """Hessian of f + lam' c over this block's variables."""
        st = self._structure()
        if st["qp"] and "W" in st:
            return st["W"]
        d = self.model.data
        n = self.size
        W = self.model.objective.hessian(x, d, n)
        for li, e in zip(lam, self.model.equalities):
            if e.degree() <= 1:
                continue
            j = e.jet(x, d, 2)
            if j.H is not None and li != 0.0:
                v = e.vars
                W[np.ix_(v, v)] += li * j.H
        if st["qp"]:
            st["W"] = W
        return W


class FlattenedProblem:
    """Stacked view of a model graph: x_MG, node constraints, summed objective, Pi_MG."""

    def __init__(self, blocks, nvar, con: Connectivity):
        self.blocks: list[NodeBlock] = blocks
        self.n = nvar
        self.con = con
        self.block_of = {b.node: b for b in blocks}

    # index mapping
    @property
    def Pi(self):
        return self.con.matrix

    @property
    def link_rhs(self):
        return self.con.rhs

    @property
    def n_links(self):
        return self.con.matrix.shape[0]

    @property
    def n_eq(self):
        return sum(b.n_eq for b in self.blocks)

    @property
    def n_ineq(self):
        return sum(b.n_ineq for b in self.blocks)

    def global_index(self, node, name):
        b = self.block_of[node]
        return b.offset + b.model.index_of(name)

    @property
    def names(self):
        return [f"n{b.node}.{v}" for b in self.blocks for v in b.model.var_names]

    @property
    def lb(self):
        return np.array([v for b in self.blocks for v in b.model.lb])

    @property
    def ub(self):
        return np.array([v for b in self.blocks for v in b.model.ub])

    @property
    def x0(self):
        return np.array([v for b in self.blocks for v in b.model.start], dtype=float)

    def split(self, x):
        return {b.node: np.asarray(x)[b.slice] for b in self.blocks}

    def by_node(self, x) -> dict:
        return {b.node: dict(zip(b.model.var_names, np.asarray(x)[b.slice].tolist())) for b in self.blocks}

    # evaluation
    def objective(self, x):
        return sum(b.objective(x[b.slice]) for b in self.blocks)

    def objective_gradient(self, x):
        g = np.zeros(self.n)
        for b in self.blocks:
            g[b.slice] = b.objective_gradient(x[b.slice])
        return g

    def eq_values(self, x):
        parts = [b.eq_values(x[b.slice]) for b in self.blocks]
        return np.concatenate(parts) if parts else np.zeros(0)

    def ineq_values(self, x):
        parts = [b.ineq_values(x[b.slice]) for b in self.blocks]
        return np.concatenate(parts) if parts else np.zeros(0)

    def eq_jacobian(self, x) -> sparse.csr_matrix:
        mats = [sparse.csr_matrix(b.eq_jacobian(x[b.slice])) for b in self.blocks]
        return sparse.block_diag(mats, format="csr") if mats else sparse.csr_matrix((0, self.n))

    def link_residual(self, x):
        return self.Pi @ x - self.link_rhs

    # dump
    def to_text(self) -> str:
        names = self.names
        out = [f"variables {self.n}"]
        for i, (nm, l, u, s) in enumerate(zip(names, self.lb, self.ub, self.x0)):
            out.append(f"  {i} {nm} lb={float(l)!r} ub={float(u)!r} start={float(s)!r}")
        out.append(f"equalities {self.n_eq}")
        for b in self.blocks:
            lab = names[b.slice]
            for e in b.model.equalities:
                out.append(f"  n{b.node}: {to_prefix(e, lab)} = 0")
        out.append(f"inequalities {self.n_ineq}")
        for b in self.blocks:
            lab = names[b.slice]
            for e in b.model.inequalities:
                out.append(f"  n{b.node}: {to_prefix(e, lab)} >= 0")
        out.append("objective")
        for b in self.blocks:
            out.append(f"  n{b.node}: {to_prefix(b.model.objective, names[b.slice])}")
        Pi = self.Pi.tocoo()
        out.append(f"links {self.n_links}")
        trip = sorted(zip(Pi.row.tolist(), Pi.col.tolist(), Pi.data.tolist()))
        for r in range(self.n_links):
            entries = " ".join(f"({c},{v!r})" for rr, c, v in trip if rr == r)
            out.append(f"  row {r} edge {self.con.row_edges[r]} rhs {float(self.link_rhs[r])!r}: {entries}")
        return "\n".join(out) + "\n"
