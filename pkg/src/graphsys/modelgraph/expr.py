"""Expression DAGs with exact evaluation and forward-mode derivatives.

Every node knows the sorted set of variable indices below it; derivative
"jets" (value, gradient, Hessian) are carried on that compressed set and
scattered into the parent's set on the way up. Second derivatives are the
forward-over-forward product rule, so a Hessian costs O(k^2) per node where
k is the local variable count.
"""
from __future__ import annotations

import math
from numbers import Real

import numpy as np

from ..errors import DomainError, UnknownData

_EMPTY = np.zeros(0, dtype=np.int64)


def _as_expr(v):
    if isinstance(v, Expr):
        return v
    if isinstance(v, (Real, np.floating, np.integer)):
        return Const(float(v))
    raise TypeError(f"cannot use {type(v).__name__} in an expression")


class Jet:
    """Value plus gradient/Hessian over ``vars`` (None means identically zero)."""

    __slots__ = ("val", "g", "H")

    def __init__(self, val, g=None, H=None):
        self.val = val
        self.g = g
        self.H = H


class Expr:
    __slots__ = ("_vars", "_topo_cache", "_pos", "__weakref__")
    kind = "?"

    def __init__(self):
        self._vars = None
        self._topo_cache = None
        self._pos = None

    # -- structure -------------------------------------------------------
    def children(self):
        return ()

    @property
    def vars(self) -> np.ndarray:
        if self._vars is None:
            kids = self.children()
            if not kids:
                self._vars = _EMPTY
            else:
                self._vars = np.unique(np.concatenate([c.vars for c in kids]))
        return self._vars

    def _topo(self):
        if self._topo_cache is None:
            order, seen = [], set()
            stack = [(self, False)]
            while stack:
                node, done = stack.pop()
                if done:
                    order.append(node)
                    continue
                if id(node) in seen:
                    continue
                seen.add(id(node))
                stack.append((node, True))
                for c in reversed(node.children()):
                    if id(c) not in seen:
                        stack.append((c, False))
            self._topo_cache = order
        return self._topo_cache

    def _positions(self):
        if self._pos is None:
            mine = self.vars
            self._pos = [np.searchsorted(mine, c.vars) for c in self.children()]
        return self._pos

    def data_names(self) -> set:
        return {n.name for n in self._topo() if isinstance(n, Data)}

    def degree(self) -> int:
        """Polynomial degree in the variables (3 stands for 'nonlinear')."""
        memo = {}
        for n in self._topo():
            memo[id(n)] = n._degree([memo[id(c)] for c in n.children()])
        return memo[id(self)]

    def _degree(self, kids):
        return 3

    def derivatives_depend_on_data(self) -> bool:
        """True when a data entry can change the gradient or Hessian."""
        memo = {}
        for n in self._topo():
            kids = n.children()
            flag = any(memo[id(c)][0] for c in kids)
            hasdata = isinstance(n, Data) or any(memo[id(c)][1] for c in kids)
            if not flag and len(kids) > 0 and not isinstance(n, LinearSum):
                if n.kind in ("add", "sub", "neg"):
                    pass
                elif n.kind == "mul":
                    a, b = kids
                    flag = (memo[id(a)][1] and len(b.vars) > 0) or (memo[id(b)][1] and len(a.vars) > 0)
                else:
                    flag = hasdata and len(n.vars) > 0
            memo[id(n)] = (flag, hasdata)
        return memo[id(self)][0]

    # -- operators -------------------------------------------------------
    def __add__(self, o):
        return add(self, _as_expr(o))

    def __radd__(self, o):
        return add(_as_expr(o), self)

    def __sub__(self, o):
        return Binary("sub", self, _as_expr(o))

    def __rsub__(self, o):
        return Binary("sub", _as_expr(o), self)

    def __mul__(self, o):
        return Binary("mul", self, _as_expr(o))

    def __rmul__(self, o):
        return Binary("mul", _as_expr(o), self)

    def __truediv__(self, o):
        return Binary("div", self, _as_expr(o))

    def __rtruediv__(self, o):
        return Binary("div", _as_expr(o), self)

    def __pow__(self, o):
        return Binary("pow", self, _as_expr(o))

    def __rpow__(self, o):
        return Binary("pow", _as_expr(o), self)

    def __neg__(self):
        return Unary("neg", self)

    def __pos__(self):
        return self

    # -- evaluation ------------------------------------------------------
    def evaluate(self, x, data=None) -> float:
        vals = {}
        for n in self._topo():
            vals[id(n)] = n._value([vals[id(c)] for c in n.children()], x, data)
        return vals[id(self)]

    def jet(self, x, data=None, order=1) -> Jet:
        jets = {}
        for n in self._topo():
            jets[id(n)] = n._jet([jets[id(c)] for c in n.children()], x, data, order)
        return jets[id(self)]

    def gradient(self, x, data=None, size=None) -> np.ndarray:
        """Dense gradient of length ``size`` (defaults to len(x))."""
        j = self.jet(x, data, 1)
        out = np.zeros(len(x) if size is None else size)
        if j.g is not None:
            out[self.vars] = j.g
        return out

    def hessian(self, x, data=None, size=None) -> np.ndarray:
        j = self.jet(x, data, 2)
        m = len(x) if size is None else size
        out = np.zeros((m, m))
        if j.H is not None:
            v = self.vars
            out[np.ix_(v, v)] = j.H
        return out

    def __repr__(self):
        return to_prefix(self)

    # helpers for subclasses
    def _lift(self, kid_jets, order):
        """Scatter child gradients/Hessians into this node's variable set."""
        m = len(self.vars)
        gs, Hs = [], []
        for j, pos in zip(kid_jets, self._positions()):
            if j.g is None:
                gs.append(None)
                Hs.append(None)
                continue
            if len(pos) == m:
                gs.append(j.g)
                Hs.append(j.H if order > 1 else None)
                continue
            g = np.zeros(m)
            g[pos] = j.g
            gs.append(g)
            if order > 1 and j.H is not None:
                H = np.zeros((m, m))
                H[np.ix_(pos, pos)] = j.H
                Hs.append(H)
            else:
                Hs.append(None)
        return gs, Hs


def _check(v):
    if isinstance(v, float) and not math.isfinite(v):
        raise DomainError(f"non-finite value {v}")
    return v


class Const(Expr):
    __slots__ = ("value",)
    kind = "const"

    def __init__(self, value):
        super().__init__()
        self.value = float(value)

    def _degree(self, kids):
        return 0

    def _value(self, kv, x, data):
        return self.value

    def _jet(self, kj, x, data, order):
        return Jet(self.value)


class Var(Expr):
    __slots__ = ("index", "name")
    kind = "var"

    def __init__(self, index, name=None):
        super().__init__()
        self.index = int(index)
        self.name = name if name is not None else f"x[{index}]"
        self._vars = np.array([self.index], dtype=np.int64)

    def _degree(self, kids):
        return 1

    def _value(self, kv, x, data):
        return float(x[self.index])

    def _jet(self, kj, x, data, order):
        return Jet(float(x[self.index]), np.ones(1), np.zeros((1, 1)) if order > 1 else None)


class Data(Expr):
    """Reference to an entry of the model's data vector (optionally an element)."""

    __slots__ = ("name", "idx")
    kind = "data"

    def __init__(self, name, idx=None):
        super().__init__()
        self.name = name
        self.idx = idx

    def _degree(self, kids):
        return 0

    def _value(self, kv, x, data):
        if data is None or self.name not in data:
            raise UnknownData(self.name)
        v = data[self.name]
        if self.idx is not None:
            v = v[self.idx]
        return float(v)

    def _jet(self, kj, x, data, order):
        return Jet(self._value(None, x, data))


class LinearSum(Expr):
    """n-ary ``const + sum_i coef_i * child_i``; keeps wide sums shallow."""

    __slots__ = ("terms", "coefs", "const")
    kind = "sum"

    def __init__(self, terms, coefs=None, const=0.0):
        super().__init__()
        self.terms = tuple(terms)
        self.coefs = tuple(float(c) for c in (coefs if coefs is not None else [1.0] * len(self.terms)))
        self.const = float(const)

    def children(self):
        return self.terms

    def _degree(self, kids):
        return max(kids, default=0)

    def _value(self, kv, x, data):
        return _check(self.const + sum(c * v for c, v in zip(self.coefs, kv)))

    def _jet(self, kj, x, data, order):
        val = self._value([j.val for j in kj], x, data)
        m = len(self.vars)
        if m == 0:
            return Jet(val)
        g = np.zeros(m)
        H = np.zeros((m, m)) if order > 1 else None
        for c, j, pos in zip(self.coefs, kj, self._positions()):
            if j.g is None:
                continue
            g[pos] += c * j.g
            if H is not None and j.H is not None:
                if len(pos) == 1:
                    H[pos[0], pos[0]] += c * j.H[0, 0]
                else:
                    H[np.ix_(pos, pos)] += c * j.H
        return Jet(val, g, H)


def add(a, b):
    """Addition that flattens into a LinearSum."""
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    terms, coefs, const = [], [], 0.0
    for e in (a, b):
        if isinstance(e, LinearSum):
            terms.extend(e.terms)
            coefs.extend(e.coefs)
            const += e.const
        elif isinstance(e, Const):
            const += e.value
        else:
            terms.append(e)
            coefs.append(1.0)
    return LinearSum(terms, coefs, const)


def quicksum(items, coefs=None, const=0.0) -> Expr:
    items = [_as_expr(i) for i in items]
    return LinearSum(items, coefs, const)


def affine_form(e: Expr):
    """Split an expression that is affine in variables and data.

    Returns (var_coefs {index: c}, data_coefs {(name, idx): c}, const) or None
    when some product or nonlinear operation involves a variable or data entry.
    """
    forms = {}
    for n in e._topo():
        k = [forms[id(c)] for c in n.children()]
        if any(f is None for f in k):
            forms[id(n)] = None
            continue
        if isinstance(n, Const):
            f = ({}, {}, n.value)
        elif isinstance(n, Var):
            f = ({n.index: 1.0}, {}, 0.0)
        elif isinstance(n, Data):
            f = ({}, {(n.name, n.idx): 1.0}, 0.0)
        elif isinstance(n, LinearSum):
            f = _affine_comb(k, n.coefs, n.const)
        elif isinstance(n, Unary) and n.op == "neg":
            f = _affine_comb(k, (-1.0,), 0.0)
        elif isinstance(n, Binary) and n.op in ("add", "sub"):
            f = _affine_comb(k, (1.0, 1.0 if n.op == "add" else -1.0), 0.0)
        elif isinstance(n, Binary) and n.op == "mul":
            (va, da, ca), (vb, db, cb) = k
            if not va and not da:
                f = _affine_comb([k[1]], (ca,), 0.0)
            elif not vb and not db:
                f = _affine_comb([k[0]], (cb,), 0.0)
            else:
                f = None
        elif isinstance(n, Binary) and n.op == "div":
            vb, db, cb = k[1]
            f = _affine_comb([k[0]], (1.0 / cb,), 0.0) if not vb and not db and cb != 0 else None
        else:
            f = None if (len(n.vars) or n.data_names()) else ({}, {}, n.evaluate(np.zeros(0)))
        forms[id(n)] = f
    return forms[id(e)]


def _affine_comb(forms, coefs, const):
    v, d, c = {}, {}, const
    for (fv, fd, fc), a in zip(forms, coefs):
        for i, x in fv.items():
            v[i] = v.get(i, 0.0) + a * x
        for i, x in fd.items():
            d[i] = d.get(i, 0.0) + a * x
        c += a * fc
    return v, d, c


_UNARY = ("neg", "exp", "log", "sabs", "sqrt")


class Unary(Expr):
    __slots__ = ("op", "arg", "eps")

    def __init__(self, op, arg, eps=None):
        super().__init__()
        if op not in _UNARY:
            raise ValueError(op)
        self.op = op
        self.arg = _as_expr(arg)
        self.eps = eps

    @property
    def kind(self):
        return "neg" if self.op == "neg" else "unary"

    def children(self):
        return (self.arg,)

    def _degree(self, kids):
        if self.op == "neg" or kids[0] == 0:
            return kids[0]
        return 3

    def _d(self, a):
        """(f, f', f'') of the scalar map."""
        op = self.op
        if op == "neg":
            return -a, -1.0, 0.0
        if op == "exp":
            try:
                e = math.exp(a)
            except OverflowError:
                raise DomainError(f"exp overflow at {a}")
            return e, e, e
        if op == "log":
            if a <= 0:
                raise DomainError(f"log of non-positive value {a}")
            return math.log(a), 1.0 / a, -1.0 / (a * a)
        if op == "sqrt":
            if a < 0:
                raise DomainError(f"sqrt of negative value {a}")
            s = math.sqrt(a)
            if s == 0:
                return 0.0, math.inf, -math.inf
            return s, 0.5 / s, -0.25 / (s * a)
        # smooth abs
        e2 = self.eps * self.eps
        s = math.sqrt(a * a + e2)
        return s, a / s, e2 / (s * s * s)

    def _value(self, kv, x, data):
        return _check(self._d(kv[0])[0])

    def _jet(self, kj, x, data, order):
        j = kj[0]
        f, d1, d2 = self._d(j.val)
        _check(f)
        if j.g is None:
            return Jet(f)
        g = d1 * j.g
        H = None
        if order > 1:
            H = d2 * np.outer(j.g, j.g)
            if j.H is not None:
                H += d1 * j.H
        return Jet(f, g, H)


class Binary(Expr):
    __slots__ = ("op", "a", "b")

    def __init__(self, op, a, b):
        super().__init__()
        if op not in ("add", "sub", "mul", "div", "pow"):
            raise ValueError(op)
        self.op = op
        self.a = _as_expr(a)
        self.b = _as_expr(b)

    @property
    def kind(self):
        return self.op

    def children(self):
        return (self.a, self.b)

    def _degree(self, kids):
        da, db = kids
        if self.op in ("add", "sub"):
            return max(da, db)
        if self.op == "mul":
            return min(da + db, 3)
        if self.op == "div":
            return da if db == 0 else 3
        if db == 0 and isinstance(self.b, Const):
            p = self.b.value
            if da == 0:
                return 0
            if p == int(p) and 0 <= p <= 3:
                return min(int(p) * da, 3)
        return 0 if (da == 0 and db == 0) else 3

    def _value(self, kv, x, data):
        a, b = kv
        op = self.op
        if op == "add":
            r = a + b
        elif op == "sub":
            r = a - b
        elif op == "mul":
            r = a * b
        elif op == "div":
            if b == 0:
                raise DomainError("division by zero")
            r = a / b
        else:
            r = _pow(a, b)
        return _check(r)

    def _jet(self, kj, x, data, order):
        ja, jb = kj
        val = self._value([ja.val, jb.val], x, data)
        if ja.g is None and jb.g is None:
            return Jet(val)
        (ga, gb), (Ha, Hb) = self._lift(kj, order)
        m = len(self.vars)
        op = self.op
        two = order > 1

        def z():
            return np.zeros(m)

        if op in ("add", "sub"):
            s = 1.0 if op == "add" else -1.0
            g = (ga if ga is not None else z()) + s * (gb if gb is not None else z())
            H = None
            if two:
                H = np.zeros((m, m))
                if Ha is not None:
                    H += Ha
                if Hb is not None:
                    H += s * Hb
            return Jet(val, g, H)
        if op == "mul":
            a, b = ja.val, jb.val
            g = z()
            H = np.zeros((m, m)) if two else None
            if ga is not None:
                g += b * ga
                if two and Ha is not None:
                    H += b * Ha
            if gb is not None:
                g += a * gb
                if two and Hb is not None:
                    H += a * Hb
            if two and ga is not None and gb is not None:
                o = np.outer(ga, gb)
                H += o + o.T
            return Jet(val, g, H)
        if op == "div":
            a, b = ja.val, jb.val
            # a * r with r = 1/b
            r, r1, r2 = 1.0 / b, -1.0 / (b * b), 2.0 / (b * b * b)
            g = z()
            H = np.zeros((m, m)) if two else None
            gr = r1 * gb if gb is not None else None
            if ga is not None:
                g += r * ga
                if two and Ha is not None:
                    H += r * Ha
            if gr is not None:
                g += a * gr
                if two:
                    Hr = r2 * np.outer(gb, gb)
                    if Hb is not None:
                        Hr += r1 * Hb
                    H += a * Hr
            if two and ga is not None and gr is not None:
                o = np.outer(ga, gr)
                H += o + o.T
            return Jet(val, g, H)
        # pow
        a, b = ja.val, jb.val
        if jb.g is None:
            # a^p with constant p
            p = b
            f1 = p * _pow(a, p - 1) if p != 0 else 0.0
            f2 = p * (p - 1) * _pow(a, p - 2) if p not in (0, 1) else 0.0
            g = f1 * ga
            H = None
            if two:
                H = f2 * np.outer(ga, ga)
                if Ha is not None:
                    H += f1 * Ha
            return Jet(val, g, H)
        # general: exp(b * log a)
        if a <= 0:
            raise DomainError(f"variable exponent needs positive base, got {a}")
        la = math.log(a)
        # u = b*log(a); du = log(a) gb + b/a ga
        gu = z()
        gu += la * gb
        if ga is not None:
            gu += (b / a) * ga
        g = val * gu
        H = None
        if two:
            Hu = np.zeros((m, m))
            if Hb is not None:
                Hu += la * Hb
            if ga is not None:
                o = np.outer(ga, gb) / a
                Hu += o + o.T
                Hu += (-b / (a * a)) * np.outer(ga, ga)
                if Ha is not None:
                    Hu += (b / a) * Ha
            H = val * (np.outer(gu, gu) + Hu)
        return Jet(val, g, H)


def _pow(a, p):
    try:
        if a < 0 and p != int(p):
            raise DomainError(f"negative base {a} with fractional exponent {p}")
        if a == 0 and p < 0:
            raise DomainError("zero to a negative power")
        return float(a) ** p
    except OverflowError:
        raise DomainError(f"overflow in {a}**{p}")


# -- constructors -----------------------------------------------------------
def exp(e):
    return Unary("exp", e)


def log(e):
    return Unary("log", e)


def sqrt(e):
    return Unary("sqrt", e)


def sabs(e, eps=1e-4):
    """Smooth absolute value sqrt(e^2 + eps^2)."""
    return Unary("sabs", e, eps=float(eps))


# -- printing / serialization ----------------------------------------------
def _fmt(v):
    return repr(float(v))


def to_prefix(e: Expr, names=None) -> str:
    """Prefix (s-expression) rendering. ``names`` maps var index -> label."""
    memo = {}
    for n in e._topo():
        k = [memo[id(c)] for c in n.children()]
        if isinstance(n, Const):
            s = _fmt(n.value)
        elif isinstance(n, Var):
            s = names[n.index] if names is not None else n.name
        elif isinstance(n, Data):
            s = f"${n.name}" + (f"[{n.idx}]" if n.idx is not None else "")
        elif isinstance(n, LinearSum):
            parts = [f"(* {_fmt(c)} {t})" if c != 1.0 else t for c, t in zip(n.coefs, k)]
            if n.const != 0.0 or not parts:
                parts.append(_fmt(n.const))
            s = "(+ " + " ".join(parts) + ")"
        elif isinstance(n, Unary):
            s = f"(sabs[{_fmt(n.eps)}] {k[0]})" if n.op == "sabs" else f"({n.op} {k[0]})"
        else:
            sym = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}[n.op]
            s = f"({sym} {k[0]} {k[1]})"
        memo[id(n)] = s
    return memo[id(e)]


def to_json(e: Expr):
    memo = {}
    for n in e._topo():
        k = [memo[id(c)] for c in n.children()]
        if isinstance(n, Const):
            r = ["const", n.value]
        elif isinstance(n, Var):
            r = ["var", n.index, n.name]
        elif isinstance(n, Data):
            r = ["data", n.name, n.idx]
        elif isinstance(n, LinearSum):
            r = ["sum", list(n.coefs), k, n.const]
        elif isinstance(n, Unary):
            r = [n.op, k[0]] + ([n.eps] if n.op == "sabs" else [])
        else:
            r = [n.op, k[0], k[1]]
        memo[id(n)] = r
    return memo[id(e)]


def from_json(obj) -> Expr:
    tag = obj[0]
    if tag == "const":
        return Const(obj[1])
    if tag == "var":
        return Var(obj[1], obj[2])
    if tag == "data":
        return Data(obj[1], obj[2])
    if tag == "sum":
        return LinearSum([from_json(c) for c in obj[2]], obj[1], obj[3])
    if tag in _UNARY:
        return Unary(tag, from_json(obj[1]), eps=obj[2] if tag == "sabs" else None)
    return Binary(tag, from_json(obj[1]), from_json(obj[2]))
