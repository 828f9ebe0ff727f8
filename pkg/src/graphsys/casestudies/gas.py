"""Gas pipeline network: junction and pipeline nodes, finite-difference pipes.

Units follow the scaled convention: flows in 1e4 SCM/h, pressures in bar.
Pipes use backward differences in time and forward differences in space;
linepack is a trapezoid sum. Time point 0 carries the steady-state rows.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..decomposition.partition import apply_partition
from ..errors import SpecError
from ..hypergraph import partition
from ..modelgraph import ComponentModel, ModelGraph, quicksum
from ..modelgraph.expr import sabs
from ..solvers.kkt import assemble_kkt, solve_block

RHO_N = 0.72  # kg/m3 at normal conditions


@dataclass
class Junction:
    theta_lb: float = 35.0
    theta_ub: float = 70.0
    supply_cap: float | None = None
    demand_target: list | None = None  # per time point


@dataclass
class Pipeline:
    source: int
    target: int
    length: float = 100e3
    diameter: float = 0.92
    friction: float = 0.01
    active: bool = False
    boost_lb: float = 0.0
    boost_ub: float = 30.0
    c: tuple | None = None  # explicit (c1, c2, c3, c4) overrides the standard forms

    @property
    def area(self):
        return math.pi * self.diameter ** 2 / 4.0


@dataclass
class GasNetworkSpec:
    junctions: list
    pipelines: list
    nx: int = 3
    nt: int = 4
    dt: float = 1800.0
    sound_speed: float = 370.0
    cp: float = 2.34
    temperature: float = 288.0
    gamma: float = 1.3
    alpha_p: float = 1e-5
    supply_pressure: float = 60.0
    base_flow: float = 50.0
    prox: float = 1e-2  # proximal weight keeping node blocks nonsingular
    demand_weight: float = 1.0
    power_weight: float = 1e-4
    sabs_eps: float = 1e-4
    inequalities: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @property
    def alpha_f(self):
        return 3600.0 / (1e4 * RHO_N)

    def constants(self, pipe: Pipeline):
        """(c1, c2, c3, c4) for one pipe; standard forms unless given explicitly."""
        if pipe.c is not None:
            return tuple(float(v) for v in pipe.c)
        A, c2s, af, ap = pipe.area, self.sound_speed ** 2, self.alpha_f, self.alpha_p
        c1 = c2s * ap / (A * af)
        c2 = A * af / ap
        c3 = pipe.friction * c2s * ap / (2.0 * pipe.diameter * A * af)
        c4 = self.cp * self.temperature / af
        return c1, c2, c3, c4

    def dx(self, pipe):
        return pipe.length / (self.nx - 1)

    def validate(self):
        nj = len(self.junctions)
        if nj < 2 or len(self.pipelines) != nj - 1:
            raise SpecError("a series network needs n junctions and n-1 pipelines")
        if self.nx < 2 or self.nt < 1:
            raise SpecError("need nx >= 2 space points and nt >= 1 time points")
        for k, p in enumerate(self.pipelines):
            if (p.source, p.target) != (k, k + 1):
                raise SpecError(f"pipeline {k} must join junctions {k} and {k + 1}")
            for v in (p.length, p.diameter, p.friction):
                if not (math.isfinite(v) and v > 0):
                    raise SpecError(f"pipeline {k}: length, diameter, friction must be positive")
            if not all(math.isfinite(c) and c >= 0 for c in self.constants(p)):
                raise SpecError(f"pipeline {k}: constants must be finite and nonnegative")
            if p.boost_lb > p.boost_ub:
                raise SpecError(f"pipeline {k}: empty boost range")
        for k, j in enumerate(self.junctions):
            if j.theta_lb > j.theta_ub:
                raise SpecError(f"junction {k}: empty pressure range")
            if j.demand_target is not None and len(j.demand_target) != self.nt:
                raise SpecError(f"junction {k}: demand target needs {self.nt} entries")
        for name in ("dt", "sound_speed", "cp", "temperature", "alpha_p", "supply_pressure"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise SpecError(f"{name} must be finite and positive")
        if not self.gamma > 1:
            raise SpecError("gamma must exceed 1")

    def with_mesh(self, nx=None, nt=None):
        d = self.to_dict()
        if nx is not None:
            d["nx"] = nx
        if nt is not None:
            d["nt"] = nt
            for j in d["junctions"]:
                if j["demand_target"] is not None:
                    j["demand_target"] = _step_profile(j["demand_target"][0],
                                                       j["demand_target"][-1], nt)
        return GasNetworkSpec.from_dict(d)

    def to_dict(self):
        out = {k: v for k, v in self.__dict__.items() if k not in ("junctions", "pipelines")}
        out["junctions"] = [dict(j.__dict__) for j in self.junctions]
        out["pipelines"] = [dict(p.__dict__, c=None if p.c is None else list(p.c))
                            for p in self.pipelines]
        return out

    @classmethod
    def from_dict(cls, d):
        try:
            d = dict(d)
            js = [Junction(**j) for j in d.pop("junctions")]
            ps = [Pipeline(**p) for p in d.pop("pipelines")]
            return cls(js, ps, **d)
        except (KeyError, TypeError) as exc:
            raise SpecError(f"bad gas network spec: {exc}") from exc

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def _step_profile(before, after, nt):
    return [float(before if t < nt // 2 else after) for t in range(nt)]


def paper_network(nx=3, nt=4, **kw) -> GasNetworkSpec:
    """Supply at junction 0, demand at junction 13, compressors on pipes 1..12."""
    n = 14
    base = kw.get("base_flow", 50.0)
    js = [Junction() for _ in range(n)]
    js[0] = Junction(supply_cap=2.0 * base)
    js[-1] = Junction(demand_target=_step_profile(base, 0.8 * base, nt))
    ps = [Pipeline(k, k + 1, active=k > 0) for k in range(n - 1)]
    return GasNetworkSpec(js, ps, nx=nx, nt=nt, **kw)


def steady_profile(spec: GasNetworkSpec, pipe: Pipeline, p_in, flow):
    """March the steady momentum balance along the pipe (forward differences)."""
    _, c2, c3, _ = spec.constants(pipe)
    h = spec.dx(pipe)
    p = [float(p_in)]
    for _ in range(spec.nx - 1):
        p.append(p[-1] - h * c3 * flow * abs(flow) / (c2 * p[-1]))
    return np.array(p)


def build_gas_modelgraph(spec: GasNetworkSpec):
    """Returns (graph, layout) where layout maps junctions/pipes to node ids."""
    nt, nx = spec.nt, spec.nx
    F = spec.base_flow
    g = ModelGraph()
    jnodes, pnodes = [], []
    # steady start point: every pipe inlet sits at the supply pressure
    profiles = [steady_profile(spec, p, spec.supply_pressure, F) for p in spec.pipelines]

    for k, jd in enumerate(spec.junctions):
        m = ComponentModel(f"junction{k}")
        theta0 = spec.supply_pressure if k == 0 else profiles[k - 1][-1]
        prox = []
        th = [m.add_variable(f"theta[{t}]", jd.theta_lb, jd.theta_ub, theta0) for t in range(nt)]
        prox += [(v, theta0) for v in th]
        obj = []
        if jd.supply_cap is not None:
            s = [m.add_variable(f"supply[{t}]", 0.0, jd.supply_cap, F) for t in range(nt)]
            prox += [(v, F) for v in s]
        if jd.demand_target is not None:
            tgt = m.add_data("target", jd.demand_target)
            d = [m.add_variable(f"demand[{t}]", 0.0, max(jd.demand_target), F) for t in range(nt)]
            prox += [(v, F) for v in d]
            obj += [spec.demand_weight * (d[t] - tgt[t]) * (d[t] - tgt[t]) for t in range(nt)]
        obj += [spec.prox * (v - v0) * (v - v0) for v, v0 in prox]
        m.set_objective(quicksum(obj))
        jnodes.append(g.add_node(m))

    for k, pd in enumerate(spec.pipelines):
        c1, c2, c3, c4 = spec.constants(pd)
        h, dt = spec.dx(pd), spec.dt
        prof = profiles[k]
        boost0 = spec.supply_pressure - (spec.supply_pressure if k == 0 else profiles[k - 1][-1])
        m = ComponentModel(f"pipeline{k}")
        p = [[m.add_variable(f"p[{t},{j}]", 0.0, math.inf, prof[j]) for j in range(nx)]
             for t in range(nt)]
        f = [[m.add_variable(f"f[{t},{j}]", start=F) for j in range(nx)] for t in range(nt)]
        pin = [m.add_variable(f"pin[{t}]", start=prof[0] - boost0) for t in range(nt)]
        pout = [m.add_variable(f"pout[{t}]", start=prof[-1]) for t in range(nt)]
        fin = [m.add_variable(f"fin[{t}]", start=F) for t in range(nt)]
        fout = [m.add_variable(f"fout[{t}]", start=F) for t in range(nt)]
        lp0 = (h / c1) * (prof.sum() - 0.5 * (prof[0] + prof[-1]))
        mass = [m.add_variable(f"linepack[{t}]", start=lp0) for t in range(nt)]
        prox = [(v, prof[j]) for row in p for j, v in enumerate(row)]
        prox += [(v, F) for row in f for v in row]
        prox += [(v, prof[0] - boost0) for v in pin] + [(v, prof[-1]) for v in pout]
        prox += [(v, F) for v in fin + fout] + [(v, lp0) for v in mass]
        obj = []
        if pd.active:
            dth = [m.add_variable(f"boost[{t}]", pd.boost_lb, pd.boost_ub, boost0)
                   for t in range(nt)]
            pw0 = c4 * F * (((prof[0]) / (prof[0] - boost0)) ** ((spec.gamma - 1) / spec.gamma) - 1)
            power = [m.add_variable(f"power[{t}]", 0.0, math.inf, pw0) for t in range(nt)]
            prox += [(v, boost0) for v in dth] + [(v, pw0) for v in power]
            obj += [spec.power_weight * v for v in power]
        for t in range(nt):
            for j in range(nx - 1):
                fric = c3 * f[t][j] * sabs(f[t][j], spec.sabs_eps) / p[t][j]
                if t == 0:  # steady-state initial condition
                    m.add_equality(c1 * (f[0][j + 1] - f[0][j]) / h)
                    m.add_equality(c2 * (p[0][j + 1] - p[0][j]) / h + fric)
                else:
                    m.add_equality((p[t][j] - p[t - 1][j]) / dt + c1 * (f[t][j + 1] - f[t][j]) / h)
                    m.add_equality((f[t][j] - f[t - 1][j]) / dt + c2 * (p[t][j + 1] - p[t][j]) / h
                                   + fric)
            m.add_equality(p[t][-1] - pout[t])
            if pd.active:
                m.add_equality(p[t][0] - pin[t] - dth[t])
                ratio = (pin[t] + dth[t]) / pin[t]
                m.add_equality(power[t] - c4 * fin[t] * (ratio ** ((spec.gamma - 1) / spec.gamma) - 1))
            else:
                m.add_equality(p[t][0] - pin[t])
            m.add_equality(f[t][-1] - fout[t])
            m.add_equality(f[t][0] - fin[t])
            trap = quicksum(p[t], [h / c1 * (0.5 if j in (0, nx - 1) else 1.0) for j in range(nx)])
            m.add_equality(mass[t] - trap)
        if spec.inequalities:
            m.add_inequality(mass[0] - mass[-1])  # m(T) >= m(0), written as g(x) <= 0
        obj += [spec.prox * (v - v0) * (v - v0) for v, v0 in prox]
        m.set_objective(quicksum(obj))
        pnodes.append(g.add_node(m))

    for k, pd in enumerate(spec.pipelines):
        for t in range(nt):  # pressure ties at both ends
            g.add_link_constraint([(pnodes[k], f"pin[{t}]", 1.0),
                                   (jnodes[pd.source], f"theta[{t}]", -1.0)])
            g.add_link_constraint([(pnodes[k], f"pout[{t}]", 1.0),
                                   (jnodes[pd.target], f"theta[{t}]", -1.0)])
    for n, jd in enumerate(spec.junctions):
        for t in range(nt):  # node balance
            terms = [(pnodes[k], f"fout[{t}]", 1.0) for k, pd in enumerate(spec.pipelines)
                     if pd.target == n]
            terms += [(pnodes[k], f"fin[{t}]", -1.0) for k, pd in enumerate(spec.pipelines)
                      if pd.source == n]
            if jd.supply_cap is not None:
                terms.append((jnodes[n], f"supply[{t}]", 1.0))
            if jd.demand_target is not None:
                terms.append((jnodes[n], f"demand[{t}]", -1.0))
            g.add_link_constraint(terms)
    return g, {"junctions": jnodes, "pipelines": pnodes}


def expected_counts(spec: GasNetworkSpec):
    """Constructive variable / row counts, independent of the built graph."""
    nt, nx = spec.nt, spec.nx
    nvar = 0
    for j in spec.junctions:
        nvar += nt * (1 + (j.supply_cap is not None) + (j.demand_target is not None))
    neq = 0
    for p in spec.pipelines:
        nvar += nt * (2 * nx + 4 + 1 + (2 if p.active else 0))
        neq += nt * (2 * (nx - 1) + 4 + 1 + (1 if p.active else 0))
    links_per_t = 2 * len(spec.pipelines) + len(spec.junctions)
    return {"variables": nvar, "equalities": neq, "links_per_time": links_per_t,
            "links": links_per_t * nt, "nodes": len(spec.junctions) + len(spec.pipelines)}


@dataclass
class StructureReport:
    nodes: int
    variables: int
    equalities: int
    links: int
    parts: int
    part_sizes: list
    cut_links: list
    level_links: list
    schur_direct_diff: float
    timings: list = field(default_factory=list)  # (nx, nt, size, t_schur, t_direct)

    def to_text(self):
        lines = [f"nodes {self.nodes}", f"variables {self.variables}",
                 f"equalities {self.equalities}", f"links {self.links}",
                 f"parts {self.parts} sizes {self.part_sizes}",
                 f"cut links {len(self.cut_links)}", f"links per level {self.level_links}",
                 f"schur vs direct relative difference {self.schur_direct_diff:.3e}"]
        if self.timings:
            lines.append("nx nt kkt_size t_schur t_direct")
            lines += [f"{a} {b} {c} {d:.6f} {e:.6f}" for a, b, c, d, e in self.timings]
        return "\n".join(lines) + "\n"


def _kkt_at_start(spec):
    s = GasNetworkSpec.from_dict(dict(spec.to_dict(), inequalities=False))
    g, _ = build_gas_modelgraph(s)
    flat = g.aggregate()
    return g, flat, assemble_kkt(flat, flat.x0)


def compare_steps(kkt):
    a = solve_block(kkt, "schur").flat()
    b = solve_block(kkt, "direct").flat()
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def time_solves(kkt, repeats=3):
    ts, td = math.inf, math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        solve_block(kkt, "schur")
        ts = min(ts, time.perf_counter() - t0)
        t0 = time.perf_counter()
        solve_block(kkt, "direct")
        td = min(td, time.perf_counter() - t0)
    return ts, td


def mesh_sweep(spec: GasNetworkSpec, nxs=(3, 6, 12, 24), nt=None, repeats=3):
    """(nx, nt, kkt size, schur seconds, direct seconds) per mesh."""
    rows = []
    for nx in nxs:
        s = spec.with_mesh(nx=nx, nt=nt)
        _, flat, kkt = _kkt_at_start(s)
        for b in kkt.blocks:  # a timing run must factor from scratch
            b.cache = None
        size = flat.n + flat.n_eq + flat.n_links
        ts, td = time_solves(kkt, repeats)
        rows.append((nx, s.nt, size, ts, td))
    return rows


def scaling_exponent(rows, col):
    """Slope of log(time) against log(size) by least squares."""
    x = np.log([r[2] for r in rows])
    y = np.log([r[col] for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def gas_structure_report(graph_or_spec, k=13, sweep=None):
    """Partition, restructure, and check the linearized KKT step both ways."""
    spec = graph_or_spec
    if not isinstance(spec, GasNetworkSpec):
        raise SpecError("gas_structure_report needs a GasNetworkSpec")
    g, flat, kkt = _kkt_at_start(spec)
    part = partition(g.hg, k)
    hier = apply_partition(g, part)
    cut = [eid for eid in part.cut_edges]
    diff = compare_steps(kkt)
    hflat = hier.aggregate()
    hdiff = compare_steps(assemble_kkt(hflat, hflat.x0))
    rep = StructureReport(len(g.nodes), flat.n, flat.n_eq, flat.n_links, k, part.sizes(), cut,
                          [len(lv.links) for lv in hier.levels()], max(diff, hdiff))
    if sweep:
        rep.timings = mesh_sweep(spec, **({} if sweep is True else sweep))
    return rep
