"""Linearized MPC for the reactor-separator plant, run over a computing graph.

Each controller QP is a model graph with one node per prediction step. Node t
holds the predicted deviation dx_{t+1}, a copy z_t of dx_t and the input move
du_t. The copy ties to the previous node through a link constraint, so the
bordered KKT system has the chain structure that the Schur path exploits.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..computegraph import ComputingGraph, Received, Updated
from ..errors import SpecError
from ..modelgraph import ComponentModel, ModelGraph, quicksum
from ..solvers import newton_kkt
from .reactor import SUBSYSTEMS, ReactorSpec, linearize, simulate_plant, tracking_error

ARCHITECTURES = ("centralized", "decentralized", "cooperative")


class ControllerQP:
    """Equality-constrained tracking QP over ``states`` driven by ``inputs``.

    Inputs listed in ``others`` enter as known trajectories (Data), every other
    plant input is held at its setpoint.
    """

    def __init__(self, spec: ReactorSpec, states, inputs, others=(), AB=None):
        A, B = linearize(spec) if AB is None else AB
        self.spec = spec
        self.states = list(states)
        self.inputs = list(inputs)
        self.others = list(others)
        s = self.states
        dt = spec.dt
        Ad = np.eye(len(s)) + dt * A[np.ix_(s, s)]
        Bd = dt * B[np.ix_(s, self.inputs)]
        self.Bo = dt * B[np.ix_(s, self.others)] if self.others else np.zeros((len(s), 0))
        q = np.asarray(spec.q)[s]
        r = np.asarray(spec.r)[self.inputs]
        ns, m, N = len(s), len(self.inputs), spec.horizon_steps
        self.N = N
        g = ModelGraph()
        self.nodes = []
        for t in range(N):
            cm = ComponentModel(f"step{t}")
            nxt = cm.add_variables("dx", ns)
            z = cm.add_variables("z", ns)
            du = cm.add_variables("du", m)
            d = cm.add_data("d", np.zeros(ns))
            for i in range(ns):
                terms = [nxt[i]] + z + du + [d[i]]
                coefs = [1.0] + list(-Ad[i]) + list(-Bd[i]) + [-1.0]
                cm.add_equality(quicksum(terms, coefs))
            if t == 0:
                x0 = cm.add_data("x0", np.zeros(ns))
                for i in range(ns):
                    cm.add_equality(z[i] - x0[i])
            cm.set_objective(quicksum([v * v for v in nxt] + [v * v for v in du],
                                      list(q) + list(r)))
            self.nodes.append(g.add_node(cm))
        for t in range(1, N):
            for i in range(ns):
                g.add_link_constraint([(self.nodes[t], f"z[{i}]", 1.0),
                                       (self.nodes[t - 1], f"dx[{i}]", -1.0)])
        self.graph = g
        self.flat = g.aggregate()
        self._du = [self.flat.global_index(n, f"du[{k}]") for n in self.nodes for k in range(m)]
        self.last = None

    def solve(self, dx0, other_plan=None):
        """Input deviations (N x m) for state deviation ``dx0`` over ``states``."""
        dx0 = np.asarray(dx0, dtype=float)
        self.graph.set_data(self.nodes[0], "x0", dx0)
        for t, n in enumerate(self.nodes):
            d = np.zeros(len(self.states))
            if other_plan is not None and self.others:
                d = self.Bo @ np.asarray(other_plan[t], dtype=float)
            self.graph.set_data(n, "d", d)
        sol = newton_kkt(self.flat, tol=1e-8, max_iter=3)
        self.last = sol
        return sol.x[self._du].reshape(self.N, len(self.inputs))


def controller_qp(spec: ReactorSpec, subsystem, y, neighbors=None, local=False, qp=None):
    """Absolute input trajectory (N x m) for one controller.

    ``subsystem`` is "centralized" or a controller index 0..2. With ``local``
    the controller models only its own four states; otherwise it uses the full
    plant with neighbor inputs fixed to ``neighbors`` (deviations, N x 6) or
    their setpoint when None.
    """
    y = np.asarray(y, dtype=float)
    usp = np.asarray(spec.u_sp)
    if subsystem == "centralized":
        states, inputs, others = list(range(12)), list(range(9)), []
    else:
        states, inputs = SUBSYSTEMS[subsystem]
        others = [k for k in range(9) if k not in inputs]
        if not local:
            states = list(range(12))
        else:
            others = []
    qp = qp or ControllerQP(spec, states, inputs, others)
    dx0 = y - np.asarray(spec.x_sp)[states] if y.size == len(states) else \
        y[states] - np.asarray(spec.x_sp)[states]
    return usp[inputs] + qp.solve(dx0, neighbors)


@dataclass
class MPCRun:
    architecture: str
    graph: ComputingGraph
    spec: ReactorSpec
    status: str = ""
    solves: int = 0
    meta: dict = field(default_factory=dict)

    def series(self):
        """Committed plant states as (t, x) pairs."""
        return [(t, np.asarray(v)) for t, v in self.graph.state_series("plant", "x")]

    def errors(self):
        return [(t, tracking_error(self.spec, x)) for t, x in self.series()]

    @property
    def initial_error(self):
        return tracking_error(self.spec, self.spec.x0)

    @property
    def final_error(self):
        return tracking_error(self.spec, self.graph.node("plant").value("x"))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        from .reactor import STATE_NAMES
        w.writerow(["t"] + STATE_NAMES + ["error"])
        for t, x in self.series():
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x]
                       + [repr(tracking_error(self.spec, x))])
        return buf.getvalue()


def build_mpc_computegraph(spec: ReactorSpec, architecture="cooperative", iter_max=None):
    """Plant plus controllers wired per architecture; returns (graph, info dict)."""
    if architecture not in ARCHITECTURES:
        raise SpecError(f"architecture must be one of {ARCHITECTURES}, got {architecture!r}")
    iter_max = spec.iter_max if iter_max is None else int(iter_max)
    if iter_max < 1:
        raise SpecError("iter_max must be at least 1")
    AB = linearize(spec)
    usp = np.asarray(spec.u_sp)
    g = ComputingGraph()
    info = {"solves": 0}

    plant = g.add_node("plant")
    plant.add_attribute("x", np.asarray(spec.x0, dtype=float))
    for i, (_, idx) in enumerate(SUBSYSTEMS):
        plant.add_attribute(f"u{i + 1}", np.asarray(spec.u0, dtype=float)[idx])

    def run_plant(ctx):
        now = ctx.now
        t_next = ctx.next_signal_time()
        horizon = ctx.graph.horizon
        if spec.plant_step is not None:
            t_next = min(t_next, now + spec.plant_step)
        if horizon is not None:
            t_next = min(t_next, horizon)
        if t_next <= now and horizon is not None and now >= horizon:
            ctx.compute_time = 0.0
            return
        u = np.concatenate([ctx.get(f"u{i + 1}") for i in range(3)])
        ctx.set("x", simulate_plant(spec, ctx.get("x"), u, now, t_next))
        ctx.compute_time = t_next - now

    g.add_node_task(plant, "run_plant", run_plant, Updated("x"), compute_time="callback")
    g.schedule_trigger(plant, "run_plant", 0.0)

    def measure(dests):
        return g.connect(plant["x"], dests, delay=spec.measurement_delay, send_on="sent",
                         send_wait=spec.sample_period, start=spec.start, name="measure")

    def inject(node, i):
        g.connect(node[f"u_inject{i + 1}"], plant[f"u{i + 1}"], delay=spec.injection_delay,
                  name=f"inject{i + 1}")

    if architecture == "centralized":
        ctl = g.add_node("controller")
        ctl.add_attribute("y", np.asarray(spec.x0, dtype=float))
        for i, (_, idx) in enumerate(SUBSYSTEMS):
            ctl.add_attribute(f"u_inject{i + 1}", usp[idx])
        qp = ControllerQP(spec, range(12), range(9), AB=AB)

        def calc(ctx):
            du = qp.solve(ctx.get("y") - np.asarray(spec.x_sp))
            info["solves"] += 1
            u = usp + du[0]
            for i, (_, idx) in enumerate(SUBSYSTEMS):
                ctx.set(f"u_inject{i + 1}", u[idx])

        g.add_node_task(ctl, "calculate_control", calc, Received("y"),
                        compute_time=spec.central_time)
        measure([ctl["y"]])
        for i in range(3):
            inject(ctl, i)
        return g, info

    ctls = [g.add_node(f"controller{i + 1}") for i in range(3)]
    for i, c in enumerate(ctls):
        c.add_attribute("y", np.asarray(spec.x0, dtype=float))
        c.add_attribute(f"u_inject{i + 1}", usp[SUBSYSTEMS[i][1]])
    measure([c["y"] for c in ctls])
    for i, c in enumerate(ctls):
        inject(c, i)

    if architecture == "decentralized":
        for i, c in enumerate(ctls):
            states, inputs = SUBSYSTEMS[i]
            qp = ControllerQP(spec, states, inputs, AB=AB)

            def calc(ctx, i=i, qp=qp, states=states, inputs=inputs):
                y = ctx.get("y")[states]
                du = qp.solve(y - np.asarray(spec.x_sp)[states])
                info["solves"] += 1
                ctx.set(f"u_inject{i + 1}", usp[inputs] + du[0])

            g.add_node_task(c, "calculate_control", calc, Received("y"),
                            compute_time=spec.local_time)
        return g, info

    # cooperative: the first pass after a measurement is the local (decentralized)
    # plan; later passes re-plan against the full model with the neighbors' latest
    # exchanged trajectories and relax toward the result with weight w
    w = spec.coop_weight if spec.coop_weight is not None else 1.0 / len(ctls)
    N = spec.horizon_steps
    for i, c in enumerate(ctls):
        nbrs = [j for j in range(3) if j != i]
        inputs = SUBSYSTEMS[i][1]
        others = [k for j in nbrs for k in SUBSYSTEMS[j][1]]
        qp = ControllerQP(spec, range(12), inputs, others, AB=AB)
        local = ControllerQP(spec, SUBSYSTEMS[i][0], inputs, AB=AB)
        c.add_attribute("u_p", {"round": -1.0, "iter": 0, "plan": np.zeros((N, 3))})
        for j in nbrs:
            c.add_attribute(f"u_p{j + 1}", {"round": -1.0, "iter": 0, "plan": np.zeros((N, 3))})
        c.add_attribute("iter", 0)
        c.add_attribute("flag", None)

        def calc(ctx, i=i, nbrs=nbrs, qp=qp, local=local, inputs=inputs):
            rnd = ctx.attr("y").last_received
            dy = ctx.get("y") - np.asarray(spec.x_sp)
            if ctx.cause == "y":
                # new measurement: the first pass knows nothing about the neighbors yet
                new = local.solve(dy[SUBSYSTEMS[i][0]])
                k = 0
            else:
                k = ctx.get("iter")
                other = np.hstack([ctx.get(f"u_p{j + 1}")["plan"] for j in nbrs])
                ustar = qp.solve(dy, other)
                new = w * ustar + (1.0 - w) * ctx.get("u_p")["plan"]
            info["solves"] += 1
            k += 1
            if k >= iter_max:
                ctx.set(f"u_inject{i + 1}", usp[inputs] + new[0])
                k = 0
            ctx.set("u_p", {"round": rnd, "iter": k if k else iter_max, "plan": new})
            ctx.set("iter", k)

        def receive_policy(ctx, nbrs=nbrs):
            k = ctx.get("iter")
            if k == 0:
                return
            rnd = ctx.attr("y").last_received
            for j in nbrs:
                p = ctx.attr(f"u_p{j + 1}").value
                if p["round"] != rnd or p["iter"] != k:
                    return
            if ctx.attr("flag").value != (rnd, k):
                ctx.set("flag", (rnd, k))

        g.add_node_task(c, "calculate_control", calc, [Received("y"), Updated("flag")],
                        compute_time=spec.local_time)
        g.add_node_task(c, "receive_policy", receive_policy,
                        [Received(*[f"u_p{j + 1}" for j in nbrs]), Updated("iter")],
                        compute_time=0.0)
    for i, c in enumerate(ctls):
        g.connect(c["u_p"], [ctls[j][f"u_p{i + 1}"] for j in range(3) if j != i],
                  delay=spec.exchange_delay, name=f"exchange{i + 1}")
    return g, info


def run_mpc(spec: ReactorSpec, architecture="cooperative", horizon=5000.0, iter_max=None):
    g, info = build_mpc_computegraph(spec, architecture, iter_max)
    status = g.execute(horizon)
    return MPCRun(architecture, g, spec, status, info["solves"])
