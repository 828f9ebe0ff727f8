"""Benders decomposition run as a simulated master/worker computing graph."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..computegraph import ComputingGraph, Received, Updated
from ..decomposition.benders import BendersState, solve_scenario
from ..errors import SpecError
from .resource import ResourceAllocationSpec, build_master, subproblem


@dataclass
class VirtualArchitecture:
    workers: int = 4
    delay: float = 0.005
    tau_master: float | str = "walltime"  # seconds, or "walltime"
    tau_sub: float | str = "walltime"
    colocated_single: bool = True  # one worker shares the master's CPU: no transfer delay

    def __post_init__(self):
        if not isinstance(self.workers, int) or self.workers < 1:
            raise SpecError("workers must be an integer >= 1")
        if not (self.delay >= 0):
            raise SpecError("delay must be nonnegative")
        for name in ("tau_master", "tau_sub"):
            v = getattr(self, name)
            if v != "walltime" and not (isinstance(v, (int, float)) and v >= 0):
                raise SpecError(f"{name} must be 'walltime' or a nonnegative number")

    @property
    def edge_delay(self):
        return 0.0 if (self.workers == 1 and self.colocated_single) else self.delay

    def makespan(self, rounds, n_scenarios):
        """Closed-form schedule with fixed compute times (for cross-checking)."""
        if "walltime" in (self.tau_master, self.tau_sub):
            raise ValueError("closed form needs fixed compute times")
        batches = math.ceil(n_scenarios / self.workers)
        return rounds * (self.tau_master + batches * (2 * self.edge_delay + self.tau_sub))


@dataclass
class BendersRun:
    graph: ComputingGraph
    state: BendersState
    best_x: np.ndarray | None
    status: str

    @property
    def objective(self):
        return self.state.upper

    @property
    def makespan(self):
        return self.graph.clock

    @property
    def rounds(self):
        return len(self.state.log)


def build_benders_computegraph(spec: ResourceAllocationSpec, arch: VirtualArchitecture,
                               tol=1e-8, max_rounds=50):
    """Master node plus ``arch.workers`` subproblem nodes. Returns (graph, state)."""
    if not isinstance(arch, VirtualArchitecture):
        raise SpecError("arch must be a VirtualArchitecture")
    master_lp = build_master(spec)
    sub = subproblem(spec)
    scenarios = spec.scenarios
    nS, N = len(scenarios), arch.workers
    state = BendersState()
    best = {"x": None}
    g = ComputingGraph()

    m = g.add_node("master")
    m.add_attribute("x_hat", {"round": 0, "w": np.zeros(spec.n_bases)})
    m.add_attribute("S", {})
    m.add_attribute("C", [])
    m.add_attribute("flag", 0)
    m.add_attribute("queue", [])
    for n in range(N):
        m.add_attribute(f"xi_{n + 1}", None)
        m.add_attribute(f"s_{n + 1}", None)

    def run_master(ctx):
        if state.log and state.upper - state.lower <= tol:
            ctx.stop()
            return
        if len(state.log) >= max_rounds:
            ctx.stop()
            return
        master_lp.cuts = list(ctx.get("C"))
        msol = master_lp.solve()
        state.lower = max(state.lower, msol.objective)
        rnd = ctx.get("flag") + 1
        ctx.set("x_hat", {"round": rnd, "w": master_lp.w_of(msol.x), "x": msol.x})
        ctx.set("S", {})
        for n in range(min(N, nS)):
            ctx.set(f"xi_{n + 1}", {"round": rnd, "index": n})
        ctx.set("queue", list(range(min(N, nS), nS)))

    def receive_solution(ctx):
        s = ctx.get(ctx.cause)
        x_hat = ctx.get("x_hat")
        if s is None or s["round"] != x_hat["round"]:
            return
        S = ctx.get("S")
        S[s["index"]] = (s["value"], s["lam"])
        queue = ctx.get("queue")
        if queue:
            # hand the next scenario to the worker that just finished
            ctx.set(ctx.cause.replace("s_", "xi_"), {"round": s["round"], "index": queue.pop(0)})
            ctx.set("queue", queue)
        ctx.set("S", S)
        if len(S) < nS:
            return
        vals = [S[i][0] for i in range(nS)]
        lams = [S[i][1] for i in range(nS)]
        ub = float(np.sum(vals))
        if ub < state.upper:
            state.upper = ub
            best["x"] = np.asarray(x_hat["x"]).copy()
            state.best_w = np.asarray(x_hat["w"]).copy()
        state.solutions = list(zip(vals, lams))
        state.iteration = x_hat["round"]
        done = state.upper - state.lower <= tol
        if not done:
            cut = master_lp.add_cut(vals, lams, x_hat["w"])
            state.cuts.append(cut)
            ctx.set("C", ctx.get("C") + [cut])
        state.log.append((x_hat["round"], state.lower, state.upper, state.upper - state.lower,
                          1000.0 * ctx.now))
        ctx.set("flag", x_hat["round"])

    g.add_node_task(m, "run_master", run_master, Updated("flag"), compute_time=arch.tau_master)
    g.add_node_task(m, "receive_solution", receive_solution,
                    Received(*[f"s_{n + 1}" for n in range(N)]), compute_time=0.0,
                    capacity=N)
    g.schedule_trigger(m, "run_master", 0.0)

    workers = []
    for n in range(N):
        wk = g.add_node(f"worker{n + 1}")
        wk.add_attribute("x_hat", {"round": 0, "w": np.zeros(spec.n_bases)})
        wk.add_attribute("xi", None)
        wk.add_attribute("s", None)

        def solve_subproblem(ctx):
            xi = ctx.get("xi")
            x_hat = ctx.get("x_hat")
            if xi["round"] != x_hat["round"]:
                raise RuntimeError("scenario arrived before the master solution")
            v, lam = solve_scenario(sub, x_hat["w"], scenarios[xi["index"]])
            ctx.set("s", {"round": xi["round"], "index": xi["index"], "value": v, "lam": lam})

        g.add_node_task(wk, "solve_subproblem", solve_subproblem, Received("xi"),
                        compute_time=arch.tau_sub)
        workers.append(wk)

    d = arch.edge_delay
    g.connect(m["x_hat"], [wk["x_hat"] for wk in workers], delay=d, name="x_hat")
    for n, wk in enumerate(workers):
        g.connect(m[f"xi_{n + 1}"], wk["xi"], delay=d, name=f"xi_{n + 1}")
        g.connect(wk["s"], m[f"s_{n + 1}"], delay=d, name=f"s_{n + 1}")
    g._benders = (state, best)
    return g, state


def run_benders_computegraph(spec, arch, tol=1e-8, max_rounds=50, horizon=None):
    g, state = build_benders_computegraph(spec, arch, tol, max_rounds)
    status = g.execute(horizon)
    return BendersRun(g, state, g._benders[1]["x"], status)
