import dataclasses
import math

import numpy as np
import pytest

from graphsys.casestudies import (ControllerQP, ReactorSpec, VirtualArchitecture,
                                  build_benders_computegraph, build_gas_modelgraph,
                                  build_mpc_computegraph, controller_qp, expected_counts,
                                  gas_structure_report, load_preset, paper_network, random_instance,
                                  run_benders_computegraph, run_mpc, simulate_plant,
                                  solve_benders, tracking_error)
from graphsys.casestudies.reactor import rhs
from graphsys.casestudies.resource import ResourceAllocationSpec
from graphsys.errors import SpecError, StateBlowup

# -- reactor -------------------------------------------------------------------

SPEC = ReactorSpec()


def test_setpoint_is_nearly_steady():
    d = rhs(SPEC, SPEC.x_sp, SPEC.u_sp)
    assert np.all(np.abs(d) <= 1e-2)


def test_zero_interval_and_bad_arguments():
    x = np.asarray(SPEC.x0)
    assert np.array_equal(simulate_plant(SPEC, x, SPEC.u0, 5.0, 5.0), x)
    with pytest.raises(ValueError):
        simulate_plant(SPEC, x, SPEC.u0, 5.0, 4.0)
    with pytest.raises(ValueError):
        simulate_plant(SPEC, x[:5], SPEC.u0, 0.0, 1.0)
    bad = x.copy()
    bad[3] = np.nan
    with pytest.raises(StateBlowup):
        simulate_plant(SPEC, bad, SPEC.u0, 0.0, 1.0)


def test_rk4_step_halving():
    a = simulate_plant(SPEC, SPEC.x0, SPEC.u0, 0.0, 60.0)
    b = simulate_plant(SPEC, SPEC.x0, SPEC.u0, 0.0, 60.0, substep=0.5)
    assert np.all(np.abs(a - b) <= 1e-6 * np.abs(b))


def test_reactor_spec_validation():
    with pytest.raises(SpecError):
        ReactorSpec(x0=[1.0] * 11)
    with pytest.raises(SpecError):
        ReactorSpec.from_dict({"bogus": 1})
    assert ReactorSpec.from_dict(SPEC.to_dict()) == SPEC


# -- controller QP -------------------------------------------------------------

def test_setpoint_is_a_fixed_point():
    u = controller_qp(SPEC, "centralized", SPEC.x_sp)
    assert u.shape == (SPEC.horizon_steps, 9)
    assert np.allclose(u, SPEC.u_sp, atol=1e-10)
    for i in range(3):
        for local in (True, False):
            u = controller_qp(SPEC, i, SPEC.x_sp, local=local)
            assert np.allclose(u, np.asarray(SPEC.u_sp)[3 * i:3 * i + 3], atol=1e-10)


def test_state_weights_enter_exactly():
    qp = ControllerQP(SPEC, range(4), range(3))
    for i, q in enumerate([100.0, 10.0, 100.0, 0.1]):
        x = np.zeros(qp.flat.n)
        x[qp.flat.global_index(qp.nodes[3], f"dx[{i}]")] = 1.0
        assert qp.flat.objective(x) == pytest.approx(q, rel=1e-14)


def test_centralized_step_residual():
    qp = ControllerQP(SPEC, range(12), range(9))
    qp.solve(np.asarray(SPEC.x0) - np.asarray(SPEC.x_sp))
    assert qp.last.iterations == 1 and qp.last.residual <= 1e-8


# -- MPC over the computing graph ----------------------------------------------

def test_measurement_times():
    g, _ = build_mpc_computegraph(SPEC, "centralized")
    g.execute(200)
    sends = [e["t"] for e in g.export_trace()["events"]
             if e["entity"]["name"] == "measure" and e["signal"] == "communicate"]
    assert sends == [5.0, 65.0, 125.0, 185.0]


def test_plant_series_matches_direct_integration_before_first_injection():
    run = run_mpc(SPEC, "centralized", horizon=120.0)
    # first injection lands at 5 (send) + 30 (delay) + 3 (solve) + 30 (delay) = 68
    first = min(e["t"] for e in run.graph.export_trace()["events"]
                if e["entity"]["name"] == "plant" and e["signal"] == "attribute_received")
    assert first == 68.0
    checked = 0
    for t, x in run.series():
        if 0 < t <= first:
            ref = simulate_plant(SPEC, SPEC.x0, SPEC.u0, 0.0, t)
            assert np.allclose(x, ref, rtol=1e-9, atol=0)
            checked += 1
    assert checked >= 2


@pytest.mark.parametrize("arch", ["centralized", "decentralized", "cooperative"])
def test_injections_follow_measurements(arch):
    run = run_mpc(SPEC, arch, horizon=400.0)
    evs = run.graph.export_trace()["events"]
    got_y = {}
    for e in evs:
        name = e["entity"]["name"]
        if e["signal"] == "attribute_received" and e.get("attr") == "y":
            got_y.setdefault(name, e["t"])
        if e["entity"]["kind"] == "edge" and name.startswith("inject") and e["signal"] == "communicate":
            src = run.graph.export_trace()["meta"]["edge_sources"][name]
            assert src in got_y and got_y[src] <= e["t"]


def test_cooperative_with_one_iteration_is_decentralized():
    a = run_mpc(SPEC, "decentralized", horizon=800.0)
    b = run_mpc(SPEC, "cooperative", horizon=800.0, iter_max=1)
    for i in (1, 2, 3):  # identical injected inputs at identical times
        ua = a.graph.state_series("plant", f"u{i}")
        ub = b.graph.state_series("plant", f"u{i}")
        assert len(ua) == len(ub) > 1
        assert all(ta == tb and np.array_equal(xa, xb) for (ta, xa), (tb, xb) in zip(ua, ub))
    # exchange traffic adds plant commit points, but shared times carry the same state
    xa, xb = dict(a.series()), dict(b.series())
    common = set(xa) & set(xb)
    assert len(common) > 10 and all(np.array_equal(xa[t], xb[t]) for t in common)


def test_mpc_errors_and_csv():
    with pytest.raises(SpecError):
        build_mpc_computegraph(SPEC, "anarchic")
    with pytest.raises(SpecError):
        build_mpc_computegraph(SPEC, "cooperative", iter_max=0)
    run = run_mpc(SPEC, "centralized", horizon=300.0)
    lines = run.to_csv().splitlines()
    assert lines[0].startswith("t,H1,") and lines[0].endswith(",error")
    assert float(lines[1].split(",")[0]) == 0.0 and float(lines[-1].split(",")[0]) == 300.0
    assert run.initial_error == pytest.approx(tracking_error(SPEC, SPEC.x0))


# -- Benders over a virtual cluster --------------------------------------------

TAU_M, TAU_S, DELTA = 0.01, 0.003, 0.005


def six_scenario_spec():
    spec = ResourceAllocationSpec(**load_preset("paper-benders")["spec"])
    return dataclasses.replace(spec, scenarios=spec.scenarios[:6])


def fixed_arch(n, **kw):
    return VirtualArchitecture(workers=n, delay=kw.get("delay", DELTA),
                               tau_master=kw.get("tau_m", TAU_M), tau_sub=kw.get("tau_s", TAU_S))


def test_wiring_for_three_workers():
    g, _ = build_benders_computegraph(six_scenario_spec(), fixed_arch(3))
    assert [n.name for n in g.nodes] == ["master", "worker1", "worker2", "worker3"]
    assert sorted(e.name for e in g.edges) == ["s_1", "s_2", "s_3", "x_hat", "xi_1", "xi_2", "xi_3"]
    m = g.nodes[0]
    assert {"x_hat", "S", "C", "flag", "xi_1", "s_3"} <= set(m.attributes)
    assert set(m.tasks) == {"run_master", "receive_solution"}
    assert all(set(w.attributes) == {"x_hat", "xi", "s"} for w in g.nodes[1:])
    with pytest.raises(SpecError):
        VirtualArchitecture(workers=0)


def test_computegraph_objective_matches_numeric_driver():
    rng = np.random.default_rng(2024)
    for _ in range(10):
        spec = random_instance(rng)
        run = run_benders_computegraph(spec, fixed_arch(3))
        _, state = solve_benders(spec)
        assert run.status == "stopped"
        assert run.objective == pytest.approx(state.upper, abs=1e-6)


def test_first_round_dispatch_times():
    # N=4, six scenarios: worker1 starts scenario 0 at tau_m + delta, its result is back at
    # tau_m + 2 delta + tau_s, and scenario 4 then reaches it one delta later
    run = run_benders_computegraph(six_scenario_spec(), fixed_arch(4))
    starts = {}
    for e in run.graph.export_trace()["events"]:
        if e["signal"] == "execute_task" and e.get("note") == "solve_subproblem":
            starts.setdefault(e["entity"]["name"], []).append(e["t"])
    assert starts["worker1"][:2] == pytest.approx([TAU_M + DELTA, TAU_M + 3 * DELTA + TAU_S], abs=1e-15)
    assert starts["worker3"][0] == pytest.approx(TAU_M + DELTA, abs=1e-15)
    assert starts["worker3"][1] > TAU_M + 2 * DELTA + TAU_S  # only one scenario in round 1


@pytest.mark.parametrize("n, per_round", [
    (1, TAU_M + 6 * TAU_S),                      # colocated: no transfers, scenarios in series
    (4, TAU_M + 2 * (2 * DELTA + TAU_S)),        # two waves of send, solve, return
    (8, TAU_M + (2 * DELTA + TAU_S)),            # every scenario in one wave
])
def test_makespan_matches_hand_schedule(n, per_round):
    run = run_benders_computegraph(six_scenario_spec(), fixed_arch(n))
    assert run.makespan == pytest.approx(run.rounds * per_round, abs=1e-12)


def test_makespan_is_exact_with_dyadic_times():
    tm, ts, d = 2.0 ** -6, 2.0 ** -8, 2.0 ** -7
    for n, per_round in ((1, tm + 6 * ts), (4, tm + 2 * (2 * d + ts)), (8, tm + 2 * d + ts)):
        run = run_benders_computegraph(six_scenario_spec(), fixed_arch(n, tau_m=tm, tau_s=ts, delay=d))
        assert run.makespan == run.rounds * per_round


def test_one_worker_beats_four_on_the_preset():
    pre = load_preset("paper-benders")
    spec = ResourceAllocationSpec(**pre["spec"])
    runs = {n: run_benders_computegraph(spec, fixed_arch(n)) for n in (1, 4, 8, 16)}
    objs = [r.objective for r in runs.values()]
    assert max(objs) - min(objs) <= 1e-9
    assert runs[1].makespan < runs[4].makespan
    assert runs[16].makespan < runs[8].makespan < runs[1].makespan


# -- gas network -----------------------------------------------------------------

GAS = paper_network(nx=3, nt=4)


def test_gas_counts_by_hand():
    g, layout = build_gas_modelgraph(GAS)
    flat = g.aggregate()
    assert len(g.nodes) == 27 == len(layout["junctions"]) + len(layout["pipelines"])
    # junctions: 14 pressures per time point plus one supply and one demand
    # pipes per time point: 3 p + 3 f + pin, pout, fin, fout + linepack, and boost, power if active
    assert flat.n == 4 * (14 + 2) + 4 * 11 + 12 * 4 * 13 == 732
    # per time point: 2 (nx - 1) dynamics + 4 boundary + linepack, plus power if active
    assert flat.n_eq == 4 * 9 + 12 * 4 * 10 == 516
    assert flat.n_links == 4 * (2 * 13 + 14) == 160
    c = expected_counts(GAS)
    assert (c["variables"], c["equalities"], c["links"], c["nodes"]) == (732, 516, 160, 27)


def test_gas_partition_and_schur():
    rep = gas_structure_report(GAS, k=13)
    assert rep.nodes == 27 and rep.parts == 13 and len(rep.part_sizes) == 13
    assert max(rep.part_sizes) - min(rep.part_sizes) <= 1
    assert rep.schur_direct_diff <= 1e-8
    assert sum(rep.level_links) == rep.links
    assert "cut links" in rep.to_text()


def frictionless(pipe):
    c1, c2, _, c4 = GAS.constants(pipe)
    return dataclasses.replace(pipe, c=(c1, c2, 0.0, c4))


def test_frictionless_constant_profile_has_zero_pipe_residuals():
    spec = dataclasses.replace(GAS, pipelines=[frictionless(p) for p in GAS.pipelines])
    g, layout = build_gas_modelgraph(spec)
    flat = g.aggregate()
    P, F = 50.0, 40.0
    x = flat.x0.copy()
    for k, node in enumerate(layout["pipelines"]):
        c1 = spec.constants(spec.pipelines[k])[0]
        h = spec.dx(spec.pipelines[k])
        for t in range(spec.nt):
            for j in range(spec.nx):
                x[flat.global_index(node, f"p[{t},{j}]")] = P
                x[flat.global_index(node, f"f[{t},{j}]")] = F
            for name, v in (("pin", P), ("pout", P), ("fin", F), ("fout", F)):
                x[flat.global_index(node, f"{name}[{t}]")] = v
            x[flat.global_index(node, f"linepack[{t}]")] = (h / c1) * (spec.nx - 1) * P
            if spec.pipelines[k].active:
                x[flat.global_index(node, f"boost[{t}]")] = 0.0
                x[flat.global_index(node, f"power[{t}]")] = 0.0
    res = flat.eq_values(x)
    row = 0
    pipe_blocks = set(layout["pipelines"])
    for b in flat.blocks:
        if b.node in pipe_blocks:
            r = res[row:row + b.n_eq]
            # linepack rows compare two sums of the same terms, so allow rounding there
            assert np.max(np.abs(r)) <= 1e-12 * P * h / c1
        row += b.n_eq


def test_presets():
    for name in ("paper-gas", "paper-benders", "paper-reactor"):
        assert load_preset(name)["study"] in ("gas", "benders", "mpc")
    a = load_preset("paper-benders")
    a["spec"]["budget"] = -1
    assert load_preset("paper-benders")["spec"]["budget"] == 6.0
    with pytest.raises(SpecError):
        load_preset("paper-nothing")
