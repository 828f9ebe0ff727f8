"""graphsys command line: demos, case-study runs, partition reports, Gantt rendering.

Exit codes: 0 success, 2 usage, 3 bad spec or trace, 4 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields

import numpy as np

from .errors import BadK, BadTrace, GraphSysError, SpecError

EXIT_OK, EXIT_USAGE, EXIT_SPEC, EXIT_RUNTIME = 0, 2, 3, 4
STUDIES = ("benders", "mpc", "gas", "workflow")
DEFAULT_PRESET = {"benders": "paper-benders", "mpc": "paper-reactor", "gas": "paper-gas"}
FIXED_TAU = {"tau_master": 0.01, "tau_sub": 0.003}


@dataclass
class RunConfig:
    command: str = "run"
    study: str | None = None
    preset: str | None = None
    spec: str | None = None
    workers: int | None = None
    delay: float | None = None
    horizon: float | None = None
    nx: int | None = None
    nt: int | None = None
    k: int | None = None
    arch: str | None = None
    iter_max: int | None = None
    sweep: list | None = None
    trace: str | None = None
    csv: str | None = None
    svg: str | None = None
    deterministic: bool = False

    _types = {"workers": int, "nx": int, "nt": int, "k": int, "iter_max": int,
              "delay": float, "horizon": float, "deterministic": bool, "sweep": list}

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise SpecError("config file must hold a JSON object")
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise SpecError(f"unknown config keys {sorted(extra)}")
        cfg = cls()
        for key, val in raw.items():
            cfg.set(key, val)
        return cfg

    def set(self, key, val):
        want = self._types.get(key)
        if val is not None and want is not None:
            ok = isinstance(val, want) and not (want is int and isinstance(val, bool))
            if want is float:
                ok = isinstance(val, (int, float)) and not isinstance(val, bool)
            if not ok:
                raise SpecError(f"config key {key!r} needs {want.__name__}, got {val!r}")
            if want is float:
                val = float(val)
        elif val is not None and key not in self._types and not isinstance(val, str):
            raise SpecError(f"config key {key!r} needs a string, got {val!r}")
        setattr(self, key, val)


def _sweep_arg(text):
    try:
        vals = [int(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad sweep list {text!r}") from exc
    if not vals or min(vals) < 2:
        raise argparse.ArgumentTypeError("sweep needs space-point counts >= 2")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="graphsys", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    demo = sub.add_parser("demo", help="small worked examples")
    demo.add_argument("what", choices=["modelgraph"])
    demo.add_argument("--dump", metavar="PATH", help="write the flattened problem as text")

    run = sub.add_parser("run", help="run a case study")
    run.add_argument("study", choices=STUDIES)
    run.add_argument("--config", metavar="PATH", help="JSON run configuration; flags win")
    run.add_argument("--preset")
    run.add_argument("--spec", metavar="PATH", help="study spec as JSON")
    run.add_argument("--workers", type=int)
    run.add_argument("--delay", type=float)
    run.add_argument("--horizon", type=float)
    run.add_argument("--nx", type=int)
    run.add_argument("--nt", type=int)
    run.add_argument("--k", type=int)
    run.add_argument("--arch", choices=["centralized", "decentralized", "cooperative"])
    run.add_argument("--iter-max", dest="iter_max", type=int)
    run.add_argument("--sweep", type=_sweep_arg, help="comma-separated nx values for the gas timing sweep")
    run.add_argument("--trace", metavar="PATH")
    run.add_argument("--csv", metavar="PATH")
    run.add_argument("--svg", metavar="PATH")
    run.add_argument("--deterministic", action="store_true", default=None,
                     help="fixed compute times so outputs are byte-identical across runs")

    part = sub.add_parser("partition", help="partition a hypergraph dump")
    part.add_argument("what", choices=["report"])
    part.add_argument("graph", help="hypergraph JSON dump")
    part.add_argument("--k", type=int, required=True)

    gantt = sub.add_parser("gantt", help="render a trace as an SVG Gantt chart")
    gantt.add_argument("trace")
    gantt.add_argument("out", nargs="?")
    gantt.add_argument("--svg", metavar="PATH")
    return p


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _load_study(cfg: RunConfig):
    """Returns the study document {"spec": ..., plus study-specific keys}."""
    from .casestudies.presets import load_preset
    if cfg.spec:
        try:
            with open(cfg.spec) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read spec {cfg.spec}: {exc}") from exc
        if not isinstance(doc, dict):
            raise SpecError("spec file must hold a JSON object")
        if "study" in doc:
            if doc["study"] != cfg.study:
                raise SpecError(f"spec is for study {doc['study']!r}, not {cfg.study!r}")
            return doc
        base = load_preset(DEFAULT_PRESET[cfg.study]) if cfg.study in DEFAULT_PRESET else {}
        base["spec"] = doc
        return base
    name = cfg.preset or DEFAULT_PRESET.get(cfg.study)
    doc = load_preset(name)
    if doc["study"] != cfg.study:
        raise SpecError(f"preset {name!r} is for study {doc['study']!r}")
    return doc


def _emit_graph(cfg, graph, out):
    from .computegraph import dumps_trace, validate_trace
    from .gantt import render_gantt
    doc = graph.export_trace()
    validate_trace(json.loads(json.dumps(doc)))
    if cfg.trace:
        _write(cfg.trace, dumps_trace(doc))
        out.append(f"trace written to {cfg.trace} ({len(doc['events'])} events)")
    if cfg.svg:
        _write(cfg.svg, render_gantt(doc))
        out.append(f"gantt written to {cfg.svg}")


def run_benders(cfg, doc, out):
    from .casestudies.benders_study import VirtualArchitecture, run_benders_computegraph
    from .casestudies.resource import ResourceAllocationSpec
    spec = ResourceAllocationSpec.from_dict(doc["spec"])
    arch_kw = dict(doc.get("arch", {}))
    if cfg.workers is not None:
        arch_kw["workers"] = cfg.workers
    if cfg.delay is not None:
        arch_kw["delay"] = cfg.delay
    if cfg.deterministic:
        for key, v in FIXED_TAU.items():
            if arch_kw.get(key, "walltime") == "walltime":
                arch_kw[key] = v
    try:
        arch = VirtualArchitecture(**arch_kw)
    except TypeError as exc:
        raise SpecError(f"bad architecture: {exc}") from exc
    res = run_benders_computegraph(spec, arch, horizon=cfg.horizon)
    out.append(f"status {res.status}")
    out.append(f"objective {res.objective!r}")
    out.append(f"rounds {res.rounds}")
    out.append(f"workers {arch.workers} delay {arch.edge_delay!r}")
    out.append(f"makespan {res.makespan!r}")
    if cfg.csv:
        _write(cfg.csv, res.state.to_csv())
        out.append(f"iteration log written to {cfg.csv}")
    _emit_graph(cfg, res.graph, out)


def run_mpc_study(cfg, doc, out):
    from .casestudies.mpc import run_mpc
    from .casestudies.reactor import ReactorSpec
    spec = ReactorSpec.from_dict(doc["spec"])
    arch = cfg.arch or doc.get("architecture", "cooperative")
    horizon = cfg.horizon if cfg.horizon is not None else doc.get("horizon", 5000.0)
    res = run_mpc(spec, arch, horizon, cfg.iter_max)
    out.append(f"architecture {arch}")
    out.append(f"status {res.status}")
    out.append(f"controller solves {res.solves}")
    out.append(f"initial error {res.initial_error!r}")
    out.append(f"final error {res.final_error!r}")
    if cfg.csv:
        _write(cfg.csv, res.to_csv())
        out.append(f"state series written to {cfg.csv}")
    _emit_graph(cfg, res.graph, out)


def run_gas(cfg, doc, out):
    from .casestudies.gas import GasNetworkSpec, gas_structure_report, scaling_exponent
    spec = GasNetworkSpec.from_dict(doc["spec"])
    if cfg.nx is not None or cfg.nt is not None:
        spec = spec.with_mesh(cfg.nx, cfg.nt)
    k = cfg.k if cfg.k is not None else doc.get("k", 13)
    sweep = cfg.sweep if cfg.sweep is not None else doc.get("sweep")
    rep = gas_structure_report(spec, k, sweep={"nxs": tuple(sweep)} if sweep else None)
    out.append(rep.to_text().rstrip("\n"))
    if rep.timings and len(rep.timings) > 1:
        out.append(f"schur exponent {scaling_exponent(rep.timings, 3):.3f}")
        out.append(f"direct exponent {scaling_exponent(rep.timings, 4):.3f}")
    if cfg.csv:
        lines = ["nx,nt,kkt_size,t_schur,t_direct"]
        lines += [",".join(repr(v) for v in row) for row in rep.timings]
        _write(cfg.csv, "\n".join(lines) + "\n")
        out.append(f"timing table written to {cfg.csv}")


def run_workflow(cfg, doc, out):
    from .computegraph import series_csv, three_node_workflow
    compute = (1.0, 1.0, 2.0) if cfg.deterministic else ("walltime", "walltime", 2.0)
    g = three_node_workflow(compute)
    horizon = cfg.horizon if cfg.horizon is not None else 20.0
    status = g.execute(horizon)
    out.append(f"status {status}")
    for n in g.nodes:
        vals = " ".join(f"{a}={n.value(a)!r}" for a in n.attributes)
        out.append(f"{n.name}: {vals}")
    if cfg.csv:
        _write(cfg.csv, series_csv(g.state_series("n3", "z")))
        out.append(f"n3.z series written to {cfg.csv}")
    _emit_graph(cfg, g, out)


def demo_graph():
    """Three nodes, one scalar x each, joined by x1 + x2 + x3 = 0."""
    from .modelgraph import ComponentModel, ModelGraph
    mg = ModelGraph()
    n1, n2, n3 = mg.add_node(), mg.add_node(), mg.add_node()
    m1 = ComponentModel("node_model_1")
    x = m1.add_variable("x", start=1.0)
    m1.set_objective((x - 1) * (x - 1))
    m2 = ComponentModel("node_model_2")
    x, y = m2.add_variable("x"), m2.add_variable("y")
    m2.add_equality(x + y, 2.0)
    m2.set_objective(x * x + (y - 3) * (y - 3))
    m3 = ComponentModel("node_model_3")
    x = m3.add_variable("x")
    m3.set_objective(2 * (x + 4) * (x + 4))
    for n, m in ((n1, m1), (n2, m2), (n3, m3)):
        mg.set_model(n, m)
    mg.add_link_constraint([(n1, "x", 1.0), (n2, "x", 1.0), (n3, "x", 1.0)], 0.0)
    return mg, (n1, n2, n3)


def cmd_demo_modelgraph(dump=None, out=print):
    from .solvers import newton_kkt
    mg, nodes = demo_graph()
    flat = mg.aggregate()
    sol = newton_kkt(flat)
    total = 0.0
    for n in nodes:
        vals = sol.by_node[n]
        total += vals["x"]
        out(f"node {n}: " + " ".join(f"{k}={v:.10g}" for k, v in vals.items()))
    out(f"sum of x = {total:.3e}")
    out(f"newton iterations {sol.iterations}, residual {sol.residual:.3e}")
    if dump:
        _write(dump, flat.to_text())
        out(f"flattened problem written to {dump}")
    return EXIT_OK


def cmd_partition_report(path, k, out=print):
    from .hypergraph import loads, partition
    try:
        with open(path) as fh:
            g = loads(fh.read())
    except OSError as exc:
        raise SpecError(f"cannot read graph {path}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise SpecError(f"malformed graph dump {path}: {exc}") from exc
    part = partition(g, k)
    out(f"nodes {g.num_nodes()} edges {len(g.all_edges())} k {k}")
    for i, nodes in enumerate(part.parts()):
        out(f"part {i}: {nodes}")
    out(f"cut edges {len(part.cut_edges)}: {part.cut_edges}")
    return EXIT_OK


def cmd_gantt(trace_path, svg_path, out=print):
    from .computegraph import load_trace
    from .gantt import render_gantt
    doc = load_trace(trace_path)
    _write(svg_path, render_gantt(doc))
    out(f"gantt written to {svg_path}")
    return EXIT_OK


def cmd_run(cfg: RunConfig, out=print):
    if cfg.study not in STUDIES:
        raise SpecError(f"unknown study {cfg.study!r}")
    doc = _load_study(cfg) if cfg.study != "workflow" else {}
    lines = []
    {"benders": run_benders, "mpc": run_mpc_study, "gas": run_gas,
     "workflow": run_workflow}[cfg.study](cfg, doc, lines)
    for line in lines:
        out(line)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "demo":
            return cmd_demo_modelgraph(args.dump)
        if args.command == "partition":
            return cmd_partition_report(args.graph, args.k)
        if args.command == "gantt":
            target = args.svg or args.out
            if not target:
                parser.print_usage(sys.stderr)
                print("graphsys gantt: an output SVG path is required", file=sys.stderr)
                return EXIT_USAGE
            return cmd_gantt(args.trace, target)
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        cfg.study = args.study
        for f in fields(RunConfig):
            if f.name in ("command", "study"):
                continue
            v = getattr(args, f.name, None)
            if v is not None:
                cfg.set(f.name, v)
        if cfg.preset and cfg.spec:
            raise SpecError("use either --preset or --spec, not both")
        return cmd_run(cfg)
    except (SpecError, BadTrace, BadK) as exc:
        print(f"graphsys: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (GraphSysError, OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"graphsys: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
