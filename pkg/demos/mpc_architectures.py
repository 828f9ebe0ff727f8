"""Compare centralized, decentralized and cooperative MPC on the reactor plant.

Writes one state CSV per architecture (mpc_<arch>.csv).
"""
from graphsys.casestudies import ReactorSpec, run_mpc

spec = ReactorSpec()
horizon = 5000.0
for arch in ("centralized", "decentralized", "cooperative"):
    run = run_mpc(spec, arch, horizon)
    with open(f"mpc_{arch}.csv", "w") as fh:
        fh.write(run.to_csv())
    errs = run.errors()
    # last committed error at or before each mark
    trail = ", ".join(f"t={m:.0f}: {[e for t, e in errs if t <= m][-1]:.1f}"
                      for m in (600.0, 1800.0, 3600.0))
    print(f"{arch:13s} solves {run.solves:4d}  final error {run.final_error:9.3f}  {trail}")
print(f"initial error {run.initial_error:.1f}")
