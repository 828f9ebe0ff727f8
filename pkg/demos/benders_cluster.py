"""Benders on a simulated cluster: makespan against worker count.

Compute times are fixed so the table is reproducible; walltime mode would
measure the actual LP solves instead.
"""
from graphsys.casestudies import (ResourceAllocationSpec, VirtualArchitecture, load_preset,
                                  run_benders_computegraph, solve_extensive)

spec = ResourceAllocationSpec(**load_preset("paper-benders")["spec"])
print(f"{len(spec.scenarios)} scenarios, extensive-form optimum {solve_extensive(spec).objective:.6f}")
print("workers  rounds  objective   makespan")
for n in (1, 2, 4, 8, 16):
    arch = VirtualArchitecture(workers=n, delay=0.005, tau_master=0.01, tau_sub=0.003)
    run = run_benders_computegraph(spec, arch)
    print(f"{n:7d}  {run.rounds:6d}  {run.objective:.6f}  {run.makespan:.4f}")
# one worker shares the master's machine and pays no transfer delay, which is
# why it beats four remote workers here
