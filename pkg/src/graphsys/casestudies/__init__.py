"""Case studies: gas network structure, Benders on a virtual cluster, reactor MPC."""
from .benders_study import (BendersRun, VirtualArchitecture, build_benders_computegraph,
                            run_benders_computegraph)
from .gas import (GasNetworkSpec, Junction, Pipeline, StructureReport, build_gas_modelgraph,
                  expected_counts, gas_structure_report, mesh_sweep, paper_network,
                  scaling_exponent)
from .mpc import (ARCHITECTURES, ControllerQP, MPCRun, build_mpc_computegraph, controller_qp,
                  run_mpc)
from .presets import PRESET_NAMES, load_preset
from .reactor import ReactorSpec, linearize, plant_rhs, simulate_plant, tracking_error
from .resource import (ResourceAllocationSpec, build_master, extensive_form, random_instance,
                       solve_benders, solve_extensive, subproblem)

__all__ = [
    "BendersRun", "VirtualArchitecture", "build_benders_computegraph", "run_benders_computegraph",
    "GasNetworkSpec", "Junction", "Pipeline", "StructureReport", "build_gas_modelgraph",
    "expected_counts", "gas_structure_report", "mesh_sweep", "paper_network", "scaling_exponent",
    "ARCHITECTURES", "ControllerQP", "MPCRun", "build_mpc_computegraph", "controller_qp", "run_mpc",
    "PRESET_NAMES", "load_preset", "ReactorSpec", "linearize", "plant_rhs", "simulate_plant",
    "tracking_error", "ResourceAllocationSpec", "build_master", "extensive_form",
    "random_instance", "solve_benders", "solve_extensive", "subproblem",
]
