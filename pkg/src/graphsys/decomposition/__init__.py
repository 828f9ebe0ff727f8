from .benders import BendersMaster, BendersState, Cut, benders_solve, solve_scenario
from .lagrangian import LagrangianSolution, LagrangianState, default_step, lagrangian_solve
from .partition import apply_partition

__all__ = ["BendersMaster", "BendersState", "Cut", "benders_solve", "solve_scenario",
           "LagrangianSolution", "LagrangianState", "default_step", "lagrangian_solve",
           "apply_partition"]
