from .kkt import (BlockKKT, KKTSolution, KKTStep, NodeKKT, assemble_kkt, newton_kkt,
                  solve_block)
from .linalg import lu_solve
from .simplex import EQ, GE, LE, LinearProgram, LPSolution, simplex_solve

__all__ = ["BlockKKT", "KKTSolution", "KKTStep", "NodeKKT", "assemble_kkt", "newton_kkt",
           "solve_block", "lu_solve", "LinearProgram", "LPSolution", "simplex_solve",
           "LE", "EQ", "GE"]
