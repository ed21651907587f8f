"""Linear-programming engine with lazy complementarity branching."""

from .branch import solve
from .extract import BuildingDispatch, DispatchSolution
from .kernels import USING_NUMBA
from .simplex import LpSolution, solve_lp
from .verify import VerifyReport, verify

__all__ = [
    "solve",
    "solve_lp",
    "verify",
    "LpSolution",
    "DispatchSolution",
    "BuildingDispatch",
    "VerifyReport",
    "USING_NUMBA",
]
