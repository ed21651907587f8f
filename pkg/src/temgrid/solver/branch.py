"""Lazy complementarity enforcement by branch and bound.

Under sane tariffs the LP relaxation already respects every
no-simultaneous-flow pair (round trips lose money), so the root LP is
usually the answer. When a pair is violated, the search branches on the
most-violated one by fixing either side to zero, exploring nodes best-first
by their LP bound. Deterministic: ties break on node creation order.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import replace

import numpy as np

from ..domain import SolverLimitError, SolverOptions
from ..model import MilpModel
from .extract import DispatchSolution, extract_solution
from .simplex import LpSolution, solve_lp

__all__ = ["solve"]


def _violated_pairs(model: MilpModel, x: np.ndarray, comp_tol: float) -> np.ndarray:
    if not len(model.comp_pairs):
        return np.empty(0, dtype=np.int64)
    both = np.minimum(x[model.comp_pairs[:, 0]], x[model.comp_pairs[:, 1]])
    return np.flatnonzero(both > comp_tol)


def solve(model: MilpModel, options: SolverOptions | None = None) -> DispatchSolution:
    """Optimize ``model`` and enforce all complementarity pairs.

    Returns the dispatch with status ``optimal``, or ``limit`` when the node
    or time budget ran out with an incumbent in hand. With no incumbent at
    the limit a :class:`SolverLimitError` is raised.
    """
    options = options or (model.scenario.options if model.scenario is not None else SolverOptions())
    started = time.monotonic()

    def out_of_time() -> bool:
        return options.time_limit_seconds is not None and time.monotonic() - started > options.time_limit_seconds

    root = solve_lp(model, options)
    if root.status == "infeasible":
        raise SolverLimitError(f"model is infeasible: {root.certificate.get('infeasible_rows', [])[:5]}")
    if root.status == "unbounded":
        raise SolverLimitError(f"model is unbounded along {root.certificate.get('ray')}")

    incumbent: LpSolution | None = None
    lp_iterations = root.iterations
    explored = 0

    # heap of (bound, tie, fixed-variable tuple); children re-solve from scratch
    heap: list[tuple[float, int, tuple[int, ...]]] = []
    counter = 0
    violated = _violated_pairs(model, root.values, options.comp_tol)
    if len(violated) == 0:
        incumbent = root
    else:
        heapq.heappush(heap, (root.objective_value, counter, ()))
        # dive for an incumbent: zero the smaller side of every violated pair
        # and re-solve until clean; ties with the root bound prune the tree
        dive = root
        dive_fixes: tuple[int, ...] = ()
        for _ in range(len(model.comp_pairs)):
            if explored >= options.max_nodes or out_of_time():
                break
            pairs = model.comp_pairs[violated]
            smaller = np.where(dive.values[pairs[:, 0]] <= dive.values[pairs[:, 1]], pairs[:, 0], pairs[:, 1])
            dive_fixes = dive_fixes + tuple(int(j) for j in smaller)
            ub = model.ub.copy()
            ub[list(dive_fixes)] = 0.0
            dive = solve_lp(replace(model, ub=ub), options)
            explored += 1
            lp_iterations += dive.iterations
            if dive.status != "optimal":
                break
            violated = _violated_pairs(model, dive.values, options.comp_tol)
            if len(violated) == 0:
                incumbent = dive
                break

    status = "optimal"
    while heap:
        if explored >= options.max_nodes or out_of_time():
            status = "limit"
            break
        bound, _, fixes = heapq.heappop(heap)
        if incumbent is not None and bound >= incumbent.objective_value - options.opt_tol:
            continue
        ub = model.ub.copy()
        ub[list(fixes)] = 0.0
        node_model = replace(model, ub=ub)
        sol = solve_lp(node_model, options)
        explored += 1
        lp_iterations += sol.iterations
        if sol.status != "optimal":
            continue
        if incumbent is not None and sol.objective_value >= incumbent.objective_value - options.opt_tol:
            continue
        violated = _violated_pairs(model, sol.values, options.comp_tol)
        if len(violated) == 0:
            incumbent = sol
            continue
        pairs = model.comp_pairs[violated]
        worst = int(np.argmax(np.minimum(sol.values[pairs[:, 0]], sol.values[pairs[:, 1]])))
        for side in (0, 1):
            counter += 1
            heapq.heappush(heap, (sol.objective_value, counter, fixes + (int(pairs[worst, side]),)))

    if incumbent is None:
        raise SolverLimitError(
            f"no complementarity-feasible dispatch within {explored} nodes"
            + (" (time limit)" if out_of_time() else "")
        )
    return extract_solution(
        model,
        incumbent,
        status=status,
        branch_nodes=explored,
        lp_iterations=lp_iterations,
        comp_tol=options.comp_tol,
    )
