"""Bounded-variable revised simplex on sparse columns.

Two-phase method: artificial columns give a trivially factorizable starting
basis; phase 1 drives their sum to zero, phase 2 optimizes the real
objective. The basis inverse is kept as a sparse LU factorization (SuperLU)
plus a product-form eta file, refactorized every ``REFACTOR_EVERY`` pivots.
Pricing is Dantzig (most violating reduced cost) with a Bland fallback once
degeneracy stalls progress.

The entry point is :func:`solve_lp`, which accepts any :class:`~temgrid.model.MilpModel`
and ignores its complementarity pairs (the branching layer owns those).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ..domain import NumericalBreakdown, SolverOptions
from ..model import GE, LE, MilpModel
from . import kernels

__all__ = ["LpSolution", "solve_lp", "REFACTOR_EVERY"]

REFACTOR_EVERY = 100
PIVOT_TOL = 1e-9
DEGENERATE_STEP = 1e-9
BLAND_AFTER = 50

# nonbasic statuses
BASIC, AT_LOWER, AT_UPPER, FREE = 0, 1, 2, 3


@dataclass(frozen=True)
class LpSolution:
    """Outcome of one linear-program solve.

    ``values`` covers the structural variables of the model; ``dual_values``
    carries one multiplier per constraint row. ``certificate`` names the
    offending rows when infeasible, or the unbounded direction.
    """

    status: str  # "optimal" | "infeasible" | "unbounded"
    objective_value: float
    values: np.ndarray
    dual_values: np.ndarray
    dual_objective: float = np.nan
    iterations: int = 0
    certificate: dict = field(default_factory=dict)

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Mutable solver state over the equality form [A | slacks | artificials]."""

    def __init__(self, model: MilpModel, options: SolverOptions):
        self.opt = options
        m, n = model.A.shape
        self.m, self.n_struct = m, n

        slack_lo = np.where(model.rel == LE, 0.0, np.where(model.rel == GE, -np.inf, 0.0))
        slack_hi = np.where(model.rel == LE, np.inf, 0.0)
        self.lb = np.concatenate([model.lb, slack_lo, np.zeros(m)])
        self.ub = np.concatenate([model.ub, slack_hi, np.full(m, np.inf)])
        self.b = model.b.astype(float)

        # nonbasic start: every finite-bounded column rests at a bound
        x = np.where(np.isfinite(self.lb), self.lb, np.where(np.isfinite(self.ub), self.ub, 0.0))
        x[n + m :] = 0.0
        struct_slack = sparse.hstack([model.A, sparse.eye(m, format="csc")], format="csc")
        resid = self.b - struct_slack @ x[: n + m]
        art_sign = np.where(resid < 0, -1.0, 1.0)
        art = sparse.diags(art_sign, format="csc")
        self.A = sparse.hstack([struct_slack, art], format="csc")
        self.AT = self.A.T.tocsr()
        x[n + m :] = np.abs(resid)

        self.x = x
        self.n_total = n + 2 * m
        self.art_slice = slice(n + m, self.n_total)
        self.status = np.full(self.n_total, AT_LOWER, dtype=np.int8)
        self.status[np.isinf(self.lb) & np.isfinite(self.ub)] = AT_UPPER
        self.status[np.isinf(self.lb) & np.isinf(self.ub)] = FREE
        self.basis = np.arange(n + m, self.n_total, dtype=np.int64)
        self.status[self.basis] = BASIC

        self.lu = None
        self.eta_pivots = np.zeros(REFACTOR_EVERY, dtype=np.int64)
        self.eta_cols = np.zeros((REFACTOR_EVERY, m))
        self.eta_count = 0
        self.iterations = 0
        self.pivot_log: deque = deque(maxlen=24)
        self._refactor()

    # -- basis inverse ----------------------------------------------------

    def _refactor(self):
        B = self.A[:, self.basis].tocsc()
        try:
            self.lu = splu(B)
        except RuntimeError as exc:  # singular basis
            raise NumericalBreakdown(f"basis factorization failed: {exc}", self.pivot_log)
        self.eta_count = 0
        # resolve basic values against the freshly factorized basis
        nb = np.flatnonzero(self.status != BASIC)
        rhs = self.b - self.A[:, nb] @ self.x[nb]
        self.x[self.basis] = self.lu.solve(rhs)

    def ftran(self, col: np.ndarray) -> np.ndarray:
        z = self.lu.solve(col)
        if not z.flags.c_contiguous:
            z = np.ascontiguousarray(z)
        kernels.eta_ftran(self.eta_pivots, self.eta_cols, self.eta_count, z)
        return z

    def btran(self, vec: np.ndarray) -> np.ndarray:
        z = np.ascontiguousarray(vec, dtype=np.float64).copy()
        kernels.eta_btran(self.eta_pivots, self.eta_cols, self.eta_count, z)
        return self.lu.solve(z, trans="T")

    # -- one simplex phase -------------------------------------------------

    def run_phase(self, c: np.ndarray, max_iter: int) -> str:
        opt_tol = self.opt.opt_tol
        degenerate_run = 0
        while True:
            if self.iterations >= max_iter:
                raise NumericalBreakdown(
                    f"iteration limit {max_iter} hit (m={self.m}, n={self.n_total})", self.pivot_log
                )
            y = self.btran(c[self.basis])
            d = c - self.AT @ y
            viol = np.zeros(self.n_total)
            at_lo = self.status == AT_LOWER
            at_up = self.status == AT_UPPER
            free = self.status == FREE
            viol[at_lo] = -d[at_lo]
            viol[at_up] = d[at_up]
            viol[free] = np.abs(d[free])
            viol[self.lb == self.ub] = 0.0  # fixed columns never enter

            if degenerate_run >= BLAND_AFTER:
                eligible = np.flatnonzero(viol > opt_tol)
                if len(eligible) == 0:
                    return "optimal"
                q = int(eligible[0])
            else:
                q = int(np.argmax(viol))
                if viol[q] <= opt_tol:
                    return "optimal"

            sigma = 1 if (self.status[q] == AT_LOWER or (self.status[q] == FREE and d[q] < 0)) else -1
            col = np.zeros(self.m)
            lo, hi = self.A.indptr[q], self.A.indptr[q + 1]
            col[self.A.indices[lo:hi]] = self.A.data[lo:hi]
            w = self.ftran(col)

            gap = self.ub[q] - self.lb[q]
            step_cap = gap if np.isfinite(gap) else np.inf
            t, pos, to_upper = kernels.ratio_test(
                self.x[self.basis], self.lb[self.basis], self.ub[self.basis], w, sigma, step_cap, PIVOT_TOL
            )
            self.iterations += 1

            if pos == kernels.LEAVE_UNBOUNDED:
                self._ray = (q, sigma)
                return "unbounded"

            self.x[self.basis] -= (sigma * t) * w
            self.x[q] += sigma * t
            degenerate_run = 0 if t > DEGENERATE_STEP else degenerate_run + 1

            if pos == kernels.LEAVE_NONE:
                # bound flip, basis unchanged
                self.status[q] = AT_UPPER if self.status[q] == AT_LOWER else AT_LOWER
                self.pivot_log.append((self.iterations, q, -1, float(t), 0.0))
                continue

            leaving = int(self.basis[pos])
            self.status[leaving] = AT_UPPER if to_upper else AT_LOWER
            self.x[leaving] = self.ub[leaving] if to_upper else self.lb[leaving]
            self.basis[pos] = q
            self.status[q] = BASIC
            self.pivot_log.append((self.iterations, q, leaving, float(t), float(w[pos])))

            if abs(w[pos]) < PIVOT_TOL:
                raise NumericalBreakdown(f"pivot {w[pos]:.3e} below tolerance", self.pivot_log)
            if self.eta_count >= REFACTOR_EVERY:
                self._refactor()
            else:
                self.eta_pivots[self.eta_count] = pos
                self.eta_cols[self.eta_count] = w
                self.eta_count += 1


def solve_lp(model: MilpModel, options: SolverOptions | None = None) -> LpSolution:
    """Solve the linear relaxation of ``model`` (complementarity pairs ignored)."""
    options = options or SolverOptions()
    tab = _Tableau(model, options)
    m, n = tab.m, tab.n_struct
    max_iter = 10000 + 30 * (tab.n_total + m)

    scale = 1.0 + float(np.abs(tab.b).max(initial=0.0))
    c1 = np.zeros(tab.n_total)
    c1[tab.art_slice] = 1.0
    if tab.x[tab.art_slice].sum() > options.feas_tol * scale:
        status = tab.run_phase(c1, max_iter)
        if status != "optimal":  # phase 1 is bounded below by zero
            raise NumericalBreakdown("phase 1 terminated abnormally", tab.pivot_log)
        art_total = float(tab.x[tab.art_slice].sum())
        if art_total > options.feas_tol * scale:
            bad = np.flatnonzero(tab.x[tab.art_slice] > options.feas_tol) if m else np.array([])
            return LpSolution(
                status="infeasible",
                objective_value=np.nan,
                values=tab.x[:n].copy(),
                dual_values=np.zeros(m),
                iterations=tab.iterations,
                certificate={"infeasible_rows": [model.row_names[i] for i in bad]},
            )
    # artificials may linger in the basis at value zero; pin them there
    tab.lb[tab.art_slice] = 0.0
    tab.ub[tab.art_slice] = 0.0

    c2 = np.concatenate([model.c, np.zeros(2 * m)])
    status = tab.run_phase(c2, max_iter)
    if status == "unbounded":
        q, sigma = tab._ray
        name = model.catalog.var_name(q) if q < n else f"slack_{q - n}"
        return LpSolution(
            status="unbounded",
            objective_value=-np.inf,
            values=tab.x[:n].copy(),
            dual_values=np.zeros(m),
            iterations=tab.iterations,
            certificate={"ray": {"column": name, "direction": sigma}},
        )

    # clean restatement of the optimum from a fresh factorization
    tab._refactor()
    y = tab.btran(c2[tab.basis])
    d = c2 - tab.AT @ y
    x = tab.x
    residual = float(np.abs(model.A @ x[:n] + x[n : n + m] - tab.b).max(initial=0.0))
    bound_slip = float(
        max(np.max(tab.lb - x, initial=0.0), np.max(x - tab.ub, initial=0.0))
    )
    if residual > options.feas_tol * scale or bound_slip > options.feas_tol * scale:
        raise NumericalBreakdown(
            f"optimal basis fails feasibility recheck (residual {residual:.2e}, bound slip {bound_slip:.2e})",
            tab.pivot_log,
        )

    finite_lo = (tab.status == AT_LOWER) & np.isfinite(tab.lb)
    finite_up = (tab.status == AT_UPPER) & np.isfinite(tab.ub)
    dual_obj = float(y @ tab.b + d[finite_lo] @ tab.lb[finite_lo] + d[finite_up] @ tab.ub[finite_up])

    objective = float(model.c @ x[:n]) + model.obj_constant
    return LpSolution(
        status="optimal",
        objective_value=objective,
        values=x[:n].copy(),
        dual_values=y,
        dual_objective=dual_obj + model.obj_constant,
        iterations=tab.iterations,
    )
