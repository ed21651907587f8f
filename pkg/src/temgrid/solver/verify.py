"""Independent re-check of a solved dispatch against its model.

Nothing here reuses solver state: rows, bounds and complementarity pairs are
re-evaluated directly from the model arrays, grouped by constraint family
(balance, ev, bs, community) so a violation points at the subsystem that
produced it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..domain import SolverOptions
from ..model import EQ, GE, LE, MilpModel

__all__ = ["VerifyReport", "verify"]


@dataclass(frozen=True)
class VerifyReport:
    max_residual_by_family: dict[str, float]
    worst_row_by_family: dict[str, str]
    bound_violation_kw: float
    complementarity_kw: float
    flagged_families: tuple[str, ...]
    tolerance: float
    comp_tolerance: float

    @property
    def ok(self) -> bool:
        return not self.flagged_families

    def lines(self) -> list[str]:
        out = []
        for fam in sorted(self.max_residual_by_family):
            res = self.max_residual_by_family[fam]
            mark = "FAIL" if fam in self.flagged_families else "ok"
            out.append(f"{fam:<10} max residual {res:.3e} ({self.worst_row_by_family[fam]}) [{mark}]")
        out.append(f"bounds     max violation {self.bound_violation_kw:.3e}"
                   + (" [FAIL]" if "bounds" in self.flagged_families else " [ok]"))
        out.append(f"pairs      max simultaneous flow {self.complementarity_kw:.3e}"
                   + (" [FAIL]" if "complementarity" in self.flagged_families else " [ok]"))
        return out


def verify(model: MilpModel, solution, options: SolverOptions | None = None) -> VerifyReport:
    """Re-check every row, bound and pair; violations become report content."""
    options = options or SolverOptions()
    x = np.asarray(getattr(solution, "values", solution), dtype=float)
    tol = max(options.feas_tol * 10.0, 1e-9)

    lhs = model.A @ x
    gap = lhs - model.b
    residual = np.where(
        model.rel == EQ, np.abs(gap), np.where(model.rel == LE, np.maximum(gap, 0.0), np.maximum(-gap, 0.0))
    )
    by_family: dict[str, float] = {}
    worst_row: dict[str, str] = {}
    for fam in dict.fromkeys(model.row_families):
        idx = [i for i, f in enumerate(model.row_families) if f == fam]
        sub = residual[idx]
        k = int(np.argmax(sub))
        by_family[fam] = float(sub[k])
        worst_row[fam] = model.row_names[idx[k]]

    bound_violation = float(
        max(np.max(model.lb - x, initial=0.0), np.max(x - model.ub, initial=0.0))
    )
    comp = 0.0
    if len(model.comp_pairs):
        comp = float(np.minimum(x[model.comp_pairs[:, 0]], x[model.comp_pairs[:, 1]]).max(initial=0.0))

    flagged = tuple(
        [f for f, r in by_family.items() if r > tol]
        + (["bounds"] if bound_violation > tol else [])
        + (["complementarity"] if comp > options.comp_tol else [])
    )
    return VerifyReport(
        max_residual_by_family=by_family,
        worst_row_by_family=worst_row,
        bound_violation_kw=bound_violation,
        complementarity_kw=comp,
        flagged_families=flagged,
        tolerance=tol,
        comp_tolerance=options.comp_tol,
    )
