"""Result artifacts: cost breakdown table, dispatch and price CSV exports.

The cost table mirrors how community studies are usually reported: one row
per building with the baseline bill, then electricity cost, EV contract
revenue and net objective for the individual and community runs, plus totals
and percentage savings. All costs are recomputed from the raw dispatch and
cross-checked against the solver objective before anything is written.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .solver.extract import DispatchSolution
from .tariffs import CommunityPrices

__all__ = ["ModeCosts", "CostBreakdown", "summarize", "export_dispatch_csv", "export_prices_csv"]

#: allowed drift between solver objective and the recomputed cost breakdown
RECONCILE_TOL = 1e-6


@dataclass(frozen=True)
class ModeCosts:
    electricity_eur: float
    ev_revenue_eur: float

    @property
    def objective_eur(self) -> float:
        return self.electricity_eur - self.ev_revenue_eur


@dataclass(frozen=True)
class BuildingCosts:
    name: str
    baseline_electricity_eur: float
    individual: ModeCosts
    community: ModeCosts


@dataclass(frozen=True)
class CostBreakdown:
    """Per-building and total costs for the three runs, with savings deltas."""

    buildings: tuple[BuildingCosts, ...]
    total: BuildingCosts

    @property
    def electricity_saving_vs_individual_pct(self) -> float:
        ind = self.total.individual.electricity_eur
        return 100.0 * (ind - self.total.community.electricity_eur) / abs(ind) if ind else 0.0

    @property
    def objective_saving_vs_individual_pct(self) -> float:
        ind = self.total.individual.objective_eur
        return 100.0 * (ind - self.total.community.objective_eur) / abs(ind) if ind else 0.0

    @property
    def electricity_saving_vs_baseline_pct(self) -> float:
        base = self.total.baseline_electricity_eur
        return 100.0 * (base - self.total.community.electricity_eur) / abs(base) if base else 0.0

    @property
    def objective_saving_vs_baseline_pct(self) -> float:
        """Headline saving: community objective (EV revenue included) vs baseline bill."""
        base = self.total.baseline_electricity_eur
        return 100.0 * (base - self.total.community.objective_eur) / abs(base) if base else 0.0

    def to_dict(self) -> dict:
        def row(bc: BuildingCosts) -> dict:
            return {
                "baseline_electricity_eur": bc.baseline_electricity_eur,
                "individual": {
                    "electricity_eur": bc.individual.electricity_eur,
                    "ev_revenue_eur": bc.individual.ev_revenue_eur,
                    "objective_eur": bc.individual.objective_eur,
                },
                "community": {
                    "electricity_eur": bc.community.electricity_eur,
                    "ev_revenue_eur": bc.community.ev_revenue_eur,
                    "objective_eur": bc.community.objective_eur,
                },
            }

        return {
            "buildings": {bc.name: row(bc) for bc in self.buildings},
            "total": row(self.total),
            "savings_pct": {
                "electricity_community_vs_individual": self.electricity_saving_vs_individual_pct,
                "objective_community_vs_individual": self.objective_saving_vs_individual_pct,
                "electricity_community_vs_baseline": self.electricity_saving_vs_baseline_pct,
                "objective_community_vs_baseline": self.objective_saving_vs_baseline_pct,
            },
        }

    def to_text(self) -> str:
        head = (
            f"{'building':<12}{'base CE':>10} | {'ind CE':>10}{'ind CEV':>10}{'ind obj':>10}"
            f" | {'com CE':>10}{'com CEV':>10}{'com obj':>10}"
        )
        lines = [head, "-" * len(head)]
        for bc in list(self.buildings) + [self.total]:
            lines.append(
                f"{bc.name:<12}{bc.baseline_electricity_eur:>10.2f} |"
                f"{bc.individual.electricity_eur:>11.2f}{-bc.individual.ev_revenue_eur:>10.2f}"
                f"{bc.individual.objective_eur:>10.2f} |"
                f"{bc.community.electricity_eur:>11.2f}{-bc.community.ev_revenue_eur:>10.2f}"
                f"{bc.community.objective_eur:>10.2f}"
            )
        lines.append("")
        lines.append(
            f"community vs individual: electricity {self.electricity_saving_vs_individual_pct:+.2f} %, "
            f"objective {self.objective_saving_vs_individual_pct:+.2f} %"
        )
        lines.append(
            f"community vs baseline:   electricity {self.electricity_saving_vs_baseline_pct:+.2f} %, "
            f"objective (EV revenue included) {self.objective_saving_vs_baseline_pct:+.2f} %"
        )
        return "\n".join(lines)


def _reconcile(sol: DispatchSolution):
    recomputed = sol.electricity_cost_eur - sol.ev_revenue_eur
    drift = abs(recomputed - sol.objective_eur)
    if drift > RECONCILE_TOL * max(1.0, abs(sol.objective_eur)):
        raise AssertionError(
            f"{sol.mode}: cost breakdown {recomputed:.8f} disagrees with solver objective "
            f"{sol.objective_eur:.8f} by {drift:.2e}"
        )


def summarize(
    baseline: DispatchSolution,
    individual: DispatchSolution,
    community: DispatchSolution,
    prices: CommunityPrices,
) -> CostBreakdown:
    """Cross-checked cost table over the three runs of one scenario."""
    for sol, mode in ((baseline, "baseline"), (individual, "individual"), (community, "community")):
        if sol.mode != mode:
            raise ValueError(f"expected a {mode} solution, got {sol.mode}")
        _reconcile(sol)
    names = [b.name for b in baseline.buildings]
    if names != [b.name for b in individual.buildings] or names != [b.name for b in community.buildings]:
        raise ValueError("solutions come from different scenarios")

    rows = []
    for bb, bi, bc in zip(baseline.buildings, individual.buildings, community.buildings):
        rows.append(
            BuildingCosts(
                name=bb.name,
                baseline_electricity_eur=bb.electricity_cost_eur,
                individual=ModeCosts(bi.electricity_cost_eur, bi.ev_revenue_eur),
                community=ModeCosts(bc.electricity_cost_eur, bc.ev_revenue_eur),
            )
        )
    total = BuildingCosts(
        name="total",
        baseline_electricity_eur=sum(r.baseline_electricity_eur for r in rows),
        individual=ModeCosts(
            sum(r.individual.electricity_eur for r in rows), sum(r.individual.ev_revenue_eur for r in rows)
        ),
        community=ModeCosts(
            sum(r.community.electricity_eur for r in rows), sum(r.community.ev_revenue_eur for r in rows)
        ),
    )
    return CostBreakdown(buildings=tuple(rows), total=total)


def export_dispatch_csv(solution: DispatchSolution, path) -> None:
    """Per-step, per-building dispatch table (kW; soc as a fraction)."""
    _reconcile(solution)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "step",
                "building",
                "net_grid_kw",
                "bs_charge_kw",
                "bs_discharge_kw",
                "ev_charge_kw",
                "ev_discharge_kw",
                "comm_export_kw",
                "comm_import_kw",
                "soc",
            ]
        )
        for b in solution.buildings:
            evc = b.ev_charge_kw.sum(axis=0) if b.ev_charge_kw.size else b.bs_charge_kw * 0.0
            evd = b.ev_discharge_kw.sum(axis=0) if b.ev_discharge_kw.size else b.bs_charge_kw * 0.0
            for h in range(len(b.bs_charge_kw)):
                w.writerow(
                    [h, b.name]
                    + [
                        f"{v:.6f}"
                        for v in (
                            b.net_grid_kw[h],
                            b.bs_charge_kw[h],
                            b.bs_discharge_kw[h],
                            evc[h],
                            evd[h],
                            b.comm_export_kw[h],
                            b.comm_import_kw[h],
                            b.soc[h],
                        )
                    ]
                )


def export_prices_csv(prices: CommunityPrices, path) -> None:
    """Community tariff series in EUR/MWh (the unit used in price reports)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "ratio", "c_ec_eur_mwh", "c_ic_eur_mwh"])
        for h in range(len(prices.surplus_ratio)):
            w.writerow(
                [
                    h,
                    f"{prices.surplus_ratio[h]:.6f}",
                    f"{prices.export_eur_per_kwh[h] * 1000.0:.6f}",
                    f"{prices.import_eur_per_kwh[h] * 1000.0:.6f}",
                ]
            )
