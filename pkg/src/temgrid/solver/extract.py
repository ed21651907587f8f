"""From raw LP variable values to a dispatch with per-building costs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import CommunityScenario
from ..ev_contract import ledger_from_powers, session_revenue
from ..model import MilpModel
from .simplex import LpSolution

__all__ = ["BuildingDispatch", "DispatchSolution", "extract_solution"]


@dataclass(frozen=True)
class BuildingDispatch:
    """Solved per-step powers (kW) and settled costs (EUR) of one building."""

    name: str
    ev_charge_kw: np.ndarray  # (sessions, steps)
    ev_discharge_kw: np.ndarray
    bs_charge_kw: np.ndarray
    bs_discharge_kw: np.ndarray
    soc: np.ndarray  # end-of-step state of charge, fractions
    comm_export_kw: np.ndarray
    comm_import_kw: np.ndarray
    grid_import_kw: np.ndarray
    grid_export_kw: np.ndarray
    electricity_cost_eur: float
    ev_revenue_eur: float

    @property
    def objective_eur(self) -> float:
        return self.electricity_cost_eur - self.ev_revenue_eur

    @property
    def net_grid_kw(self) -> np.ndarray:
        return self.grid_import_kw - self.grid_export_kw


@dataclass(frozen=True)
class DispatchSolution:
    """Community-wide dispatch for one run mode.

    ``values`` keeps the raw variable vector so the verifier can re-check the
    model row by row; ``buildings`` carries the readable per-building view.
    """

    mode: str
    status: str  # "optimal" | "limit"
    objective_eur: float
    buildings: tuple[BuildingDispatch, ...]
    values: np.ndarray
    dual_values: np.ndarray
    branch_nodes: int
    lp_iterations: int
    max_complementarity_kw: float

    @property
    def electricity_cost_eur(self) -> float:
        return sum(b.electricity_cost_eur for b in self.buildings)

    @property
    def ev_revenue_eur(self) -> float:
        return sum(b.ev_revenue_eur for b in self.buildings)


def extract_solution(
    model: MilpModel,
    lp: LpSolution,
    status: str,
    branch_nodes: int,
    lp_iterations: int,
    comp_tol: float,
) -> DispatchSolution:
    cat = model.catalog
    scenario: CommunityScenario = model.scenario
    x = lp.values
    H = cat.steps
    dt = cat.step_hours
    verbatim = scenario.options.eq2_verbatim

    buildings = []
    for b, bld in enumerate(scenario.buildings):
        n_ev = len(bld.sessions)
        evc = np.array([[x[cat.ev_charge(b, n, h)] for h in range(H)] for n in range(n_ev)]).reshape(n_ev, H)
        evd = np.array([[x[cat.ev_discharge(b, n, h)] for h in range(H)] for n in range(n_ev)]).reshape(n_ev, H)
        bsc = np.array([x[cat.bs_charge(b, h)] for h in range(H)])
        bsd = np.array([x[cat.bs_discharge(b, h)] for h in range(H)])
        soc = np.array([x[cat.soc(b, h)] for h in range(H)])
        cex = np.array([x[cat.comm_export(b, h)] for h in range(H)])
        cim = np.array([x[cat.comm_import(b, h)] for h in range(H)])
        if verbatim:
            net = (
                bld.net_load.deficit_kw
                - bld.net_load.surplus_kw
                + bsc
                - bsd
                + evc.sum(axis=0)
                - evd.sum(axis=0)
                + cex
                - cim
            )
            gim = np.maximum(net, 0.0)
            gex = np.maximum(-net, 0.0)
        else:
            gim = np.array([x[cat.grid_import(b, h)] for h in range(H)])
            gex = np.array([x[cat.grid_export(b, h)] for h in range(H)])

        electricity = _electricity_cost(model, bld, gim, gex, cim, cex, bsc, bsd, evc, evd, dt)
        revenue = 0.0
        if model.mode != "baseline":
            for n, ses in enumerate(bld.sessions):
                ledger = ledger_from_powers(ses, evc[n], evd[n], scenario.time)
                revenue += session_revenue(ses, ledger, scenario.tariffs, scenario.time)
        buildings.append(
            BuildingDispatch(
                name=bld.name,
                ev_charge_kw=evc,
                ev_discharge_kw=evd,
                bs_charge_kw=bsc,
                bs_discharge_kw=bsd,
                soc=soc,
                comm_export_kw=cex,
                comm_import_kw=cim,
                grid_import_kw=gim,
                grid_export_kw=gex,
                electricity_cost_eur=electricity,
                ev_revenue_eur=revenue,
            )
        )

    worst_pair = 0.0
    if len(model.comp_pairs):
        worst_pair = float(
            np.minimum(x[model.comp_pairs[:, 0]], x[model.comp_pairs[:, 1]]).max(initial=0.0)
        )
    return DispatchSolution(
        mode=model.mode,
        status=status,
        objective_eur=lp.objective_value,
        buildings=tuple(buildings),
        values=x.copy(),
        dual_values=lp.dual_values.copy(),
        branch_nodes=branch_nodes,
        lp_iterations=lp_iterations,
        max_complementarity_kw=worst_pair,
    )


def _electricity_cost(model, bld, gim, gex, cim, cex, bsc, bsd, evc, evd, dt) -> float:
    """Settle one building's energy bill at the scenario tariffs."""
    tar = model.scenario.tariffs
    c_ig = tar.grid_import_eur_per_kwh
    c_eg = tar.grid_export_eur_per_kwh
    c_ic = model.prices.import_eur_per_kwh
    c_ec = model.prices.export_eur_per_kwh
    if model.scenario.options.eq2_verbatim:
        imp_residual = bld.net_load.deficit_kw - cim - bsd - evd.sum(axis=0)
        exp_residual = bld.net_load.surplus_kw - cex - bsc - evc.sum(axis=0)
        per_step = cim * c_ic + cex * c_ec + imp_residual * c_ig + exp_residual * c_eg
    else:
        per_step = gim * c_ig + gex * c_eg + cim * c_ic + cex * c_ec
    return float(dt * per_step.sum())
