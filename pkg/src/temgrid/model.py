"""Assembly of the dispatch optimization problem.

The decision vector covers, for every building and step: EV charge/discharge
per session, battery charge/discharge, community export/import, grid
import/export, and battery state of charge. The problem is linear except for
the no-simultaneous-flow rules (charge vs discharge, community export vs
import), which are kept out of the constraint matrix and registered as
complementarity pairs for the solver to enforce lazily.

Three run modes share one variable layout:
    baseline    -- every flexibility variable fixed at zero; pure net-load cost
    individual  -- EVs and batteries dispatch per building, no community trade
    community   -- adds community exchange variables, caps and the pool balance
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .domain import (
    BuildError,
    CommunityScenario,
    EVSession,
    MODES,
    validate_scenario,
)
from .tariffs import CommunityPrices

__all__ = ["VariableCatalog", "MilpModel", "build", "write_lp"]

LE, EQ, GE = -1, 0, 1  # row relations

_KINDS = (
    "ev_charge",
    "ev_discharge",
    "bs_charge",
    "bs_discharge",
    "comm_export",
    "comm_import",
    "grid_import",
    "grid_export",
    "soc",
)


@dataclass(frozen=True)
class VariableCatalog:
    """Deterministic variable layout plus per-variable bounds.

    Index order is building-major: all sessions' charge variables, then their
    discharge variables, then battery, community, grid and SoC blocks. ``soc``
    at step ``h`` is the state of charge at the end of that step.
    """

    steps: int
    step_hours: float
    building_names: tuple[str, ...]
    sessions_per_building: tuple[int, ...]
    lb: np.ndarray = field(repr=False)
    ub: np.ndarray = field(repr=False)

    _offsets: tuple[dict, ...] = field(repr=False, default=())

    @classmethod
    def layout(cls, scenario: CommunityScenario) -> "VariableCatalog":
        H = scenario.time.steps
        offsets = []
        pos = 0
        for bld in scenario.buildings:
            off = {}
            n_ev = len(bld.sessions)
            off["ev_charge"] = pos
            pos += n_ev * H
            off["ev_discharge"] = pos
            pos += n_ev * H
            for kind in _KINDS[2:]:
                off[kind] = pos
                pos += H
            offsets.append(off)
        lb = np.zeros(pos)
        ub = np.zeros(pos)
        return cls(
            steps=H,
            step_hours=scenario.time.step_hours,
            building_names=tuple(b.name for b in scenario.buildings),
            sessions_per_building=tuple(len(b.sessions) for b in scenario.buildings),
            lb=lb,
            ub=ub,
            _offsets=tuple(offsets),
        )

    @property
    def n_vars(self) -> int:
        return len(self.lb)

    @property
    def n_buildings(self) -> int:
        return len(self.building_names)

    def ev_charge(self, b: int, n: int, h: int) -> int:
        return self._offsets[b]["ev_charge"] + n * self.steps + h

    def ev_discharge(self, b: int, n: int, h: int) -> int:
        return self._offsets[b]["ev_discharge"] + n * self.steps + h

    def bs_charge(self, b: int, h: int) -> int:
        return self._offsets[b]["bs_charge"] + h

    def bs_discharge(self, b: int, h: int) -> int:
        return self._offsets[b]["bs_discharge"] + h

    def comm_export(self, b: int, h: int) -> int:
        return self._offsets[b]["comm_export"] + h

    def comm_import(self, b: int, h: int) -> int:
        return self._offsets[b]["comm_import"] + h

    def grid_import(self, b: int, h: int) -> int:
        return self._offsets[b]["grid_import"] + h

    def grid_export(self, b: int, h: int) -> int:
        return self._offsets[b]["grid_export"] + h

    def soc(self, b: int, h: int) -> int:
        return self._offsets[b]["soc"] + h

    def var_name(self, j: int) -> str:
        for b in range(self.n_buildings):
            off = self._offsets[b]
            n_ev = self.sessions_per_building[b]
            for kind in ("ev_charge", "ev_discharge"):
                base = off[kind]
                if base <= j < base + n_ev * self.steps:
                    n, h = divmod(j - base, self.steps)
                    tag = "evc" if kind == "ev_charge" else "evd"
                    return f"{tag}_{b}_{n}_{h}"
            for kind, tag in zip(_KINDS[2:], ("bsc", "bsd", "cex", "cim", "gim", "gex", "soc")):
                base = off[kind]
                if base <= j < base + self.steps:
                    return f"{tag}_{b}_{j - base}"
        raise IndexError(j)


@dataclass(frozen=True)
class MilpModel:
    """Sparse linear program plus the registry of complementarity pairs.

    minimize  c @ x + obj_constant
    s.t.      A x (<=|=|>=) b   per-row relation
              lb <= x <= ub
              min(x[i], x[j]) == 0 for every pair (i, j)
    """

    c: np.ndarray
    obj_constant: float
    A: sparse.csr_matrix
    rel: np.ndarray
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    row_names: tuple[str, ...]
    row_families: tuple[str, ...]
    comp_pairs: np.ndarray
    catalog: VariableCatalog
    mode: str
    scenario: CommunityScenario
    prices: CommunityPrices

    def __post_init__(self):
        m, n = self.A.shape
        if not (len(self.c) == len(self.lb) == len(self.ub) == n):
            raise BuildError("objective/bounds length does not match the variable count")
        if not (len(self.b) == len(self.rel) == len(self.row_names) == m):
            raise BuildError("row metadata length does not match the constraint count")
        if self.A.nnz and (self.A.indices.min() < 0 or self.A.indices.max() >= n):
            raise BuildError("constraint references an uncataloged variable")
        if len(self.comp_pairs):
            pairs = self.comp_pairs
            if pairs.min() < 0 or pairs.max() >= n:
                raise BuildError("complementarity pair references an uncataloged variable")
            if (pairs[:, 0] == pairs[:, 1]).any():
                raise BuildError("complementarity pair must reference two distinct variables")
            if (self.lb[pairs.ravel()] < 0).any():
                raise BuildError("complementarity pairs require nonnegative variables")

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]


class _Assembler:
    """Accumulates rows/bounds; turned into an immutable MilpModel at the end."""

    def __init__(self, scenario: CommunityScenario, prices: CommunityPrices, mode: str):
        self.scenario = scenario
        self.prices = prices
        self.mode = mode
        self.time = scenario.time
        self.cat = VariableCatalog.layout(scenario)
        self.c = np.zeros(self.cat.n_vars)
        self.const = 0.0
        self.data: list[float] = []
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.rel: list[int] = []
        self.rhs: list[float] = []
        self.names: list[str] = []
        self.families: list[str] = []
        self.pairs: list[tuple[int, int]] = []

    def add_row(self, coeffs: list[tuple[int, float]], rel: int, rhs: float, name: str, family: str):
        r = len(self.rhs)
        for j, a in coeffs:
            if a != 0.0:
                self.rows.append(r)
                self.cols.append(j)
                self.data.append(a)
        self.rel.append(rel)
        self.rhs.append(rhs)
        self.names.append(name)
        self.families.append(family)

    # ------------------------------------------------------------------
    # bounds

    def set_bounds(self):
        cat, opt = self.cat, self.scenario.options
        flex_on = self.mode in ("individual", "community")
        for b, bld in enumerate(self.scenario.buildings):
            for n, ses in enumerate(bld.sessions):
                if flex_on:
                    window = set(ses.window_steps(self.time))
                    # discharging needs a budget, a cap, and charging to pay it back
                    allow_discharge = (
                        ses.max_discharge_hours > 0 and ses.max_discharge_kw > 0 and ses.max_charge_kw > 0
                    )
                    for h in range(cat.steps):
                        inside = h in window
                        cat.ub[cat.ev_charge(b, n, h)] = ses.max_charge_kw if inside else 0.0
                        cat.ub[cat.ev_discharge(b, n, h)] = (
                            ses.max_discharge_kw if inside and allow_discharge else 0.0
                        )
            bat = bld.battery
            has_battery = bat.capacity_kwh > 0
            for h in range(cat.steps):
                if flex_on and has_battery:
                    cat.ub[cat.bs_charge(b, h)] = bat.max_charge_kw
                    cat.ub[cat.bs_discharge(b, h)] = bat.max_discharge_kw
                if self.mode == "community":
                    cat.ub[cat.comm_export(b, h)] = np.inf
                    cat.ub[cat.comm_import(b, h)] = np.inf
                if not opt.eq2_verbatim:
                    cat.ub[cat.grid_import(b, h)] = np.inf
                    cat.ub[cat.grid_export(b, h)] = np.inf
                j = cat.soc(b, h)
                if flex_on and has_battery:
                    cat.lb[j], cat.ub[j] = bat.soc_min, bat.soc_max
                else:
                    cat.lb[j] = cat.ub[j] = bat.soc_initial

    # ------------------------------------------------------------------
    # objective

    def set_objective(self):
        cat = self.cat
        tar = self.scenario.tariffs
        dt = self.time.step_hours
        verbatim = self.scenario.options.eq2_verbatim
        for b, bld in enumerate(self.scenario.buildings):
            dem = bld.net_load.deficit_kw
            sur = bld.net_load.surplus_kw
            for h in range(cat.steps):
                c_ig = tar.grid_import_eur_per_kwh[h]
                c_eg = tar.grid_export_eur_per_kwh[h]
                c_ic = self.prices.import_eur_per_kwh[h]
                c_ec = self.prices.export_eur_per_kwh[h]
                if verbatim:
                    # net-load residuals priced directly; flexibility shifts them
                    self.const += dt * (dem[h] * c_ig + sur[h] * c_eg)
                    self.c[cat.comm_import(b, h)] += dt * (c_ic - c_ig)
                    self.c[cat.comm_export(b, h)] += dt * (c_ec - c_eg)
                    self.c[cat.bs_discharge(b, h)] += -dt * c_ig
                    self.c[cat.bs_charge(b, h)] += -dt * c_eg
                    for n in range(len(bld.sessions)):
                        self.c[cat.ev_discharge(b, n, h)] += -dt * c_ig
                        self.c[cat.ev_charge(b, n, h)] += -dt * c_eg
                else:
                    self.c[cat.grid_import(b, h)] += dt * c_ig
                    self.c[cat.grid_export(b, h)] += dt * c_eg
                    self.c[cat.comm_import(b, h)] += dt * c_ic
                    self.c[cat.comm_export(b, h)] += dt * c_ec
            if self.mode != "baseline":
                for n, ses in enumerate(bld.sessions):
                    self._ev_revenue_terms(b, n, ses)

    def _ev_revenue_terms(self, b: int, n: int, ses: EVSession):
        """Objective = electricity cost minus session revenue (revenue negated in)."""
        cat = self.cat
        tar = self.scenario.tariffs
        dt = self.time.step_hours
        self.const -= ses.parking_hours * (tar.parking_eur_per_hour + tar.flexibility_eur_per_hour)
        for h in ses.window_steps(self.time):
            if ses.max_charge_kw > 0:
                self.c[cat.ev_charge(b, n, h)] += (dt / ses.max_charge_kw) * (
                    tar.flexibility_eur_per_hour - tar.charge_eur_per_hour[h]
                )
            if ses.max_discharge_kw > 0:
                self.c[cat.ev_discharge(b, n, h)] += (dt / ses.max_discharge_kw) * (
                    tar.flexibility_eur_per_hour - tar.discharge_eur_per_hour[h]
                )

    # ------------------------------------------------------------------
    # constraint families

    def add_power_balance(self, b: int):
        """Grid flows absorb whatever load and flexibility do not cancel locally."""
        cat = self.cat
        bld = self.scenario.buildings[b]
        net = bld.net_load.deficit_kw - bld.net_load.surplus_kw
        for h in range(cat.steps):
            coeffs = [
                (cat.grid_import(b, h), 1.0),
                (cat.grid_export(b, h), -1.0),
                (cat.bs_charge(b, h), -1.0),
                (cat.bs_discharge(b, h), 1.0),
                (cat.comm_export(b, h), -1.0),
                (cat.comm_import(b, h), 1.0),
            ]
            for n in range(len(bld.sessions)):
                coeffs.append((cat.ev_charge(b, n, h), -1.0))
                coeffs.append((cat.ev_discharge(b, n, h), 1.0))
            self.add_row(coeffs, EQ, float(net[h]), f"balance_{b}_{h}", "balance")

    def add_ev_constraints(self, b: int, n: int):
        """Contract rows of one session, over full-power-equivalent periods."""
        cat = self.cat
        ses = self.scenario.buildings[b].sessions[n]
        dt = self.time.step_hours
        window = list(ses.window_steps(self.time))
        if ses.max_charge_kw <= 0:
            return
        eta = ses.charger_efficiency
        if self.scenario.options.compensation_mode == "round-trip":
            eta = eta * eta
        w_c = dt / ses.max_charge_kw
        w_d = dt / ses.max_discharge_kw if ses.max_discharge_kw > 0 else 0.0
        has_d = ses.max_discharge_kw > 0 and ses.max_discharge_hours > 0

        # total charging must deliver the request plus discharge compensation
        coeffs = [(cat.ev_charge(b, n, h), w_c) for h in window]
        if has_d:
            # compensation in hours scales with the cap ratio; the discharge
            # cap cancels, leaving dt / (eta * max_charge_kw)
            coeffs += [(cat.ev_discharge(b, n, h), -dt / (eta * ses.max_charge_kw)) for h in window]
        self.add_row(coeffs, EQ, ses.requested_charge_hours, f"ev_total_{b}_{n}", "ev")

        if has_d:
            self.add_row(
                [(cat.ev_discharge(b, n, h), w_d) for h in window],
                LE,
                ses.max_discharge_hours,
                f"ev_cap_{b}_{n}",
                "ev",
            )
            # never dip below the arrival state of charge
            for i, x in enumerate(window):
                coeffs = [(cat.ev_discharge(b, n, h), w_d) for h in window[: i + 1]]
                coeffs += [(cat.ev_charge(b, n, h), -w_c) for h in window[: i + 1]]
                self.add_row(coeffs, LE, 0.0, f"ev_prefix_{b}_{n}_{x}", "ev")
            # step time budget: charge and discharge share the wall clock, so
            # their used periods cannot sum past the step; any dispatch with
            # one side zero satisfies this, it only tightens the relaxation
            for h in window:
                self.add_row(
                    [(cat.ev_charge(b, n, h), w_c), (cat.ev_discharge(b, n, h), w_d)],
                    LE,
                    dt,
                    f"ev_step_budget_{b}_{n}_{h}",
                    "ev",
                )
        # used periods cannot exceed the parked time (idle stays nonnegative)
        coeffs = [(cat.ev_charge(b, n, h), w_c) for h in window]
        if has_d:
            coeffs += [(cat.ev_discharge(b, n, h), w_d) for h in window]
        self.add_row(coeffs, LE, ses.parking_hours, f"ev_idle_{b}_{n}", "ev")

        for h in window:
            a, d = cat.ev_charge(b, n, h), cat.ev_discharge(b, n, h)
            if cat.ub[a] > 0 and cat.ub[d] > 0:
                self.pairs.append((a, d))

    def add_storage_constraints(self, b: int):
        """State-of-charge recursion, headroom rows and the terminal condition."""
        cat = self.cat
        bat = self.scenario.buildings[b].battery
        if bat.capacity_kwh <= 0:
            return
        dt = self.time.step_hours
        up = bat.one_way_efficiency * dt / bat.capacity_kwh
        down = dt / bat.capacity_kwh
        for h in range(cat.steps):
            prev = [(cat.soc(b, h - 1), -1.0)] if h > 0 else []
            rhs0 = bat.soc_initial if h == 0 else 0.0
            self.add_row(
                [(cat.soc(b, h), 1.0), (cat.bs_charge(b, h), -up), (cat.bs_discharge(b, h), down)] + prev,
                EQ,
                rhs0,
                f"bs_soc_{b}_{h}",
                "bs",
            )
            # charging is limited by the room left, discharging by the charge above floor
            prev_soc = [(cat.soc(b, h - 1), 1.0)] if h > 0 else []
            head = bat.soc_max - (bat.soc_initial if h == 0 else 0.0)
            self.add_row([(cat.bs_charge(b, h), up)] + prev_soc, LE, head, f"bs_head_up_{b}_{h}", "bs")
            prev_soc = [(cat.soc(b, h - 1), -1.0)] if h > 0 else []
            floor = -bat.soc_min + (bat.soc_initial if h == 0 else 0.0)
            self.add_row([(cat.bs_discharge(b, h), down)] + prev_soc, LE, floor, f"bs_head_down_{b}_{h}", "bs")
            a, d = cat.bs_charge(b, h), cat.bs_discharge(b, h)
            if cat.ub[a] > 0 and cat.ub[d] > 0:
                self.pairs.append((a, d))
                # shared inverter time budget, tightens the relaxation only
                self.add_row(
                    [(a, 1.0 / bat.max_charge_kw), (d, 1.0 / bat.max_discharge_kw)],
                    LE,
                    1.0,
                    f"bs_step_budget_{b}_{h}",
                    "bs",
                )
        if self.scenario.options.terminal_soc == "restore":
            self.add_row([(cat.soc(b, cat.steps - 1), 1.0)], GE, bat.soc_initial, f"bs_terminal_{b}", "bs")

    def add_community_constraints(self):
        """Per-building exchange caps and the zero-sum pool balance."""
        cat = self.cat
        as_written = self.scenario.options.community_caps == "as-written"
        for b, bld in enumerate(self.scenario.buildings):
            dem = bld.net_load.deficit_kw
            sur = bld.net_load.surplus_kw
            for h in range(cat.steps):
                coeffs = [(cat.comm_import(b, h), 1.0)]
                coeffs += [(cat.ev_charge(b, n, h), -1.0) for n in range(len(bld.sessions))]
                if as_written:
                    coeffs.append((cat.bs_discharge(b, h), 1.0))
                    coeffs += [(cat.ev_discharge(b, n, h), 1.0) for n in range(len(bld.sessions))]
                self.add_row(coeffs, LE, float(dem[h]), f"comm_import_cap_{b}_{h}", "community")

                coeffs = [(cat.comm_export(b, h), 1.0)]
                if as_written:
                    coeffs.append((cat.bs_charge(b, h), 1.0))
                    coeffs += [(cat.ev_charge(b, n, h), 1.0) for n in range(len(bld.sessions))]
                self.add_row(coeffs, LE, float(sur[h]), f"comm_export_cap_{b}_{h}", "community")
                self.pairs.append((cat.comm_export(b, h), cat.comm_import(b, h)))
        for h in range(cat.steps):
            coeffs = []
            for b in range(cat.n_buildings):
                coeffs.append((cat.comm_export(b, h), 1.0))
                coeffs.append((cat.comm_import(b, h), -1.0))
            self.add_row(coeffs, EQ, 0.0, f"comm_balance_{h}", "community")

    # ------------------------------------------------------------------

    def finish(self) -> MilpModel:
        n = self.cat.n_vars
        A = sparse.coo_matrix(
            (self.data, (self.rows, self.cols)), shape=(len(self.rhs), n)
        ).tocsr()
        self.cat.lb.flags.writeable = False
        self.cat.ub.flags.writeable = False
        pairs = (
            np.array(sorted(set(self.pairs)), dtype=np.int64).reshape(-1, 2)
            if self.pairs
            else np.empty((0, 2), dtype=np.int64)
        )
        return MilpModel(
            c=self.c,
            obj_constant=self.const,
            A=A,
            rel=np.array(self.rel, dtype=np.int8),
            b=np.array(self.rhs),
            lb=self.cat.lb,
            ub=self.cat.ub,
            row_names=tuple(self.names),
            row_families=tuple(self.families),
            comp_pairs=pairs,
            catalog=self.cat,
            mode=self.mode,
            scenario=self.scenario,
            prices=self.prices,
        )


def build(scenario: CommunityScenario, prices: CommunityPrices, mode: str) -> MilpModel:
    """Assemble the optimization problem for one run mode.

    The scenario must be valid; violations are reported as a ``BuildError``.
    Variable layout and row order are deterministic, so identical inputs
    produce bit-identical models.
    """
    if mode not in MODES:
        raise BuildError(f"unknown mode {mode!r}, expected one of {MODES}")
    violations = validate_scenario(scenario)
    if violations:
        raise BuildError("scenario is invalid: " + "; ".join(str(v) for v in violations[:5]))
    if len(prices.surplus_ratio) != scenario.time.steps:
        raise BuildError("prices were computed for a different horizon")

    asm = _Assembler(scenario, prices, mode)
    asm.set_bounds()
    asm.set_objective()
    if not scenario.options.eq2_verbatim:
        for b in range(len(scenario.buildings)):
            asm.add_power_balance(b)
    if mode in ("individual", "community"):
        for b, bld in enumerate(scenario.buildings):
            for n in range(len(bld.sessions)):
                asm.add_ev_constraints(b, n)
            asm.add_storage_constraints(b)
    if mode == "community":
        asm.add_community_constraints()
    return asm.finish()


def write_lp(model: MilpModel, path) -> None:
    """Serialize the linear relaxation in LP text format for external solvers."""
    lines = ["\\ dispatch model, mode=" + model.mode]
    if model.obj_constant:
        lines.append(f"\\ objective constant (add to reported optimum): {model.obj_constant!r}")
    if len(model.comp_pairs):
        lines.append(f"\\ {len(model.comp_pairs)} complementarity pairs not expressible here")
    lines.append("Minimize")
    lines.append(" obj: " + _lp_expr(model.c.nonzero()[0], model.c, model.catalog))
    lines.append("Subject To")
    A = model.A.tocsr()
    rel_txt = {LE: "<=", EQ: "=", GE: ">="}
    for i in range(model.n_rows):
        sl = slice(A.indptr[i], A.indptr[i + 1])
        expr = _lp_expr(A.indices[sl], dict(zip(A.indices[sl], A.data[sl])), model.catalog)
        lines.append(f" {model.row_names[i]}: {expr} {rel_txt[int(model.rel[i])]} {model.b[i]!r}")
    lines.append("Bounds")
    for j in range(model.n_vars):
        name = model.catalog.var_name(j)
        lo, hi = model.lb[j], model.ub[j]
        if lo == hi:
            lines.append(f" {name} = {lo!r}")
        elif np.isinf(hi):
            lines.append(f" {lo!r} <= {name}")
        else:
            lines.append(f" {lo!r} <= {name} <= {hi!r}")
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _lp_expr(indices, coeffs, catalog) -> str:
    terms = []
    for j in indices:
        a = coeffs[j]
        sign = "-" if a < 0 else "+"
        terms.append(f"{sign} {abs(a)!r} {catalog.var_name(int(j))}")
    if not terms:
        return "0 " + catalog.var_name(0)
    joined = " ".join(terms)
    return joined[2:] if joined.startswith("+ ") else joined
