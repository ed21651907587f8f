"""Core data types for community scheduling scenarios.

Everything here is immutable after construction: per-step series are stored
as read-only float64 arrays so scenarios can be shared across concurrent
solver runs. Validation is collected, not raised -- ``validate_scenario``
returns a list of violations so callers (and the CLI) can report all
problems at once.

Unit conventions:
    * powers kW, energies kWh, durations hours
    * tariffs EUR/kWh for grid flows (EUR/MWh accepted at ingestion only),
      EUR/h for the EV parking contract
    * export tariffs are negative numbers (exporting earns income)
    * net load is split into a nonnegative deficit series and a nonnegative
      surplus series; at most one of them is nonzero at any step
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "TimeGrid",
    "NetLoadSeries",
    "BatterySpec",
    "EVSession",
    "TariffBook",
    "BuildingAssets",
    "SolverOptions",
    "CommunityScenario",
    "Violation",
    "validate_scenario",
    "split_net_load",
    "DomainError",
    "ContractViolation",
    "BuildError",
    "SolverLimitError",
    "NumericalBreakdown",
]

MODES = ("baseline", "individual", "community")
COMPENSATION_MODES = ("paper-literal", "round-trip")


class DomainError(ValueError):
    """An operation was called outside its stated domain."""


class ContractViolation(RuntimeError):
    """A solved dispatch breaks the EV parking contract accounting."""


class BuildError(RuntimeError):
    """Model assembly failed (inconsistent scenario data)."""


class SolverLimitError(RuntimeError):
    """Node or time limit exhausted before any feasible dispatch was found."""


class NumericalBreakdown(RuntimeError):
    """Simplex lost numerical footing; carries the recent pivot history."""

    def __init__(self, message: str, pivot_tail: Sequence[tuple] = ()):
        super().__init__(message)
        self.pivot_tail = list(pivot_tail)


def _series(values, steps: int | None = None) -> np.ndarray:
    """Coerce to a read-only float64 array (scalars broadcast to length)."""
    if np.isscalar(values) and steps is not None:
        arr = np.full(steps, float(values))
    else:
        arr = np.asarray(values, dtype=np.float64).copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform single-day horizon: ``steps`` intervals of ``step_hours`` each."""

    step_hours: float = 1.0
    steps: int = 24
    start_hour_of_day: float = 0.0

    @property
    def horizon_hours(self) -> float:
        return self.step_hours * self.steps

    def hour_of_day(self, step: int) -> float:
        """Hour-of-day at the start of ``step``."""
        return self.start_hour_of_day + step * self.step_hours


@dataclass(frozen=True)
class NetLoadSeries:
    """Per-step net load split into deficit (import need) and surplus magnitudes."""

    deficit_kw: np.ndarray
    surplus_kw: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "deficit_kw", _series(self.deficit_kw))
        object.__setattr__(self, "surplus_kw", _series(self.surplus_kw))

    @property
    def signed_kw(self) -> np.ndarray:
        """Signed net load: positive = deficit, negative = surplus."""
        return self.deficit_kw - self.surplus_kw


def split_net_load(signed_kw) -> NetLoadSeries:
    """Split a signed net-load series (demand minus PV) into the two magnitudes."""
    signed = np.asarray(signed_kw, dtype=np.float64)
    return NetLoadSeries(np.maximum(signed, 0.0), np.maximum(-signed, 0.0))


@dataclass(frozen=True)
class BatterySpec:
    """Stationary battery: energy capacity, power caps, one-way efficiency, SoC box."""

    capacity_kwh: float
    max_charge_kw: float
    max_discharge_kw: float
    one_way_efficiency: float = 0.95
    soc_min: float = 0.1
    soc_max: float = 0.9
    soc_initial: float = 0.5

    @classmethod
    def none(cls) -> "BatterySpec":
        """A building without storage."""
        return cls(0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class EVSession:
    """One EV parked at a charging station for part of the horizon.

    The user requests ``requested_charge_hours`` of full-power-equivalent
    charging and allows up to ``max_discharge_hours`` of full-power-equivalent
    feed-in to the building. Durations are wall-clock-independent: an hour of
    half-power operation counts as half an hour of used period.
    """

    id: str
    arrival_step: int
    parking_hours: float
    requested_charge_hours: float
    max_discharge_hours: float = 0.0
    max_charge_kw: float = 10.0
    max_discharge_kw: float = 10.0
    charger_efficiency: float = 0.93

    def window_steps(self, time: TimeGrid) -> range:
        """Steps during which the EV is plugged in."""
        n = math.ceil(round(self.parking_hours / time.step_hours, 9))
        return range(self.arrival_step, self.arrival_step + n)


@dataclass(frozen=True)
class TariffBook:
    """All prices of the scenario, already converted to internal units.

    Grid tariffs are per-step EUR/kWh series; the EV contract tariffs are
    EUR/h (parking and flexibility are scalars, charge/discharge are per-step
    series). Export-side tariffs are negative: they are income.
    """

    grid_import_eur_per_kwh: np.ndarray
    grid_export_eur_per_kwh: np.ndarray
    grid_use_eur_per_kwh: np.ndarray
    parking_eur_per_hour: float
    flexibility_eur_per_hour: float
    charge_eur_per_hour: np.ndarray
    discharge_eur_per_hour: np.ndarray

    def __post_init__(self):
        for name in (
            "grid_import_eur_per_kwh",
            "grid_export_eur_per_kwh",
            "grid_use_eur_per_kwh",
            "charge_eur_per_hour",
            "discharge_eur_per_hour",
        ):
            object.__setattr__(self, name, _series(getattr(self, name)))

    @classmethod
    def flat(
        cls,
        steps: int,
        grid_import_eur_per_kwh: float = 0.1228,
        grid_export_eur_per_kwh: float = -0.0358,
        grid_use_eur_per_kwh: float = 0.050,
        parking_eur_per_hour: float = 0.5,
        flexibility_eur_per_hour: float = -0.5,
        charge_eur_per_hour: float = 2.0,
        discharge_eur_per_hour: float = -3.0,
    ) -> "TariffBook":
        """Flat tariff book at the reference campus price levels."""
        return cls(
            _series(grid_import_eur_per_kwh, steps),
            _series(grid_export_eur_per_kwh, steps),
            _series(grid_use_eur_per_kwh, steps),
            parking_eur_per_hour,
            flexibility_eur_per_hour,
            _series(charge_eur_per_hour, steps),
            _series(discharge_eur_per_hour, steps),
        )


@dataclass(frozen=True)
class BuildingAssets:
    """One building: its net load plus the flexibility assets attached to it."""

    name: str
    net_load: NetLoadSeries
    battery: BatterySpec
    sessions: tuple[EVSession, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sessions", tuple(self.sessions))


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances, limits and formulation switches shared by the pipeline."""

    feas_tol: float = 1e-7
    opt_tol: float = 1e-7
    comp_tol: float = 1e-5
    max_nodes: int = 10000
    time_limit_seconds: float | None = None
    compensation_mode: str = "paper-literal"
    eq2_verbatim: bool = False
    terminal_soc: str = "restore"  # "restore" | "free"
    community_caps: str = "nesting-safe"  # "nesting-safe" | "as-written"
    surplus_ratio_denominator: str = "gap"  # "gap" | "deficit"


@dataclass(frozen=True)
class CommunityScenario:
    """Full input bundle: time grid, tariffs, buildings and solver options."""

    time: TimeGrid
    tariffs: TariffBook
    buildings: tuple[BuildingAssets, ...]
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        object.__setattr__(self, "buildings", tuple(self.buildings))

    def with_options(self, **overrides) -> "CommunityScenario":
        return replace(self, options=replace(self.options, **overrides))


@dataclass(frozen=True)
class Violation:
    """A single scenario invariant violation.

    ``code`` is machine-readable and stable; a step-local violation carries
    an ``@<step>`` suffix (e.g. ``net-load-overlap@3``).
    """

    code: str
    message: str
    building: str | None = None
    step: int | None = None

    def __str__(self) -> str:
        where = f" [{self.building}]" if self.building else ""
        return f"{self.code}{where}: {self.message}"


def _coded(code: str, step: int | None = None) -> str:
    return f"{code}@{step}" if step is not None else code


def validate_scenario(scenario: CommunityScenario) -> list[Violation]:
    """Check every scenario invariant; an empty list means the scenario is valid.

    Violations are data, not exceptions: one call reports everything that is
    wrong. The check is pure -- identical scenarios produce identical lists.
    """
    out: list[Violation] = []
    time = scenario.time
    H = time.steps

    if time.step_hours <= 0:
        out.append(Violation("time-step-nonpositive", f"step_hours={time.step_hours} must be > 0"))
    if time.steps < 1:
        out.append(Violation("time-steps-empty", f"steps={time.steps} must be >= 1"))
    if time.step_hours > 0 and time.steps >= 1 and time.horizon_hours > 24 + 1e-9:
        out.append(
            Violation(
                "time-horizon-exceeds-day",
                f"{time.steps} x {time.step_hours} h = {time.horizon_hours} h > 24 h",
            )
        )

    out.extend(_validate_tariffs(scenario.tariffs, H))

    if not scenario.buildings:
        out.append(Violation("no-buildings", "scenario has no buildings"))

    for bld in scenario.buildings:
        out.extend(_validate_building(bld, time))

    opts = scenario.options
    for name in ("feas_tol", "opt_tol", "comp_tol"):
        if getattr(opts, name) <= 0:
            out.append(Violation("option-tolerance-nonpositive", f"{name} must be > 0"))
    if opts.compensation_mode not in COMPENSATION_MODES:
        out.append(Violation("option-unknown-compensation", f"compensation_mode={opts.compensation_mode!r}"))
    return out


def _validate_tariffs(tar: TariffBook, H: int) -> list[Violation]:
    out: list[Violation] = []
    for name, series in (
        ("grid-import", tar.grid_import_eur_per_kwh),
        ("grid-export", tar.grid_export_eur_per_kwh),
        ("grid-use", tar.grid_use_eur_per_kwh),
        ("ev-charge-tariff", tar.charge_eur_per_hour),
        ("ev-discharge-tariff", tar.discharge_eur_per_hour),
    ):
        if len(series) != H:
            out.append(Violation(f"series-length-{name}", f"{name} has {len(series)} entries, expected {H}"))
    if out:
        return out  # length errors make per-step checks meaningless

    c_ig = tar.grid_import_eur_per_kwh
    c_eg = tar.grid_export_eur_per_kwh
    c_g = tar.grid_use_eur_per_kwh
    for h in np.flatnonzero(c_ig < 0):
        out.append(Violation(_coded("grid-import-negative", int(h)), f"import tariff {c_ig[h]:.6f} EUR/kWh < 0", step=int(h)))
    for h in np.flatnonzero(c_eg > 0):
        out.append(Violation(_coded("grid-export-positive", int(h)), f"export tariff {c_eg[h]:.6f} EUR/kWh > 0 (must be income)", step=int(h)))
    # community price band must be nonempty: import minus use >= -export
    for h in np.flatnonzero(c_ig - c_g < -c_eg - 1e-12):
        out.append(
            Violation(
                _coded("tariff-band-empty", int(h)),
                f"import-use {c_ig[h] - c_g[h]:.6f} < -export {-c_eg[h]:.6f}; community tariff band is empty",
                step=int(h),
            )
        )
    return out


def _validate_building(bld: BuildingAssets, time: TimeGrid) -> list[Violation]:
    out: list[Violation] = []
    H = time.steps
    name = bld.name
    dead = bld.net_load.deficit_kw
    live = bld.net_load.surplus_kw

    if len(dead) != H or len(live) != H:
        out.append(
            Violation("series-length-net-load", f"net load has {len(dead)}/{len(live)} entries, expected {H}", building=name)
        )
    else:
        for h in np.flatnonzero((dead < 0) | (live < 0)):
            out.append(Violation(_coded("net-load-negative", int(h)), "net load magnitudes must be >= 0", name, int(h)))
        for h in np.flatnonzero((dead > 0) & (live > 0)):
            out.append(
                Violation(
                    _coded("net-load-overlap", int(h)),
                    f"deficit {dead[h]:.3f} kW and surplus {live[h]:.3f} kW both positive",
                    name,
                    int(h),
                )
            )

    bat = bld.battery
    if bat.capacity_kwh < 0:
        out.append(Violation("battery-capacity-negative", f"capacity {bat.capacity_kwh} kWh", name))
    if bat.max_charge_kw < 0 or bat.max_discharge_kw < 0:
        out.append(Violation("battery-power-negative", "battery power caps must be >= 0", name))
    if not (0.0 < bat.one_way_efficiency <= 1.0):
        out.append(Violation("battery-efficiency-range", f"one-way efficiency {bat.one_way_efficiency} outside (0, 1]", name))
    if not (0.0 <= bat.soc_min <= bat.soc_initial <= bat.soc_max <= 1.0):
        out.append(
            Violation(
                "battery-soc-order",
                f"need 0 <= soc_min <= soc_initial <= soc_max <= 1, got "
                f"{bat.soc_min}/{bat.soc_initial}/{bat.soc_max}",
                name,
            )
        )
    if bat.capacity_kwh == 0 and (bat.max_charge_kw > 0 or bat.max_discharge_kw > 0):
        out.append(Violation("battery-zero-capacity-with-power", "zero-capacity battery with nonzero power caps", name))

    seen: set[str] = set()
    for s in bld.sessions:
        if s.id in seen:
            out.append(Violation("ev-session-id-duplicate", f"session id {s.id!r} repeats", name))
        seen.add(s.id)
        if min(s.parking_hours, s.requested_charge_hours, s.max_discharge_hours) < 0:
            out.append(Violation("ev-duration-negative", f"session {s.id}: durations must be >= 0", name))
        if s.max_charge_kw < 0 or s.max_discharge_kw < 0:
            out.append(Violation("ev-power-negative", f"session {s.id}: power caps must be >= 0", name))
        if not (0.0 < s.charger_efficiency <= 1.0):
            out.append(Violation("ev-efficiency-range", f"session {s.id}: efficiency {s.charger_efficiency} outside (0, 1]", name))
        if s.requested_charge_hours + s.max_discharge_hours > s.parking_hours + 1e-9:
            out.append(
                Violation(
                    "ev-periods-exceed-parking",
                    f"session {s.id}: requested {s.requested_charge_hours} h + dischargeable "
                    f"{s.max_discharge_hours} h > parking {s.parking_hours} h",
                    name,
                )
            )
        if s.requested_charge_hours > 0 and s.max_charge_kw == 0:
            out.append(Violation("ev-charge-power-zero", f"session {s.id}: requested charge with a 0 kW charger", name))
        if s.arrival_step < 0 or (time.step_hours > 0 and s.arrival_step + len(s.window_steps(time)) > H):
            out.append(
                Violation(
                    "ev-session-outside-horizon",
                    f"session {s.id}: steps {s.arrival_step}..{s.arrival_step + len(s.window_steps(time)) - 1} "
                    f"do not fit horizon of {H}",
                    name,
                )
            )
    return out
