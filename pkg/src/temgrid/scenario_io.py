"""Scenario ingestion, serialization and EV session generation.

The on-disk scenario is a single JSON document::

    {
      "time": {"step_hours": 1.0, "steps": 24, "start_hour_of_day": 0.0},
      "tariffs": {
        "grid_import_eur_mwh": [..per step..] | scalar,
        "grid_export_eur_mwh": ...,          # <= 0, income
        "grid_use_eur_mwh": ...,
        "parking_eur_h": 0.5,
        "flexibility_eur_h": -0.5,           # reward paid to the EV user
        "charge_eur_h": [...] | scalar,
        "discharge_eur_h": [...] | scalar
      },
      "buildings": [{
        "name": "B1",
        "net_load_kw": [signed kW..] | {"demand_kw": [...], "pv_kw": [...]},
        "battery": {...},                    # optional
        "ev_sessions": [{...}],              # or "ev_sampling": {stats, count, seed}
      }],
      "options": {...}                       # optional solver options
    }

Grid tariffs are EUR/MWh on disk and EUR/kWh in memory. Net load may come
signed (demand minus PV), as separate demand/PV series, or from a CSV with
header ``hour,building,net_kw`` referenced by a top-level ``net_load_csv``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import (
    BatterySpec,
    BuildingAssets,
    CommunityScenario,
    DomainError,
    EVSession,
    SolverOptions,
    TariffBook,
    TimeGrid,
    Violation,
    split_net_load,
    validate_scenario,
)
from .rng import Pcg64

__all__ = [
    "EVRequestStats",
    "StatRange",
    "DEFAULT_EV_REQUEST_STATS",
    "ScenarioFormatError",
    "ScenarioValidationError",
    "load_scenario",
    "write_scenario",
    "load_net_load_csv",
    "sample_sessions",
    "assign_sessions",
    "bundled_scenario_path",
]


class ScenarioFormatError(ValueError):
    """The document cannot be parsed into a scenario; message carries the field path."""


class ScenarioValidationError(ValueError):
    """The document parsed but the scenario breaks invariants."""

    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


@dataclass(frozen=True)
class StatRange:
    """Mean/std plus hard bounds, in hours (or hour-of-day for start times)."""

    mean: float
    std: float
    min: float
    max: float

    def check(self, label: str):
        if not (self.min <= self.mean <= self.max) or self.std < 0:
            raise DomainError(f"{label}: need min <= mean <= max and std >= 0, got {self}")


@dataclass(frozen=True)
class EVRequestStats:
    parking: StatRange
    charging: StatRange
    discharging: StatRange
    start: StatRange

    def check(self):
        for label in ("parking", "charging", "discharging", "start"):
            getattr(self, label).check(label)


#: measured parking-lot behaviour of the reference campus
DEFAULT_EV_REQUEST_STATS = EVRequestStats(
    parking=StatRange(8.0, 1.0, 6.25, 11.0),
    charging=StatRange(2.0, 0.5, 1.25, 3.0),
    discharging=StatRange(0.75, 0.25, 0.0, 1.25),
    start=StatRange(9.5, 0.75, 8.0, 10.25),
)


def bundled_scenario_path() -> Path:
    """Path of the packaged four-building example community."""
    return Path(resources.files("temgrid").joinpath("fixtures/community.json"))


# ---------------------------------------------------------------------------
# loading


def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise ScenarioFormatError(f"{path}: missing required field {key!r}")
    return obj[key]


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioFormatError(f"{path}: expected a number, got {type(value).__name__}")
    return float(value)


def _num_series(value, steps: int, path: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.full(steps, float(value))
    if isinstance(value, list):
        if len(value) != steps:
            raise ScenarioFormatError(f"{path}: expected {steps} entries, got {len(value)}")
        return np.array([_num(v, f"{path}[{i}]") for i, v in enumerate(value)])
    raise ScenarioFormatError(f"{path}: expected a number or a list of numbers")


def _scalar_tariff(value, path: str) -> float:
    """Per-hour contract tariffs are scalars; constant arrays are tolerated."""
    if isinstance(value, list):
        vals = {_num(v, path) for v in value}
        if len(vals) != 1:
            raise ScenarioFormatError(f"{path}: must be a scalar (or a constant array)")
        return vals.pop()
    return _num(value, path)


def load_scenario(path) -> CommunityScenario:
    """Parse, convert units, validate; returns a ready-to-solve scenario."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ScenarioFormatError(f"{path}: top level must be an object")

    t = _need(doc, "time", "time")
    time = TimeGrid(
        step_hours=_num(t.get("step_hours", 1.0), "time.step_hours"),
        steps=int(_num(t.get("steps", 24), "time.steps")),
        start_hour_of_day=_num(t.get("start_hour_of_day", 0.0), "time.start_hour_of_day"),
    )
    H = time.steps

    tj = _need(doc, "tariffs", "tariffs")
    tariffs = TariffBook(
        grid_import_eur_per_kwh=_num_series(_need(tj, "grid_import_eur_mwh", "tariffs"), H, "tariffs.grid_import_eur_mwh") / 1000.0,
        grid_export_eur_per_kwh=_num_series(_need(tj, "grid_export_eur_mwh", "tariffs"), H, "tariffs.grid_export_eur_mwh") / 1000.0,
        grid_use_eur_per_kwh=_num_series(_need(tj, "grid_use_eur_mwh", "tariffs"), H, "tariffs.grid_use_eur_mwh") / 1000.0,
        parking_eur_per_hour=_scalar_tariff(tj.get("parking_eur_h", 0.0), "tariffs.parking_eur_h"),
        flexibility_eur_per_hour=_scalar_tariff(tj.get("flexibility_eur_h", 0.0), "tariffs.flexibility_eur_h"),
        charge_eur_per_hour=_num_series(tj.get("charge_eur_h", 0.0), H, "tariffs.charge_eur_h"),
        discharge_eur_per_hour=_num_series(tj.get("discharge_eur_h", 0.0), H, "tariffs.discharge_eur_h"),
    )

    csv_loads: dict[str, np.ndarray] = {}
    if "net_load_csv" in doc:
        csv_loads = load_net_load_csv(path.parent / doc["net_load_csv"], steps=H)

    blist = _need(doc, "buildings", "buildings")
    if not isinstance(blist, list):
        raise ScenarioFormatError("buildings: expected a list")
    buildings = [
        _parse_building(bj, i, time, csv_loads) for i, bj in enumerate(blist)
    ]

    options = _parse_options(doc.get("options", {}))
    scenario = CommunityScenario(time=time, tariffs=tariffs, buildings=tuple(buildings), options=options)
    violations = validate_scenario(scenario)
    if violations:
        raise ScenarioValidationError(violations)
    return scenario


def _parse_building(bj: dict, index: int, time: TimeGrid, csv_loads: dict) -> BuildingAssets:
    where = f"buildings[{index}]"
    name = bj.get("name", f"B{index + 1}")
    H = time.steps

    if "net_load_kw" in bj:
        nl = bj["net_load_kw"]
        if isinstance(nl, dict):
            demand = _num_series(_need(nl, "demand_kw", f"{where}.net_load_kw"), H, f"{where}.demand_kw")
            pv = _num_series(_need(nl, "pv_kw", f"{where}.net_load_kw"), H, f"{where}.pv_kw")
            signed = demand - pv
        else:
            signed = _num_series(nl, H, f"{where}.net_load_kw")
    elif name in csv_loads:
        signed = csv_loads[name]
    else:
        raise ScenarioFormatError(f"{where}: no net_load_kw and no CSV entry for {name!r}")

    bat_j = bj.get("battery")
    if bat_j is None:
        battery = BatterySpec.none()
    else:
        battery = BatterySpec(
            capacity_kwh=_num(_need(bat_j, "capacity_kwh", f"{where}.battery"), f"{where}.battery.capacity_kwh"),
            max_charge_kw=_num(_need(bat_j, "max_charge_kw", f"{where}.battery"), f"{where}.battery.max_charge_kw"),
            max_discharge_kw=_num(_need(bat_j, "max_discharge_kw", f"{where}.battery"), f"{where}.battery.max_discharge_kw"),
            one_way_efficiency=_num(bat_j.get("one_way_efficiency", 0.95), f"{where}.battery.one_way_efficiency"),
            soc_min=_num(bat_j.get("soc_min", 0.1), f"{where}.battery.soc_min"),
            soc_max=_num(bat_j.get("soc_max", 0.9), f"{where}.battery.soc_max"),
            soc_initial=_num(bat_j.get("soc_initial", 0.5), f"{where}.battery.soc_initial"),
        )

    if "ev_sampling" in bj:
        sj = bj["ev_sampling"]
        stats = _parse_stats(sj.get("stats"), f"{where}.ev_sampling.stats")
        sessions = sample_sessions(
            stats,
            count=int(_num(_need(sj, "count", f"{where}.ev_sampling"), f"{where}.count")),
            seed=int(_num(_need(sj, "seed", f"{where}.ev_sampling"), f"{where}.seed")),
            time=time,
            id_prefix=f"{name}-ev",
            max_charge_kw=_num(sj.get("max_charge_kw", 10.0), f"{where}.max_charge_kw"),
            max_discharge_kw=_num(sj.get("max_discharge_kw", 10.0), f"{where}.max_discharge_kw"),
            charger_efficiency=_num(sj.get("charger_efficiency", 0.93), f"{where}.charger_efficiency"),
        )
    else:
        sessions = [_parse_session(sj, f"{where}.ev_sessions[{k}]", name, k, time) for k, sj in enumerate(bj.get("ev_sessions", []))]

    return BuildingAssets(name=name, net_load=split_net_load(signed), battery=battery, sessions=tuple(sessions))


def _parse_session(sj: dict, where: str, bname: str, k: int, time: TimeGrid) -> EVSession:
    if "arrival_step" in sj:
        arrival = int(_num(sj["arrival_step"], f"{where}.arrival_step"))
    elif "start_hour" in sj:
        arrival = _arrival_step(_num(sj["start_hour"], f"{where}.start_hour"), time)
    else:
        raise ScenarioFormatError(f"{where}: needs arrival_step or start_hour")
    return EVSession(
        id=str(sj.get("id", f"{bname}-ev{k:02d}")),
        arrival_step=arrival,
        parking_hours=_num(_need(sj, "parking_hours", where), f"{where}.parking_hours"),
        requested_charge_hours=_num(_need(sj, "requested_charge_hours", where), f"{where}.requested_charge_hours"),
        max_discharge_hours=_num(sj.get("max_discharge_hours", 0.0), f"{where}.max_discharge_hours"),
        max_charge_kw=_num(sj.get("max_charge_kw", 10.0), f"{where}.max_charge_kw"),
        max_discharge_kw=_num(sj.get("max_discharge_kw", 10.0), f"{where}.max_discharge_kw"),
        charger_efficiency=_num(sj.get("charger_efficiency", 0.93), f"{where}.charger_efficiency"),
    )


def _parse_stats(sj, where: str) -> EVRequestStats:
    if sj is None:
        return DEFAULT_EV_REQUEST_STATS
    out = {}
    for key in ("parking", "charging", "discharging", "start"):
        rj = _need(sj, key, where)
        out[key] = StatRange(
            mean=_num(_need(rj, "mean", f"{where}.{key}"), f"{where}.{key}.mean"),
            std=_num(_need(rj, "std", f"{where}.{key}"), f"{where}.{key}.std"),
            min=_num(_need(rj, "min", f"{where}.{key}"), f"{where}.{key}.min"),
            max=_num(_need(rj, "max", f"{where}.{key}"), f"{where}.{key}.max"),
        )
    return EVRequestStats(**out)


_OPTION_FIELDS = set(SolverOptions.__dataclass_fields__)


def _parse_options(oj: dict) -> SolverOptions:
    unknown = set(oj) - _OPTION_FIELDS
    if unknown:
        raise ScenarioFormatError(f"options: unknown fields {sorted(unknown)}")
    return SolverOptions(**oj)


def load_net_load_csv(path, steps: int) -> dict[str, np.ndarray]:
    """Read ``hour,building,net_kw`` rows into per-building signed series."""
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["hour", "building", "net_kw"]:
                raise ScenarioFormatError(f"{path}: expected header hour,building,net_kw")
            for i, row in enumerate(reader):
                try:
                    h = int(row["hour"])
                    name = row["building"]
                    val = float(row["net_kw"])
                except (TypeError, ValueError) as exc:
                    raise ScenarioFormatError(f"{path}: line {i + 2}: {exc}") from exc
                if not 0 <= h < steps:
                    raise ScenarioFormatError(f"{path}: line {i + 2}: hour {h} outside 0..{steps - 1}")
                out.setdefault(name, np.zeros(steps))[h] = val
    except OSError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# writing


def write_scenario(scenario: CommunityScenario, path) -> None:
    """Serialize to the document schema (inverse of :func:`load_scenario`)."""
    tar = scenario.tariffs
    doc = {
        "time": {
            "step_hours": scenario.time.step_hours,
            "steps": scenario.time.steps,
            "start_hour_of_day": scenario.time.start_hour_of_day,
        },
        "tariffs": {
            "grid_import_eur_mwh": list(tar.grid_import_eur_per_kwh * 1000.0),
            "grid_export_eur_mwh": list(tar.grid_export_eur_per_kwh * 1000.0),
            "grid_use_eur_mwh": list(tar.grid_use_eur_per_kwh * 1000.0),
            "parking_eur_h": tar.parking_eur_per_hour,
            "flexibility_eur_h": tar.flexibility_eur_per_hour,
            "charge_eur_h": list(tar.charge_eur_per_hour),
            "discharge_eur_h": list(tar.discharge_eur_per_hour),
        },
        "buildings": [
            {
                "name": b.name,
                "net_load_kw": list(b.net_load.signed_kw),
                "battery": asdict(b.battery),
                "ev_sessions": [asdict(s) for s in b.sessions],
            }
            for b in scenario.buildings
        ],
        "options": asdict(scenario.options),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# session generation


def _quarter(value: float) -> float:
    return round(value * 4.0) / 4.0


def _draw(rng: Pcg64, r: StatRange) -> float:
    """Normal draw clipped into the stat range, on a quarter-hour grid."""
    x = min(max(rng.normal(r.mean, r.std), r.min), r.max)
    return min(max(_quarter(x), r.min), r.max)


def _arrival_step(start_hour: float, time: TimeGrid) -> int:
    step = int(math.floor((start_hour - time.start_hour_of_day) / time.step_hours + 1e-9))
    return min(max(step, 0), time.steps - 1)


def sample_sessions(
    stats: EVRequestStats,
    count: int,
    seed: int,
    time: TimeGrid,
    id_prefix: str = "ev",
    max_charge_kw: float = 10.0,
    max_discharge_kw: float = 10.0,
    charger_efficiency: float = 0.93,
) -> list[EVSession]:
    """Draw ``count`` reproducible sessions from request statistics.

    Draws that break the session invariants (periods exceeding the parked
    time, or a window falling off the horizon) are re-drawn up to 100 times,
    then clipped into feasibility.
    """
    if count < 0:
        raise DomainError("count must be >= 0")
    stats.check()
    rng = Pcg64(seed)
    sessions = []
    for k in range(count):
        for _ in range(100):
            parking = _draw(rng, stats.parking)
            charging = _draw(rng, stats.charging)
            discharging = _draw(rng, stats.discharging)
            start = _draw(rng, stats.start)
            arrival = _arrival_step(start, time)
            fits = arrival + math.ceil(round(parking / time.step_hours, 9)) <= time.steps
            if charging + discharging <= parking and fits:
                break
        else:
            parking = min(parking, (time.steps - arrival) * time.step_hours)
            discharging = min(discharging, max(parking - charging, 0.0))
            charging = min(charging, parking)
        sessions.append(
            EVSession(
                id=f"{id_prefix}{k:02d}",
                arrival_step=arrival,
                parking_hours=parking,
                requested_charge_hours=charging,
                max_discharge_hours=discharging,
                max_charge_kw=max_charge_kw,
                max_discharge_kw=max_discharge_kw,
                charger_efficiency=charger_efficiency,
            )
        )
    return sessions


def assign_sessions(
    sessions: list[EVSession],
    buildings: Sequence[BuildingAssets],
    per_building: int,
    seed: int,
) -> tuple[BuildingAssets, ...]:
    """Deal sessions to buildings: seeded shuffle, then round-robin, no reuse.

    Leftover sessions stay unassigned. Buildings keep any sessions they
    already carry; the dealt ones are appended.
    """
    need = per_building * len(buildings)
    if need > len(sessions):
        raise DomainError(f"need {need} sessions for {len(buildings)} buildings, only {len(sessions)} available")
    pool = list(sessions)
    rng = Pcg64(seed)
    rng.shuffle(pool)
    dealt: list[list[EVSession]] = [[] for _ in buildings]
    i = 0
    for _ in range(per_building):
        for b in range(len(buildings)):
            dealt[b].append(pool[i])
            i += 1
    return tuple(
        replace(b, sessions=tuple(b.sessions) + tuple(hand)) for b, hand in zip(buildings, dealt)
    )
