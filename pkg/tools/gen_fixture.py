#!/usr/bin/env python3
"""Regenerate the bundled example community (src/temgrid/fixtures/community.json).

Four office-scale buildings on one March day: shared wholesale-shaped import
tariff, flat export and grid-use tariffs, 90 kWh / 45 kW batteries, and six
EV sessions per building dealt from a pool of thirty sampled profiles. Net
loads are synthetic but sized like the reference campus (roughly 500 MWh/yr
demand, PV covering about half of it on a clear day).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "src" / "temgrid" / "fixtures" / "community.json"

# wholesale-like hourly shape, later scaled to a 122.8 EUR/MWh mean
IMPORT_SHAPE = np.array(
    [105, 98, 93, 90, 89, 92, 103, 118, 132, 138, 135, 128,
     120, 115, 112, 114, 120, 128, 138, 145, 148, 140, 126, 112],
    dtype=float,
)


def occupancy(h: float) -> float:
    """0..1 office occupancy: ramps up 7-9, lunch dip, ramps down 17-20."""
    up = 1.0 / (1.0 + math.exp(-(h - 8.0) * 1.8))
    down = 1.0 / (1.0 + math.exp((h - 18.5) * 1.6))
    dip = 1.0 - 0.12 * math.exp(-((h - 13.0) ** 2) / 2.0)
    return up * down * dip


def pv_shape(h: float) -> float:
    """Clear-sky bell between 7h and 19h (March daylight)."""
    if h <= 7.0 or h >= 19.0:
        return 0.0
    return math.sin(math.pi * (h - 7.0) / 12.0) ** 1.2


def building_series(base_kw, work_kw, pv_peak_kw, cloud):
    hours = np.arange(24) + 0.5
    demand = base_kw + work_kw * np.array([occupancy(h) for h in hours])
    pv = pv_peak_kw * np.array([pv_shape(h) * c for h, c in zip(hours, cloud)])
    return np.round(demand, 1), np.round(pv, 1)


def main() -> None:
    clear = np.ones(24)
    morning_clouds = np.where(np.arange(24) < 12, 0.75, 1.0)
    overcast = np.full(24, 0.45)
    buildings_raw = [
        # name, base, work, pv_peak, cloudiness
        ("B1", 38.0, 60.0, 150.0, clear),
        ("B2", 35.0, 52.0, 165.0, morning_clouds),
        ("B3", 46.0, 82.0, 150.0, overcast),
        ("B4", 30.0, 36.0, 165.0, clear),
    ]

    c_ig = np.round(IMPORT_SHAPE * (122.8 / IMPORT_SHAPE.mean()), 1)
    shape = c_ig / c_ig.mean()
    doc = {
        "time": {"step_hours": 1.0, "steps": 24, "start_hour_of_day": 0.0},
        "tariffs": {
            "grid_import_eur_mwh": list(c_ig),
            "grid_export_eur_mwh": -35.8,
            "grid_use_eur_mwh": 50.0,
            "parking_eur_h": 0.5,
            "flexibility_eur_h": -0.5,
            "charge_eur_h": list(np.round(2.0 * shape, 3)),
            "discharge_eur_h": list(np.round(-3.0 * shape, 3)),
        },
        "buildings": [],
    }

    import sys

    sys.path.insert(0, str(ROOT / "src"))
    from temgrid.domain import BatterySpec, BuildingAssets, TimeGrid, split_net_load
    from temgrid.scenario_io import DEFAULT_EV_REQUEST_STATS, assign_sessions, sample_sessions

    time = TimeGrid(1.0, 24, 0.0)
    pool = sample_sessions(DEFAULT_EV_REQUEST_STATS, count=30, seed=42, time=time, id_prefix="ev")
    shells = [
        BuildingAssets(name, split_net_load(np.zeros(24)), BatterySpec.none()) for name, *_ in buildings_raw
    ]
    dealt = assign_sessions(pool, shells, per_building=6, seed=7)

    for (name, base, work, peak, cloud), shell in zip(buildings_raw, dealt):
        demand, pv = building_series(base, work, peak, cloud)
        doc["buildings"].append(
            {
                "name": name,
                "net_load_kw": {"demand_kw": list(demand), "pv_kw": list(pv)},
                "battery": {
                    "capacity_kwh": 90.0,
                    "max_charge_kw": 45.0,
                    "max_discharge_kw": 45.0,
                    "one_way_efficiency": 0.95,
                    "soc_min": 0.1,
                    "soc_max": 0.9,
                    "soc_initial": 0.2,
                },
                "ev_sessions": [
                    {
                        "id": s.id,
                        "arrival_step": s.arrival_step,
                        "parking_hours": s.parking_hours,
                        "requested_charge_hours": s.requested_charge_hours,
                        "max_discharge_hours": s.max_discharge_hours,
                        "max_charge_kw": s.max_charge_kw,
                        "max_discharge_kw": s.max_discharge_kw,
                        "charger_efficiency": s.charger_efficiency,
                    }
                    for s in shell.sessions
                ],
            }
        )

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    # sanity: report surplus/deficit overlap so the community market has work to do
    nets = {b["name"]: np.array(b["net_load_kw"]["demand_kw"]) - np.array(b["net_load_kw"]["pv_kw"]) for b in doc["buildings"]}
    overlap = [
        h for h in range(24) if any(n[h] < 0 for n in nets.values()) and any(n[h] > 0 for n in nets.values())
    ]
    print(f"wrote {OUT}")
    print(f"overlap steps (some surplus, some deficit): {overlap}")
    for name, n in nets.items():
        print(f"  {name}: deficit {n[n > 0].sum():7.1f} kWh, surplus {-n[n < 0].sum():7.1f} kWh")


if __name__ == "__main__":
    main()
