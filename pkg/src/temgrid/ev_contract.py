"""Period accounting and revenue for the EV parking/charging contract.

The building charges for parking time, rewards idle (flexibility) time,
earns a per-hour fee for charging service and pays a per-hour reward for
discharging service. All periods are expressed as full-power-equivalent
hours: a step spent charging at half the rated power contributes half a
step of used period. Any discharged period must be compensated by extra
charging before the EV leaves, grossed up for converter losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import ContractViolation, DomainError, EVSession, TariffBook, TimeGrid

__all__ = [
    "SessionLedger",
    "used_period",
    "required_total_charge_hours",
    "ledger_from_powers",
    "session_revenue",
]

#: tolerance for the prefix / nonnegativity checks on solved dispatches
PERIOD_TOL = 1e-6


@dataclass(frozen=True)
class SessionLedger:
    """Per-step used periods of one session plus the derived totals (hours)."""

    session_id: str
    parking_hours: float
    used_charge_hours: np.ndarray
    used_discharge_hours: np.ndarray

    @property
    def total_charge_hours(self) -> float:
        return float(self.used_charge_hours.sum())

    @property
    def total_discharge_hours(self) -> float:
        return float(self.used_discharge_hours.sum())

    @property
    def idle_hours(self) -> float:
        return self.parking_hours - self.total_charge_hours - self.total_discharge_hours


def used_period(power_kw: float, max_power_kw: float, step_hours: float) -> float:
    """Full-power-equivalent hours used by running at ``power_kw`` for one step."""
    if power_kw < 0:
        raise DomainError(f"power {power_kw} kW must be >= 0")
    if max_power_kw <= 0:
        if power_kw > 0:
            raise DomainError(f"power {power_kw} kW with a {max_power_kw} kW cap")
        return 0.0
    return (power_kw / max_power_kw) * step_hours


def required_total_charge_hours(
    requested_hours: float,
    total_discharge_hours: float,
    efficiency: float,
    mode: str = "paper-literal",
) -> float:
    """Total charging hours owed: the request plus compensation for discharge.

    ``paper-literal`` grosses the discharged period up by one conversion loss;
    ``round-trip`` charges both conversions to the compensation.
    """
    if requested_hours < 0 or total_discharge_hours < 0:
        raise DomainError("periods must be >= 0")
    if not 0.0 < efficiency <= 1.0:
        raise DomainError(f"efficiency {efficiency} outside (0, 1]")
    if mode == "paper-literal":
        return requested_hours + total_discharge_hours / efficiency
    if mode == "round-trip":
        return requested_hours + total_discharge_hours / (efficiency * efficiency)
    raise DomainError(f"unknown compensation mode {mode!r}")


def ledger_from_powers(
    session: EVSession,
    charge_kw,
    discharge_kw,
    time: TimeGrid,
    tol: float = PERIOD_TOL,
) -> SessionLedger:
    """Build the period ledger of a session from its solved per-step powers.

    ``charge_kw``/``discharge_kw`` are full-horizon series. Rejects dispatches
    that discharge more than was charged up to any step (the EV may never dip
    below its arrival state of charge) or that exceed the user's discharge
    budget.
    """
    charge = np.asarray(charge_kw, dtype=float)
    discharge = np.asarray(discharge_kw, dtype=float)
    up = np.array([used_period(max(p, 0.0), session.max_charge_kw, time.step_hours) for p in charge])
    down = np.array([used_period(max(p, 0.0), session.max_discharge_kw, time.step_hours) for p in discharge])

    prefix_gap = np.cumsum(down) - np.cumsum(up)
    if prefix_gap.max(initial=0.0) > tol:
        step = int(np.argmax(prefix_gap > tol))
        raise ContractViolation(
            f"session {session.id}: discharged {prefix_gap.max():.6f} h more than charged by step {step}"
        )
    if down.sum() > session.max_discharge_hours + tol:
        raise ContractViolation(
            f"session {session.id}: used {down.sum():.6f} h of a {session.max_discharge_hours} h discharge budget"
        )
    return SessionLedger(session.id, session.parking_hours, up, down)


def session_revenue(
    session: EVSession,
    ledger: SessionLedger,
    tariffs: TariffBook,
    time: TimeGrid,
    tol: float = PERIOD_TOL,
) -> float:
    """Building-side income (EUR) of one parked session.

    Parking pays per parked hour; idle hours earn the (negative) flexibility
    reward; each used charge/discharge hour settles at that step's contract
    tariff. Positive results are income to the building.
    """
    idle = ledger.idle_hours
    if idle < -tol:
        raise ContractViolation(f"session {session.id}: idle period {idle:.6f} h is negative")
    return float(
        session.parking_hours * tariffs.parking_eur_per_hour
        + idle * tariffs.flexibility_eur_per_hour
        + ledger.used_charge_hours @ tariffs.charge_eur_per_hour
        + ledger.used_discharge_hours @ tariffs.discharge_eur_per_hour
    )
