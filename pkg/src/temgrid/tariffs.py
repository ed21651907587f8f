"""Community exchange price formation.

The community operator posts, for every step, an export tariff (paid to
buildings feeding surplus into the community pool) and an import tariff
(charged to buildings drawing from the pool). Both are affine in the
surplus ratio -- the share of the aggregate deficit that the aggregate
surplus can cover -- and by construction stay inside the regulatory band:

    grid_use - grid_import  <=  export tariff  <=  grid_export
    grid_use - export       <=  import tariff  <=  grid_import

Prices depend only on the baseline net loads, so they are fixed before any
optimization runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import CommunityScenario, DomainError, _series

__all__ = ["CommunityPrices", "surplus_ratio", "export_tariff", "import_tariff", "price_community"]


@dataclass(frozen=True)
class CommunityPrices:
    """Per-step surplus ratio and the two community tariffs (EUR/kWh)."""

    surplus_ratio: np.ndarray
    export_eur_per_kwh: np.ndarray
    import_eur_per_kwh: np.ndarray

    def __post_init__(self):
        for name in ("surplus_ratio", "export_eur_per_kwh", "import_eur_per_kwh"):
            object.__setattr__(self, name, _series(getattr(self, name)))

    def energy_weighted_means(self, total_deficit_kw, total_surplus_kw) -> tuple[float, float]:
        """Daily average tariffs, weighted by the energy that trades at them.

        The export tariff is weighted by aggregate surplus, the import tariff
        by aggregate deficit; a zero-energy day falls back to plain means.
        Returns ``(export_mean, import_mean)`` in EUR/kWh.
        """
        sur = np.asarray(total_surplus_kw, dtype=float)
        dem = np.asarray(total_deficit_kw, dtype=float)
        exp_mean = (
            float(np.average(self.export_eur_per_kwh, weights=sur))
            if sur.sum() > 0
            else float(self.export_eur_per_kwh.mean())
        )
        imp_mean = (
            float(np.average(self.import_eur_per_kwh, weights=dem))
            if dem.sum() > 0
            else float(self.import_eur_per_kwh.mean())
        )
        return exp_mean, imp_mean


def surplus_ratio(total_deficit_kw: float, total_surplus_kw: float, denominator: str = "gap") -> float:
    """Share of the community deficit covered by the community surplus, in [0, 1].

    With the default ``gap`` denominator the ratio is
    ``surplus / (deficit - surplus)``; once the surplus reaches half the
    deficit the community is treated as saturated and the ratio clamps to 1.
    ``denominator="deficit"`` uses the plain ``surplus / deficit`` share
    instead (kept as a sensitivity switch).
    """
    if total_deficit_kw < 0 or total_surplus_kw < 0:
        raise DomainError(
            f"aggregate loads must be >= 0, got deficit={total_deficit_kw}, surplus={total_surplus_kw}"
        )
    if denominator == "gap":
        denom = total_deficit_kw - total_surplus_kw
    elif denominator == "deficit":
        denom = total_deficit_kw
    else:
        raise DomainError(f"unknown surplus-ratio denominator {denominator!r}")
    if denom <= 0.0:
        return 1.0
    return min(max(total_surplus_kw / denom, 0.0), 1.0)


def export_tariff(ratio: float, c_g: float, c_ig: float, c_eg: float) -> float:
    """Community export tariff: interpolates from (use - import) to the grid export tariff."""
    if not 0.0 <= ratio <= 1.0:
        raise DomainError(f"ratio {ratio} outside [0, 1]")
    return (1.0 - ratio) * (c_g - c_ig) + ratio * c_eg


def import_tariff(ratio: float, c_g: float, c_ig: float, c_ec: float) -> float:
    """Community import tariff, anchored at the grid import tariff for ratio 0."""
    if not 0.0 <= ratio <= 1.0:
        raise DomainError(f"ratio {ratio} outside [0, 1]")
    return c_ig + ratio * (c_g - c_ec - c_ig)


def price_community(scenario: CommunityScenario) -> CommunityPrices:
    """Compute per-step community tariffs from the scenario's baseline loads."""
    total_deficit = sum(b.net_load.deficit_kw for b in scenario.buildings)
    total_surplus = sum(b.net_load.surplus_kw for b in scenario.buildings)
    tar = scenario.tariffs
    denom = scenario.options.surplus_ratio_denominator

    H = scenario.time.steps
    ratio = np.empty(H)
    c_ec = np.empty(H)
    c_ic = np.empty(H)
    for h in range(H):
        r = surplus_ratio(float(total_deficit[h]), float(total_surplus[h]), denom)
        e = export_tariff(r, tar.grid_use_eur_per_kwh[h], tar.grid_import_eur_per_kwh[h], tar.grid_export_eur_per_kwh[h])
        ratio[h] = r
        c_ec[h] = e
        c_ic[h] = import_tariff(r, tar.grid_use_eur_per_kwh[h], tar.grid_import_eur_per_kwh[h], e)
    return CommunityPrices(ratio, c_ec, c_ic)
