"""Day-ahead dispatch optimization for transactive energy communities.

Pipeline: :func:`~temgrid.scenario_io.load_scenario` ->
:func:`~temgrid.tariffs.price_community` -> :func:`~temgrid.model.build` ->
:func:`~temgrid.solver.solve` -> :mod:`~temgrid.reporting`.
"""

from .domain import (
    BatterySpec,
    BuildingAssets,
    CommunityScenario,
    EVSession,
    SolverOptions,
    TariffBook,
    TimeGrid,
    split_net_load,
    validate_scenario,
)
from .model import MilpModel, build
from .scenario_io import bundled_scenario_path, load_scenario, write_scenario
from .solver import DispatchSolution, solve, solve_lp, verify
from .tariffs import CommunityPrices, price_community

__version__ = "0.1.0"

__all__ = [
    "TimeGrid",
    "BatterySpec",
    "EVSession",
    "TariffBook",
    "BuildingAssets",
    "CommunityScenario",
    "SolverOptions",
    "split_net_load",
    "validate_scenario",
    "CommunityPrices",
    "price_community",
    "MilpModel",
    "build",
    "solve",
    "solve_lp",
    "verify",
    "DispatchSolution",
    "load_scenario",
    "write_scenario",
    "bundled_scenario_path",
    "__version__",
]
