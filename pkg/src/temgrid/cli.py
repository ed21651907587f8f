"""Command line front end: load -> price -> build -> solve -> verify -> report.

Subcommands map to pipeline stages so each is exercisable on its own:

    temgrid validate scenario.json
    temgrid price scenario.json -o out/
    temgrid run scenario.json --modes baseline,individual,community -o out/
    temgrid sample-evs --count 30 --seed 42 --per-building 6 --buildings 4
    temgrid dump-lp scenario.json --mode community -o model.lp

Exit codes: 0 success, 1 scenario validation failure, 2 solver limit,
3 parse or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .domain import MODES, SolverLimitError
from .model import build, write_lp
from .reporting import export_dispatch_csv, export_prices_csv, summarize
from .scenario_io import (
    DEFAULT_EV_REQUEST_STATS,
    ScenarioFormatError,
    ScenarioValidationError,
    load_scenario,
    sample_sessions,
)
from .solver import solve, verify
from .tariffs import price_community

__all__ = ["RunConfig", "run", "main"]

EXIT_OK, EXIT_INVALID, EXIT_LIMIT, EXIT_IO = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    """Everything one ``temgrid run`` invocation needs."""

    scenario_path: str
    modes: tuple[str, ...] = MODES
    output_dir: str = "out"
    seed: int | None = None
    option_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.modes:
            raise ValueError("at least one run mode is required")
        unknown = set(self.modes) - set(MODES)
        if unknown:
            raise ValueError(f"unknown modes {sorted(unknown)}")


def run(config: RunConfig) -> int:
    """Execute the pipeline and write all artifacts; returns the exit code."""
    try:
        scenario = load_scenario(config.scenario_path)
    except ScenarioValidationError as exc:
        for v in exc.violations:
            print(f"invalid: {v}", file=sys.stderr)
        return EXIT_INVALID
    except ScenarioFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    if config.option_overrides:
        scenario = scenario.with_options(**config.option_overrides)
    if config.seed is not None:
        scenario = _reseed_sessions(scenario, config.seed)

    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    prices = price_community(scenario)
    export_prices_csv(prices, out / "prices.csv")

    def run_mode(mode: str):
        model = build(scenario, prices, mode)
        solution = solve(model, scenario.options)
        report = verify(model, solution, scenario.options)
        return mode, solution, report

    hit_limit = False
    solutions = {}
    try:
        with ThreadPoolExecutor(max_workers=len(config.modes)) as pool:
            for mode, solution, report in pool.map(run_mode, config.modes):
                solutions[mode] = solution
                export_dispatch_csv(solution, out / f"dispatch_{mode}.csv")
                if solution.status == "limit":
                    hit_limit = True
                    print(f"{mode}: stopped at the node/time limit, best incumbent kept", file=sys.stderr)
                if not report.ok:
                    print(f"{mode}: verification flagged {report.flagged_families}", file=sys.stderr)
                print(
                    f"{mode}: objective {solution.objective_eur:.2f} EUR, "
                    f"{solution.lp_iterations} simplex iterations, {solution.branch_nodes} branch nodes"
                )
    except SolverLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LIMIT

    if set(config.modes) == set(MODES):
        table = summarize(solutions["baseline"], solutions["individual"], solutions["community"], prices)
        (out / "costs.txt").write_text(table.to_text() + "\n", encoding="utf-8")
        (out / "costs.json").write_text(json.dumps(table.to_dict(), indent=2) + "\n", encoding="utf-8")
        print(table.to_text())

    exp_mean, imp_mean = prices.energy_weighted_means(
        sum(b.net_load.deficit_kw for b in scenario.buildings),
        sum(b.net_load.surplus_kw for b in scenario.buildings),
    )
    print(f"community tariffs (energy-weighted): export {exp_mean * 1000:.2f}, import {imp_mean * 1000:.2f} EUR/MWh")
    return EXIT_LIMIT if hit_limit else EXIT_OK


def _reseed_sessions(scenario, seed: int):
    """Replace every building's sessions with fresh draws from the default stats."""
    buildings = []
    for i, bld in enumerate(scenario.buildings):
        sessions = sample_sessions(
            DEFAULT_EV_REQUEST_STATS,
            count=len(bld.sessions),
            seed=seed + i,
            time=scenario.time,
            id_prefix=f"{bld.name}-ev",
        )
        buildings.append(replace(bld, sessions=tuple(sessions)))
    return replace(scenario, buildings=tuple(buildings))


# ---------------------------------------------------------------------------
# argument parsing


def _add_option_flags(p: argparse.ArgumentParser):
    p.add_argument("--comp-tol", type=float, help="complementarity tolerance in kW")
    p.add_argument("--feas-tol", type=float, help="feasibility tolerance")
    p.add_argument("--compensation", choices=("paper-literal", "round-trip"), help="discharge compensation mode")
    p.add_argument("--eq2-verbatim", action="store_true", help="price net-load residuals directly (no grid-flow variables)")
    p.add_argument("--terminal-soc", choices=("free", "restore"), help="battery end-of-day requirement")
    p.add_argument("--community-caps", choices=("nesting-safe", "as-written"), help="community exchange cap variant")
    p.add_argument("--time-limit", type=float, help="wall-clock limit per solve, seconds")


def _collect_overrides(args) -> dict:
    out = {}
    if args.comp_tol is not None:
        out["comp_tol"] = args.comp_tol
    if args.feas_tol is not None:
        out["feas_tol"] = args.feas_tol
    if args.compensation is not None:
        out["compensation_mode"] = args.compensation
    if args.eq2_verbatim:
        out["eq2_verbatim"] = True
    if args.terminal_soc is not None:
        out["terminal_soc"] = args.terminal_soc
    if args.community_caps is not None:
        out["community_caps"] = args.community_caps
    if args.time_limit is not None:
        out["time_limit_seconds"] = args.time_limit
    return out


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="temgrid", description="Day-ahead scheduling for a transactive energy community")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario file and list violations")
    v.add_argument("scenario")

    pr = sub.add_parser("price", help="compute community exchange tariffs")
    pr.add_argument("scenario")
    pr.add_argument("--out", "-o", default="out")

    r = sub.add_parser("run", help="solve the requested modes and write reports")
    r.add_argument("scenario")
    r.add_argument("--modes", default=",".join(MODES), help="comma-separated subset of baseline,individual,community")
    r.add_argument("--out", "-o", default="out")
    r.add_argument("--seed", type=int, help="resample every building's EV sessions with this seed")
    _add_option_flags(r)

    s = sub.add_parser("sample-evs", help="generate EV sessions as JSON")
    s.add_argument("--count", type=int, default=30)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--per-building", type=int, help="deal the pool round-robin to this many sessions per building")
    s.add_argument("--buildings", type=int, default=4)
    s.add_argument("--out", "-o", help="write JSON here instead of stdout")

    d = sub.add_parser("dump-lp", help="write one mode's linear relaxation in LP format")
    d.add_argument("scenario")
    d.add_argument("--mode", choices=MODES, default="community")
    d.add_argument("--out", "-o", default="model.lp")
    _add_option_flags(d)
    return p


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            scenario_or_code = _cmd_validate(args.scenario)
            return scenario_or_code
        if args.command == "price":
            return _cmd_price(args.scenario, args.out)
        if args.command == "run":
            return run(
                RunConfig(
                    scenario_path=args.scenario,
                    modes=tuple(m.strip() for m in args.modes.split(",") if m.strip()),
                    output_dir=args.out,
                    seed=args.seed,
                    option_overrides=_collect_overrides(args),
                )
            )
        if args.command == "sample-evs":
            return _cmd_sample(args)
        if args.command == "dump-lp":
            return _cmd_dump_lp(args)
    except ScenarioValidationError as exc:
        for v in exc.violations:
            print(f"invalid: {v}", file=sys.stderr)
        return EXIT_INVALID
    except (ScenarioFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SolverLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    raise AssertionError(f"unhandled command {args.command}")


def _cmd_validate(path: str) -> int:
    try:
        scenario = load_scenario(path)
    except ScenarioValidationError as exc:
        for v in exc.violations:
            print(f"invalid: {v}")
        return EXIT_INVALID
    print(f"ok: {len(scenario.buildings)} buildings, {scenario.time.steps} steps of {scenario.time.step_hours} h")
    return EXIT_OK


def _cmd_price(path: str, out_dir: str) -> int:
    scenario = load_scenario(path)
    prices = price_community(scenario)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_prices_csv(prices, out / "prices.csv")
    exp_mean, imp_mean = prices.energy_weighted_means(
        sum(b.net_load.deficit_kw for b in scenario.buildings),
        sum(b.net_load.surplus_kw for b in scenario.buildings),
    )
    print(f"wrote {out / 'prices.csv'}")
    print(f"energy-weighted means: export {exp_mean * 1000:.2f}, import {imp_mean * 1000:.2f} EUR/MWh")
    return EXIT_OK


def _cmd_sample(args) -> int:
    from .domain import TimeGrid

    sessions = sample_sessions(DEFAULT_EV_REQUEST_STATS, count=args.count, seed=args.seed, time=TimeGrid())
    if args.per_building:
        groups: list[list] = [[] for _ in range(args.buildings)]
        order = list(sessions)
        from .rng import Pcg64

        rng = Pcg64(args.seed)
        rng.shuffle(order)
        if args.per_building * args.buildings > len(order):
            print("error: not enough sessions for the requested assignment", file=sys.stderr)
            return EXIT_IO
        i = 0
        for _ in range(args.per_building):
            for g in groups:
                g.append(order[i])
                i += 1
        payload = {f"B{k + 1}": [s.__dict__ for s in g] for k, g in enumerate(groups)}
    else:
        payload = [s.__dict__ for s in sessions]
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


def _cmd_dump_lp(args) -> int:
    scenario = load_scenario(args.scenario)
    overrides = _collect_overrides(args)
    if overrides:
        scenario = scenario.with_options(**overrides)
    prices = price_community(scenario)
    model = build(scenario, prices, args.mode)
    write_lp(model, args.out)
    print(f"wrote {args.out}: {model.n_rows} rows, {model.n_vars} columns, {len(model.comp_pairs)} pairs")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
