"""
Command-line front end.

Subcommands: powerflow, lodf, estimate, scopf, synthesize, verify, sweep and
fixtures. Reports go to stdout, diagnostics to stderr, and files are only
written under ``--out``.

Exit codes:
- 0: success, including a clean "unsat" verdict
- 1: usage error
- 2: input or validation error
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from app.config import get_settings
from app.schemas.grid import AttackerLimits, GridCase
from app.schemas.sweep import SweepSpec
from app.services import reports
from app.services.attack_synthesis import enumerate_attack_space, goal_from_case, synthesize
from app.services.case_parser import parse_case
from app.services.evaluation import compare_securing, run_sweep, write_comparison_csv, write_sweep_csvs
from app.services.fixtures import fixture_names, fixture_text
from app.services.lodf import compute_lodf
from app.services.powerflow import solve_powerflow
from app.services.scopf import solve_scopf
from app.services.state_estimation import estimate, simulate_measurements
from app.services.verification import verify
from app.utils.csv_output import money, write_atomic, write_frame
from app.utils.errors import GridThreatError
from app.utils.logging_setup import configure_logging

logger = logging.getLogger(__name__)

USAGE_ERROR = 1


class RunConfig(BaseModel):
    """Validated command-line overrides."""

    command: str
    case: Optional[Path] = None
    out: Optional[Path] = None
    max_buses: Optional[int] = Field(None, ge=0)
    max_measurements: Optional[int] = Field(None, ge=0)
    delta_b: Optional[float] = Field(None, ge=0, le=1)
    delta_l: Optional[float] = Field(None, ge=0, le=1)
    line_fraction: Optional[float] = Field(None, ge=0, le=1)
    cost_budget: Optional[float] = Field(None, ge=0)
    tau: Optional[float] = Field(None, gt=0)
    seed: Optional[int] = None
    workers: int = Field(1, ge=1)
    verbose: int = Field(0, ge=0)

    def apply(self, case: GridCase) -> GridCase:
        """Case with the attacker-limit overrides applied and re-validated."""
        updates = {
            "max_buses": self.max_buses,
            "max_measurements": self.max_measurements,
            "delta_b": self.delta_b,
            "delta_l": self.delta_l,
            "target_line_fraction": self.line_fraction,
            "cost_budget": self.cost_budget,
        }
        merged = case.attacker_limits.model_dump()
        merged.update({key: value for key, value in updates.items() if value is not None})
        return case.model_copy(update={"attacker_limits": AttackerLimits(**merged)})


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage error code."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v]


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v]


def _add_common(parser: argparse.ArgumentParser, case: bool = True) -> None:
    if case:
        parser.add_argument("--case", required=True, help="Case file, or a bundled fixture name")
    parser.add_argument("--out", type=Path, help="Directory for CSV outputs")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")


def _add_attacker(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-buses", type=int, help="T_B, compromised bus limit")
    parser.add_argument("--max-measurements", type=int, help="Altered measurement limit")
    parser.add_argument("--delta-b", type=float, help="Load change limit as a fraction (0.2 = 20%%)")
    parser.add_argument("--delta-l", type=float, help="Overload margin as a fraction of capacity")
    parser.add_argument("--line-fraction", type=float, help="Fraction of lines to overload")
    parser.add_argument("--cost-budget", type=float, help="Corrupted dispatch cost limit ($)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridthreat", description="FDI attack synthesis and verification against SCOPF")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    powerflow = commands.add_parser("powerflow", help="DC power flow at the SCOPF operating point")
    _add_common(powerflow)

    lodf = commands.add_parser("lodf", help="Line outage distribution factors")
    _add_common(lodf)

    est = commands.add_parser("estimate", help="WLS state estimation with bad data detection")
    _add_common(est)
    source = est.add_mutually_exclusive_group(required=True)
    source.add_argument("--measurements", type=Path, help="CSV with header 'index,value'")
    source.add_argument("--simulate", action="store_true", help="Meter the SCOPF operating point")
    est.add_argument("--noise-sigma", type=float, default=0.0, help="Gaussian noise for --simulate (pu)")
    est.add_argument("--tau", type=float, help="Bad data threshold on the residual norm")
    est.add_argument("--seed", type=int, help="Noise seed")

    scopf = commands.add_parser("scopf", help="Security-constrained optimal dispatch")
    _add_common(scopf)
    scopf.add_argument("--no-contingencies", action="store_true", help="Enforce base-case limits only")

    synth = commands.add_parser("synthesize", help="Search for a stealthy overload attack")
    _add_common(synth)
    _add_attacker(synth)
    synth.add_argument("--enumerate", action="store_true", help="Count the whole attack space")
    synth.add_argument("--workers", type=int, default=None, help="Worker processes")

    ver = commands.add_parser("verify", help="Replay an attack vector file")
    _add_common(ver)
    ver.add_argument("--attack", type=Path, required=True, help="attack.csv written by synthesize")
    ver.add_argument("--delta-l", type=float, help="Overload margin for confirmed overloads")

    sweep = commands.add_parser("sweep", help="Attack-space sweeps over attacker capabilities")
    _add_common(sweep)
    sweep.add_argument("--delta-b", type=_float_list, help="Comma separated load change fractions")
    sweep.add_argument("--delta-l", type=_float_list, help="Comma separated overload margins")
    sweep.add_argument("--line-fraction", type=_float_list, help="Comma separated line fractions")
    sweep.add_argument("--max-buses", type=_int_list, help="Comma separated T_B values")
    sweep.add_argument("--securing", default="none",
                       help="Comma separated policies: none, random:<n>, analytical:<k>")
    sweep.add_argument("--seed", type=int, default=0, help="First seed for randomized securing")
    sweep.add_argument("--repetitions", type=int, default=20, help="Seeds per randomized policy")
    sweep.add_argument("--compare", type=_int_list, help="Also compare securing for these top-k bus counts")
    sweep.add_argument("--workers", type=int, default=None, help="Worker processes")

    fixtures = commands.add_parser("fixtures", help="Write or list the bundled cases")
    _add_common(fixtures, case=False)
    fixtures.add_argument("--emit", help="Fixture name to write")
    fixtures.add_argument("--list", action="store_true", help="List fixture names")

    return parser


def load_case(reference: str) -> GridCase:
    """
    Read a case file; a bare fixture name falls back to the bundled case.

    Raises:
        GridThreatError: The file is missing or unreadable
    """
    path = Path(reference)
    if path.is_file():
        try:
            return parse_case(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise GridThreatError(f"cannot read case file {path}: {exc.strerror}")
    if path.stem in fixture_names() and path.parent == Path("."):
        logger.info("Using bundled fixture %s", path.stem)
        return parse_case(fixture_text(path.stem))
    raise GridThreatError(f"case file {reference} not found")


def _config(args: argparse.Namespace) -> RunConfig:
    def single(name: str):
        # sweep takes comma separated grids for the same flags
        return None if args.command == "sweep" else getattr(args, name, None)

    return RunConfig(
        command=args.command,
        out=args.out,
        max_buses=single("max_buses"),
        max_measurements=single("max_measurements"),
        delta_b=single("delta_b"),
        delta_l=single("delta_l"),
        line_fraction=single("line_fraction"),
        cost_budget=single("cost_budget"),
        tau=getattr(args, "tau", None),
        seed=getattr(args, "seed", None),
        workers=getattr(args, "workers", None) or get_settings().workers,
        verbose=args.verbose,
    )


def _run_powerflow(args, config: RunConfig) -> int:
    case = load_case(args.case)
    pre = solve_scopf(case)
    state = solve_powerflow(case, pre.dispatch, case.load_vector())
    frame = reports.flow_frame(case, state)
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.6f}"))
    if config.out:
        write_frame(config.out / "flows.csv", frame)
    return 0


def _run_lodf(args, config: RunConfig) -> int:
    case = load_case(args.case)
    lodf = compute_lodf(case)
    frame = reports.lodf_frame(lodf)
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.6f}"))
    if lodf.islanding_outages():
        print(f"Islanding outages: {list(lodf.islanding_outages())}")
    if config.out:
        write_atomic(config.out / "lodf.csv",
                     frame.to_csv(index=False, float_format="%.6f", na_rep="nan", lineterminator="\n"))
    return 0


def _run_estimate(args, config: RunConfig) -> int:
    case = load_case(args.case)
    if args.simulate:
        pre = solve_scopf(case)
        z = simulate_measurements(case, pre.flows, args.noise_sigma, config.seed)
        if config.out:
            write_frame(config.out / "measurements.csv", reports.measurement_frame(z), "%.9f")
    else:
        z = reports.read_measurements(args.measurements)

    result = estimate(case, z, tau=config.tau)
    print(reports.estimation_text(result))
    if config.out:
        buses = [j for j in range(1, case.n_buses + 1) if j != case.slack_bus]
        frame = pd.DataFrame({"bus": buses, "theta": result.x_hat})
        write_frame(config.out / "estimate.csv", frame)
    return 0


def _run_scopf(args, config: RunConfig) -> int:
    case = load_case(args.case)
    solution = solve_scopf(case, contingencies=not args.no_contingencies)
    print(reports.scopf_text(solution))
    if config.out:
        reports.write_scopf(config.out, solution)
    return 0


def _run_synthesize(args, config: RunConfig) -> int:
    case = config.apply(load_case(args.case))
    lodf = compute_lodf(case)
    pre = solve_scopf(case, lodf=lodf)
    goal = goal_from_case(case, pre)
    print(f"Pre-attack cost: ${money(pre.cost)}; goal: {goal.min_overload_pairs} pair(s) "
          f"over {100 * goal.overload_margin:.2f}% above capacity, budget ${money(goal.cost_budget)}")

    result = synthesize(case, pre, goal, lodf, workers=config.workers)
    print(reports.synthesis_text(result))
    if config.out:
        write_atomic(config.out / "report.txt", reports.synthesis_text(result) + "\n")
        if result.attack is not None:
            reports.write_attack_csv(config.out / "attack.csv", result.attack)
            write_frame(config.out / "overloads.csv", reports.overload_frame(result.attack))

    if args.enumerate:
        vectors = enumerate_attack_space(case, pre, goal, lodf, workers=config.workers)
        print(f"Attack space: {len(vectors)} vectors")
        if config.out:
            frame = pd.DataFrame([
                {
                    "explored_buses": " ".join(str(b) for b in v.explored_buses),
                    "anchor_line": v.anchor[0],
                    "anchor_outage": v.anchor[1],
                    "anchor_sign": v.anchor[2],
                    "compromised": " ".join(str(b) for b in v.compromised_buses()),
                    "overload_pairs": len(v.overload_pairs),
                    "corrupted_cost": v.corrupted_cost,
                }
                for v in vectors
            ])
            write_frame(config.out / "attack_space_vectors.csv", frame, "%.2f")
    return 0


def _run_verify(args, config: RunConfig) -> int:
    case = load_case(args.case)
    lodf = compute_lodf(case)
    pre = solve_scopf(case, lodf=lodf)
    attack = reports.read_attack_csv(args.attack)
    report = verify(case, pre, attack, lodf, margin=config.delta_l)
    print(reports.verification_text(report))
    if config.out:
        write_frame(config.out / "verification.csv", reports.verification_frame(report))
    return 0


def _run_sweep(args, config: RunConfig) -> int:
    case = load_case(args.case)
    limits = case.attacker_limits
    spec = SweepSpec(
        delta_b=tuple(args.delta_b or (limits.delta_b,)),
        delta_l=tuple(args.delta_l or (limits.delta_l,)),
        line_fraction=tuple(args.line_fraction or (limits.target_line_fraction,)),
        max_buses=tuple(args.max_buses or (limits.max_buses,)),
        securing=tuple(p.strip() for p in args.securing.split(",") if p.strip()),
        seeds=tuple(range(args.seed, args.seed + args.repetitions)),
    )
    result = run_sweep(case, spec, config.workers)
    for cell in result.cells:
        status = cell.error or str(cell.attack_space)
        print(f"delta_b={cell.delta_b:.2f} delta_l={cell.delta_l:.2f} fraction={cell.line_fraction:.2f} "
              f"T_B={cell.max_buses} {cell.policy}{'' if cell.seed is None else f' seed={cell.seed}'}: {status}")
    if config.out:
        write_sweep_csvs(result, config.out)

    if args.compare:
        point = (spec.delta_b[0], spec.delta_l[0], spec.line_fraction[0], spec.max_buses[0])
        comparisons = compare_securing(case, point, args.compare, spec.seeds, config.workers)
        for c in comparisons:
            print(f"top {c.top_buses} buses ({c.secured_count} measurements): analytical "
                  f"{c.analytical}, random mean {c.random_mean:.2f}, baseline {c.baseline}")
        if config.out:
            write_comparison_csv(comparisons, config.out / "securing_comparison.csv")
    return 0


def _run_fixtures(args, config: RunConfig) -> int:
    if args.list or not args.emit:
        print("\n".join(fixture_names()))
        return 0
    text = fixture_text(args.emit)
    if config.out:
        write_atomic(config.out / f"{args.emit}.grid", text)
    else:
        sys.stdout.write(text)
    return 0


HANDLERS = {
    "powerflow": _run_powerflow,
    "lodf": _run_lodf,
    "estimate": _run_estimate,
    "scopf": _run_scopf,
    "synthesize": _run_synthesize,
    "verify": _run_verify,
    "sweep": _run_sweep,
    "fixtures": _run_fixtures,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        Process exit code (0 success, 1 usage error, 2 input error)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    level = {0: get_settings().log, 1: "INFO"}.get(args.verbose, "DEBUG")
    configure_logging(level)

    try:
        config = _config(args)
        return HANDLERS[args.command](args, config)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first.get("loc", ()))
        print(f"error: {location}: {first.get('msg')}", file=sys.stderr)
        return 2
    except GridThreatError as exc:
        print(f"error: {exc.detail}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 2
