"""
Reader and writer for the line-oriented case-file format.

File layout:
- '#' lines are comments; a comment whose text starts with a section title
  opens that section
- records are whitespace separated numbers
- sections appear in a fixed order: lines, bus types, generators, loads,
  measurements, cost constraint, attacker resources, delta load, overload
  spec, and an optional trailing slack bus section
- percentages are written as whole numbers ("20") and stored as fractions
- a cost constraint of -1 means "use the pre-attack SCOPF cost"
"""

import logging
import re
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Dict, List, Tuple

from pydantic import ValidationError

from app.schemas.grid import AttackerLimits, GridCase
from app.utils.errors import CaseFormatError, CaseValidationError

logger = logging.getLogger(__name__)

# (key, title pattern, header written by serialize_case, record width)
SECTIONS: List[Tuple[str, re.Pattern, str, int]] = [
    ("lines", re.compile(r"topology", re.I),
     "# Topology (Line) Information\n# (line no, from bus, to bus, admittance, capacity)", 5),
    ("buses", re.compile(r"bus types", re.I),
     "# Bus Types (bus no, is generator?, is load?)", 3),
    ("generators", re.compile(r"generator information", re.I),
     "# Generator Information (bus no, max generation, min generation, cost coefficients alpha, beta)", 5),
    ("loads", re.compile(r"load information", re.I),
     "# Load Information (bus no, current load, max load, min load)", 4),
    ("measurements", re.compile(r"measurement information", re.I),
     "# Measurement Information (measurement no, measurement taken?, secured?, can attacker alter?)", 4),
    ("cost", re.compile(r"cost constraint", re.I),
     "# Cost Constraint", 1),
    ("resources", re.compile(r"attacker'?s resource", re.I),
     "# Attacker's Resource Limitation (measurements, buses)", 2),
    ("delta_load", re.compile(r"maximum percent of delta load", re.I),
     "# Maximum percent of delta load", 1),
    ("overload", re.compile(r"% of minimum overloading", re.I),
     "# % of minimum Overloading amount, % of lines to be overloaded", 2),
    ("slack", re.compile(r"slack bus", re.I),
     "# Slack Bus", 1),
]

SINGLE_RECORD = {"cost", "resources", "delta_load", "overload", "slack"}
OPTIONAL = {"slack"}
PERCENT_SECTIONS = {"delta_load", "overload"}


def _section_of(comment: str) -> int:
    """Return the SECTIONS position a comment opens, or -1."""
    text = comment.lstrip("#").strip()
    for position, (_, pattern, _, _) in enumerate(SECTIONS):
        if pattern.match(text):
            return position
    return -1


def _number(token: str, line_number: int, section: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise CaseFormatError(line_number, section, f"'{token}' is not a number")


def _fraction_of_percent(token: str, line_number: int, section: str) -> float:
    """Parse a percent exactly, so written fractions read back bit for bit."""
    try:
        return float(Fraction(token) / 100)
    except (ValueError, ZeroDivisionError):
        raise CaseFormatError(line_number, section, f"'{token}' is not a number")


def _integer(value: float, line_number: int, section: str) -> int:
    if value != int(value):
        raise CaseFormatError(line_number, section, f"expected an integer, found {value}")
    return int(value)


def _flag(value: float, line_number: int, section: str) -> bool:
    if value not in (0, 1):
        raise CaseFormatError(line_number, section, f"expected a 0/1 flag, found {value}")
    return bool(value)


def _split_sections(text: str) -> Dict[str, List[Tuple[int, List[float]]]]:
    records: Dict[str, List[Tuple[int, List[float]]]] = {}
    current = -1

    for line_number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue

        if stripped.startswith("#"):
            position = _section_of(stripped)
            if position < 0:
                continue
            if position <= current:
                raise CaseFormatError(
                    line_number, SECTIONS[position][0], "section out of order or repeated"
                )
            current = position
            records[SECTIONS[position][0]] = []
            continue

        if current < 0:
            raise CaseFormatError(line_number, "preamble", "record before the first section")

        key, _, _, width = SECTIONS[current]
        tokens = stripped.split()
        if len(tokens) != width:
            raise CaseFormatError(
                line_number, key, f"expected {width} fields, found {len(tokens)}"
            )
        if key in SINGLE_RECORD and records[key]:
            raise CaseFormatError(line_number, key, "section takes a single record")
        read = _fraction_of_percent if key in PERCENT_SECTIONS else _number
        records[key].append((line_number, [read(t, line_number, key) for t in tokens]))

    for key, _, _, _ in SECTIONS:
        if key in OPTIONAL:
            continue
        if key not in records:
            raise CaseFormatError(0, key, "section missing")
        if key in SINGLE_RECORD and not records[key]:
            raise CaseFormatError(0, key, "section has no record")
    return records


def parse_case(text: str) -> GridCase:
    """
    Parse case-file text into a validated GridCase.

    Args:
        text: Contents of a case file

    Returns:
        GridCase with every invariant checked

    Raises:
        CaseFormatError: A record is malformed (reports line number and section)
        CaseValidationError: The case violates a grid invariant
    """
    records = _split_sections(text)

    lines = []
    for n, values in records["lines"]:
        lines.append(dict(
            id=_integer(values[0], n, "lines"),
            from_bus=_integer(values[1], n, "lines"),
            to_bus=_integer(values[2], n, "lines"),
            admittance=values[3],
            capacity=values[4],
        ))

    buses = [
        dict(
            id=_integer(values[0], n, "buses"),
            is_generator=_flag(values[1], n, "buses"),
            is_load=_flag(values[2], n, "buses"),
        )
        for n, values in records["buses"]
    ]

    generators = [
        dict(bus=_integer(values[0], n, "generators"), p_max=values[1], p_min=values[2],
             alpha=values[3], beta=values[4])
        for n, values in records["generators"]
    ]

    loads = [
        dict(bus=_integer(values[0], n, "loads"), current=values[1], p_max=values[2],
             p_min=values[3])
        for n, values in records["loads"]
    ]

    measurements = [
        dict(
            index=_integer(values[0], n, "measurements"),
            taken=_flag(values[1], n, "measurements"),
            secured=_flag(values[2], n, "measurements"),
            accessible=_flag(values[3], n, "measurements"),
        )
        for n, values in records["measurements"]
    ]

    n_cost, (cost,) = records["cost"][0]
    n_res, (max_measurements, max_buses) = records["resources"][0]
    _, (delta_b,) = records["delta_load"][0]
    _, (delta_l, line_fraction) = records["overload"][0]
    if cost < 0 and cost != -1:
        raise CaseFormatError(n_cost, "cost", "cost constraint must be -1 or non-negative")

    slack_bus = 1
    if records.get("slack"):
        n_slack, (slack,) = records["slack"][0]
        slack_bus = _integer(slack, n_slack, "slack")

    try:
        case = GridCase(
            buses=buses,
            lines=lines,
            generators=generators,
            loads=loads,
            measurements=measurements,
            attacker_limits=AttackerLimits(
                max_measurements=_integer(max_measurements, n_res, "resources"),
                max_buses=_integer(max_buses, n_res, "resources"),
                delta_b=delta_b,
                delta_l=delta_l,
                target_line_fraction=line_fraction,
                cost_budget=None if cost == -1 else cost,
            ),
            slack_bus=slack_bus,
        )
    except ValidationError as exc:
        raise CaseValidationError(_summarize(exc))

    logger.debug(
        "Parsed case with %d buses, %d lines, %d generators",
        case.n_buses, case.n_lines, len(case.generators),
    )
    return case


def _summarize(exc: ValidationError) -> str:
    first = exc.errors()[0]
    location = ".".join(str(part) for part in first.get("loc", ()))
    message = first.get("msg", "invalid value").removeprefix("Value error, ")
    return f"{location}: {message}" if location else message


def _fmt(value: float) -> str:
    """Shortest text that reads back to the same float."""
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def _percent(fraction: float) -> str:
    """Shortest percent text that reads back to exactly `fraction`."""
    scaled = float(fraction) * 100
    for digits in range(1, 18):
        text = _fmt(float(format(scaled, f".{digits}g")))
        if float(Fraction(text) / 100) == fraction:
            return text
    # Every float is a finite decimal, so the exact expansion always reads back
    with localcontext() as context:
        context.prec = 800
        return format((Decimal(fraction) * 100).normalize(), "f")


def serialize_case(case: GridCase) -> str:
    """
    Write a GridCase in the case-file format.

    The output is deterministic and parses back to an equal GridCase.
    """
    limits = case.attacker_limits
    headers = {key: header for key, _, header, _ in SECTIONS}
    out: List[str] = []

    def section(key: str, rows: List[List[str]]) -> None:
        out.append(headers[key])
        out.extend("    ".join(row) for row in rows)

    section("lines", [
        [str(ln.id), str(ln.from_bus), str(ln.to_bus), _fmt(ln.admittance), _fmt(ln.capacity)]
        for ln in case.lines
    ])
    section("buses", [
        [str(bus.id), str(int(bus.is_generator)), str(int(bus.is_load))] for bus in case.buses
    ])
    section("generators", [
        [str(g.bus), _fmt(g.p_max), _fmt(g.p_min), _fmt(g.alpha), _fmt(g.beta)]
        for g in case.generators
    ])
    section("loads", [
        [str(d.bus), _fmt(d.current), _fmt(d.p_max), _fmt(d.p_min)] for d in case.loads
    ])
    section("measurements", [
        [str(m.index), str(int(m.taken)), str(int(m.secured)), str(int(m.accessible))]
        for m in case.measurements
    ])
    section("cost", [[_fmt(-1 if limits.cost_budget is None else limits.cost_budget)]])
    section("resources", [[str(limits.max_measurements), str(limits.max_buses)]])
    section("delta_load", [[_percent(limits.delta_b)]])
    section("overload", [[_percent(limits.delta_l), _percent(limits.target_line_fraction)]])
    if case.slack_bus != 1:
        section("slack", [[str(case.slack_bus)]])

    return "\n".join(out) + "\n"
