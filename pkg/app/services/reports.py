"""
Text reports and CSV tables for the command-line front end.

Attack vectors round-trip through a two-column key/value CSV: array fields
are space separated, booleans are 0/1, and overload pairs are written as
``line:outage:flow:loading``.
"""

from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.schemas.attack import AttackVector, SynthesisResult
from app.schemas.dispatch import ScopfSolution
from app.schemas.estimation import EstimationResult, MeasurementVector
from app.schemas.grid import GridCase
from app.schemas.powerflow import LodfMatrix, PowerFlowState
from app.schemas.verification import VerificationReport
from app.utils.csv_output import (
    money,
    pu,
    read_key_values,
    read_table,
    write_frame,
    write_key_values,
)
from app.utils.errors import AttackInvariantError, CaseFormatError

_FLOAT_FIELDS = ("delta_theta", "delta_line", "delta_bus", "attacked_load", "corrupted_dispatch")
_FLAG_FIELDS = ("altered", "corrupted", "compromised")


def _floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def _flags(values) -> str:
    return " ".join(str(int(v)) for v in values)


# Attack vector files

def attack_rows(attack: AttackVector) -> List[Tuple[str, str]]:
    rows = [(name, _floats(getattr(attack, name))) for name in _FLOAT_FIELDS]
    rows += [(name, _flags(getattr(attack, name))) for name in _FLAG_FIELDS]
    rows.append(("corrupted_cost", repr(float(attack.corrupted_cost))))
    rows.append(("overload_pairs", " ".join(
        f"{p.line}:{p.outage}:{p.flow!r}:{p.loading_percent!r}" for p in attack.overload_pairs
    )))
    rows.append(("explored_buses", " ".join(str(b) for b in attack.explored_buses)))
    rows.append(("anchor", "" if attack.anchor is None else ":".join(str(v) for v in attack.anchor)))
    return rows


def write_attack_csv(path: Path, attack: AttackVector) -> Path:
    return write_key_values(path, attack_rows(attack))


def read_attack_csv(path: Path) -> AttackVector:
    """
    Read an attack vector written by ``write_attack_csv``.

    Raises:
        CaseFormatError: A field is missing or malformed
        AttackInvariantError: The fields do not form a valid vector
    """
    values = read_key_values(path)
    fields: Dict[str, object] = {}
    try:
        for name in _FLOAT_FIELDS:
            fields[name] = tuple(float(v) for v in values[name].split())
        for name in _FLAG_FIELDS:
            fields[name] = tuple(v == "1" for v in values[name].split())
        fields["corrupted_cost"] = float(values["corrupted_cost"])
        pairs = []
        for token in values.get("overload_pairs", "").split():
            line, outage, flow, loading = token.split(":")
            pairs.append(dict(line=int(line), outage=int(outage), flow=float(flow),
                              loading_percent=float(loading)))
        fields["overload_pairs"] = tuple(pairs)
        fields["explored_buses"] = tuple(int(b) for b in values.get("explored_buses", "").split())
        anchor = values.get("anchor", "")
        fields["anchor"] = tuple(int(v) for v in anchor.split(":")) if anchor else None
    except KeyError as exc:
        raise CaseFormatError(0, "attack", f"missing field {exc.args[0]}")
    except ValueError as exc:
        raise CaseFormatError(0, "attack", str(exc))

    try:
        return AttackVector(**fields)
    except ValidationError as exc:
        raise AttackInvariantError(exc.errors()[0].get("msg", "invalid attack vector"))


def overload_frame(attack: AttackVector) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "line": p.line,
                "outage": p.outage,
                "flow_pu": p.flow,
                "loading_percent": p.loading_percent,
                "excess_percent": p.excess_percent,
            }
            for p in attack.overload_pairs
        ],
        columns=["line", "outage", "flow_pu", "loading_percent", "excess_percent"],
    )


# Tables

def flow_frame(case: GridCase, state: PowerFlowState) -> pd.DataFrame:
    flows = state.flows()
    return pd.DataFrame({
        "line": [ln.id for ln in case.lines],
        "from_bus": [ln.from_bus for ln in case.lines],
        "to_bus": [ln.to_bus for ln in case.lines],
        "flow_pu": flows,
        "capacity_pu": [ln.capacity for ln in case.lines],
        "loading_percent": 100.0 * np.abs(flows) / np.array([ln.capacity for ln in case.lines]),
    })


def lodf_frame(lodf: LodfMatrix) -> pd.DataFrame:
    """Rows are monitored lines, columns tripped lines."""
    factors = lodf.as_array()
    frame = pd.DataFrame(factors, columns=[str(k) for k in range(1, factors.shape[1] + 1)])
    frame.insert(0, "line", range(1, factors.shape[0] + 1))
    return frame


def measurement_frame(z: MeasurementVector) -> pd.DataFrame:
    return pd.DataFrame({"index": z.indices, "value": z.values})


def read_measurements(path: Path) -> MeasurementVector:
    frame = read_table(path, "measurements")
    if list(frame.columns) != ["index", "value"]:
        raise CaseFormatError(1, "measurements", "expected header 'index,value'")
    frame = frame.sort_values("index")
    try:
        indices = tuple(int(i) for i in frame["index"])
        values = tuple(float(v) for v in frame["value"])
    except (TypeError, ValueError) as exc:
        raise CaseFormatError(0, "measurements", str(exc))
    return MeasurementVector(indices=indices, values=values)


def scopf_rows(solution: ScopfSolution) -> List[Tuple[str, str]]:
    rows = [("cost", money(solution.cost))]
    rows += [(f"dispatch_bus{j}", pu(p)) for j, p in enumerate(solution.dispatch, start=1)]
    rows.append(("committed", " ".join(str(b) for b in solution.committed)))
    rows.append(("islanding_excluded", " ".join(str(k) for k in solution.islanding_excluded)))
    return rows


def write_scopf(out: Path, solution: ScopfSolution) -> List[Path]:
    binding = pd.DataFrame(
        [b.model_dump() for b in solution.binding],
        columns=["kind", "element", "contingency", "value", "limit"],
    )
    return [
        write_key_values(out / "scopf.csv", scopf_rows(solution)),
        write_frame(out / "binding.csv", binding),
    ]


# Text

def scopf_text(solution: ScopfSolution) -> str:
    lines = [f"SCOPF cost: ${money(solution.cost)}"]
    for bus in solution.committed:
        lines.append(f"  generator at bus {bus}: {pu(solution.dispatch[bus - 1])} pu")
    for b in solution.binding:
        where = f"line {b.element}" if b.kind.startswith("line") else f"generator {b.element}"
        after = f" after outage of line {b.contingency}" if b.contingency else ""
        lines.append(f"  binding {b.kind}: {where}{after} at {pu(b.value)} (limit {pu(b.limit)})")
    if solution.islanding_excluded:
        lines.append(f"  islanding outages excluded: {list(solution.islanding_excluded)}")
    return "\n".join(lines)


def estimation_text(result: EstimationResult) -> str:
    verdict = f"FLAGGED (largest residual at measurement {result.bad_measurement})" if result.flagged else "clean"
    return (
        f"Residual norm {result.residual_norm:.3e}, threshold {result.tau:.3e}: {verdict}\n"
        + "\n".join(f"  theta[{j}] = {pu(v)}" for j, v in enumerate(result.x_hat, start=1))
    )


def attack_text(attack: AttackVector) -> str:
    lines = [
        f"Compromised buses: {list(attack.compromised_buses())}",
        f"Altered measurements: {list(attack.altered_measurements())}",
        f"Corrupted cost: ${money(attack.corrupted_cost)}",
    ]
    for j, delta in enumerate(attack.delta_bus, start=1):
        if delta:
            lines.append(f"  load at bus {j}: {pu(attack.attacked_load[j - 1] - delta)} -> "
                         f"{pu(attack.attacked_load[j - 1])} ({delta:+.6f})")
    for p in attack.overload_pairs:
        lines.append(f"  line {p.line} after outage of line {p.outage}: "
                     f"{p.loading_percent:.2f}% of capacity ({p.excess_percent:.2f}% over)")
    return "\n".join(lines)


def synthesis_text(result: SynthesisResult) -> str:
    cert = result.certificate
    header = (
        f"Verdict: {result.verdict}\n"
        f"Explored {cert.subsets_explored} of {cert.subsets_total} bus subsets "
        f"(T_B = {cert.max_buses}), {cert.subspaces} distinct subspaces, "
        f"{cert.feasibility_solves} feasibility solves"
    )
    if result.attack is None:
        return header
    return header + "\n" + attack_text(result.attack)


def verification_text(report: VerificationReport) -> str:
    lines = [
        f"Stealthy: {'yes' if report.stealthy else 'no'}",
        f"Cost delta: ${money(report.cost_delta)}",
    ]
    if report.ems_view is not None:
        lines.append(f"EMS re-dispatch cost: ${money(report.ems_view.cost)} "
                     f"(secure on attacked loads: {'yes' if report.ems_secure else 'no'})")
    else:
        lines.append(f"EMS re-dispatch: infeasible ({report.ems_infeasible})")

    views = [report.true_view] + ([report.true_view_ems] if report.true_view_ems else [])
    for view in views:
        lines.append(f"Real system with {view.source} dispatch: {len(view.overloads)} overloads, "
                     f"oracle gap {view.oracle_gap:.2e} pu")
        if view.base_violations:
            lines.append(f"  base-case violations on lines {list(view.base_violations)}")
        for o in view.overloads:
            lines.append(f"  line {o.line} after outage of line {o.outage}: "
                         f"{o.loading_percent:.2f}% of capacity ({o.excess_percent:.2f}% over)")
    return "\n".join(lines)


def verification_frame(report: VerificationReport) -> pd.DataFrame:
    rows = []
    views = [report.true_view] + ([report.true_view_ems] if report.true_view_ems else [])
    for view in views:
        for o in view.overloads:
            rows.append({
                "dispatch": view.source,
                "line": o.line,
                "outage": o.outage,
                "predicted_pu": o.predicted_flow,
                "resolved_pu": o.resolved_flow,
                "loading_percent": o.loading_percent,
                "excess_percent": o.excess_percent,
            })
    return pd.DataFrame(rows, columns=[
        "dispatch", "line", "outage", "predicted_pu", "resolved_pu", "loading_percent", "excess_percent",
    ])
