"""
Independent replay of an attack vector.

Nothing from the search is trusted: stealth is re-checked against the state
estimator, the control center's dispatch is re-optimized on the attacked
loads, and every post-contingency flow is computed twice (outage factors and
a full power flow with the line removed).
"""

import logging
from typing import List, Optional

import numpy as np

from app.config import get_settings
from app.schemas.attack import AttackVector
from app.schemas.dispatch import ScopfSolution
from app.schemas.grid import GridCase
from app.schemas.powerflow import LodfMatrix, PowerFlowState
from app.schemas.verification import ConfirmedOverload, ContingencyLoading, TrueView, VerificationReport
from app.services.lodf import compute_lodf, contingency_flow_matrix
from app.services.powerflow import laplacian, line_flows, non_slack, solve_outage_flows, solve_powerflow
from app.services.scopf import evaluate_cost, solve_scopf
from app.services.state_estimation import simulate_measurements, stealth_check
from app.utils.errors import (
    AttackInvariantError,
    DispatchLimitError,
    LoadOutOfBoundsError,
    ScopfInfeasibleError,
)

logger = logging.getLogger(__name__)

ORACLE_TOLERANCE = 1e-6


def contingency_screen(
    case: GridCase, state: PowerFlowState, lodf: Optional[LodfMatrix] = None
) -> List[ContingencyLoading]:
    """
    Post-contingency loading of every line for every non-islanding outage.

    Returns:
        (line, outage, |flow| / capacity) sorted by loading, highest first
    """
    if lodf is None:
        lodf = compute_lodf(case)
    matrix = contingency_flow_matrix(state.flows(), lodf.as_array())
    capacity = np.array([line.capacity for line in case.lines])

    entries = []
    for k in lodf.secure_outages():
        for i in range(1, case.n_lines + 1):
            if i != k:
                entries.append((i, k, float(abs(matrix[i - 1, k - 1]) / capacity[i - 1])))
    entries.sort(key=lambda entry: (-entry[2], entry[1], entry[0]))
    return entries


def check_attack_invariants(case: GridCase, attack: AttackVector) -> None:
    """
    Structural checks on an attack vector against its case.

    Raises:
        AttackInvariantError: Naming the first violated invariant
    """
    tolerance = get_settings().flow_tolerance
    b, l = case.n_buses, case.n_lines
    limits = case.attacker_limits

    if len(attack.delta_bus) != b or len(attack.delta_line) != l:
        raise AttackInvariantError(f"vector sized for a different case (expects {b} buses, {l} lines)")

    theta = np.asarray(attack.delta_theta)
    if theta[case.slack_bus - 1] != 0.0:
        raise AttackInvariantError("slack bus angle must not be shifted")

    expected_line = line_flows(case, theta)
    expected_bus = -laplacian(case) @ theta
    scale = max(1.0, float(np.max(np.abs(theta), initial=0.0)))
    if np.max(np.abs(expected_line - attack.delta_line), initial=0.0) > 1e-8 * scale:
        raise AttackInvariantError("line flow shifts do not follow the angle shifts")
    if np.max(np.abs(expected_bus - attack.delta_bus), initial=0.0) > 1e-8 * scale:
        raise AttackInvariantError("bus consumption shifts do not follow the angle shifts")

    taken = case.taken_mask()
    alterable = case.alterable_mask()
    altered = np.asarray(attack.altered)
    if np.any(altered & ~(taken & alterable)):
        first = int(np.flatnonzero(altered & ~(taken & alterable))[0]) + 1
        raise AttackInvariantError(f"measurement {first} altered without access")

    changed = np.abs(attack.measurement_injection()) > 1e-9
    if np.any(changed & taken & ~altered):
        first = int(np.flatnonzero(changed & taken & ~altered)[0]) + 1
        raise AttackInvariantError(f"measurement {first} changes but is not flagged as altered")

    for index in np.flatnonzero(altered) + 1:
        if not attack.compromised[case.measurement_bus(int(index)) - 1]:
            raise AttackInvariantError(f"measurement {index} altered at an uncompromised bus")
    if sum(attack.compromised) > limits.max_buses:
        raise AttackInvariantError(f"{sum(attack.compromised)} buses compromised, limit {limits.max_buses}")
    if altered.sum() > limits.max_measurements:
        raise AttackInvariantError(
            f"{int(altered.sum())} measurements altered, limit {limits.max_measurements}"
        )

    loads = case.load_vector()
    delta = np.asarray(attack.delta_bus)
    if np.any(np.abs(delta) > limits.delta_b * loads + tolerance):
        bus = int(np.argmax(np.abs(delta) - limits.delta_b * loads)) + 1
        raise AttackInvariantError(f"load shift at bus {bus} exceeds delta_b")
    if np.max(np.abs(loads + delta - attack.attacked_load), initial=0.0) > tolerance:
        raise AttackInvariantError("attacked loads differ from real loads plus shifts")


def check_dispatch(case: GridCase, attack: AttackVector, lodf: LodfMatrix) -> float:
    """
    Check the vector's corrupted dispatch the way the control center would see it.

    The dispatch must respect every generator rating, balance the attacked
    loads, cost what the vector claims, and look N-1 secure on the attacked
    loads.

    Returns:
        The recomputed dispatch cost

    Raises:
        AttackInvariantError: Naming the first violated condition
    """
    tolerance = get_settings().flow_tolerance
    dispatch = np.asarray(attack.corrupted_dispatch, dtype=float)
    attacked = np.asarray(attack.attacked_load, dtype=float)

    try:
        cost = evaluate_cost(case, dispatch)
    except DispatchLimitError as exc:
        raise AttackInvariantError(f"corrupted dispatch: {exc.detail}")
    if abs(cost - attack.corrupted_cost) > tolerance * max(1.0, abs(cost)):
        raise AttackInvariantError(
            f"corrupted cost {attack.corrupted_cost} differs from the dispatch cost {cost}"
        )
    if abs(dispatch.sum() - attacked.sum()) > tolerance:
        raise AttackInvariantError(
            f"corrupted dispatch {dispatch.sum()} does not balance the attacked loads {attacked.sum()}"
        )

    expected = solve_powerflow(case, dispatch, attacked)
    capacity = np.array([line.capacity for line in case.lines])
    over = np.flatnonzero(np.abs(expected.flows()) > capacity + tolerance)
    if len(over):
        raise AttackInvariantError(f"corrupted dispatch overloads line {int(over[0]) + 1} in the EMS view")
    for line, outage, loading in contingency_screen(case, expected, lodf):
        if (loading - 1) * capacity[line - 1] > tolerance:
            raise AttackInvariantError(
                f"corrupted dispatch is not N-1 secure in the EMS view: line {line} "
                f"at {100 * loading:.2f}% after outage {outage}"
            )
    return cost


def _true_view(
    case: GridCase,
    dispatch: np.ndarray,
    source: str,
    lodf: LodfMatrix,
    margin: float,
) -> TrueView:
    loads = case.load_vector()
    state = solve_powerflow(case, dispatch, loads)
    flows = state.flows()
    capacity = np.array([line.capacity for line in case.lines])
    tolerance = get_settings().flow_tolerance

    predicted = contingency_flow_matrix(flows, lodf.as_array())
    overloads = []
    gap = 0.0
    for k in lodf.secure_outages():
        resolved = solve_outage_flows(case, dispatch, loads, k)
        for i in range(1, case.n_lines + 1):
            if i == k:
                continue
            lodf_flow = predicted[i - 1, k - 1]
            gap = max(gap, abs(lodf_flow - resolved[i - 1]))
            limit = (1 + margin) * capacity[i - 1]
            if abs(lodf_flow) > limit and abs(resolved[i - 1]) > limit:
                overloads.append(ConfirmedOverload(
                    line=i, outage=k,
                    predicted_flow=float(lodf_flow),
                    resolved_flow=float(resolved[i - 1]),
                    loading_percent=100.0 * abs(lodf_flow) / capacity[i - 1],
                ))
    if gap > ORACLE_TOLERANCE:
        logger.warning("Flow oracles disagree by %.3e pu", gap)

    overloads.sort(key=lambda o: (-o.loading_percent, o.outage, o.line))
    violations = tuple(int(i) + 1 for i in np.flatnonzero(np.abs(flows) > capacity + tolerance))
    return TrueView(
        source=source,
        dispatch=tuple(dispatch.tolist()),
        cost=evaluate_cost(case, dispatch),
        state=state,
        base_violations=violations,
        overloads=tuple(overloads),
        oracle_gap=float(gap),
    )


def verify(
    case: GridCase,
    pre: ScopfSolution,
    attack: AttackVector,
    lodf: Optional[LodfMatrix] = None,
    margin: Optional[float] = None,
) -> VerificationReport:
    """
    Replay an attack against the case.

    Args:
        case: Grid case
        pre: Attack-free SCOPF solution (source of the clean readings and cost)
        attack: Vector to replay
        lodf: Precomputed factors for the case topology
        margin: Overload margin; the case's delta_l when omitted

    Returns:
        VerificationReport; an EMS infeasible on attacked loads is reported, not raised

    Raises:
        AttackInvariantError: The vector is structurally invalid for the case, or its
            dispatch is not one the control center could have chosen
    """
    check_attack_invariants(case, attack)
    if lodf is None:
        lodf = compute_lodf(case)
    corrupted_cost = check_dispatch(case, attack, lodf)
    if margin is None:
        margin = case.attacker_limits.delta_l
    tolerance = get_settings().flow_tolerance

    z = simulate_measurements(case, pre.flows)
    shift = np.asarray(attack.delta_theta)[non_slack(case)]
    stealthy = stealth_check(case, z, attack.measurement_injection(), shift)

    ems_view = None
    ems_infeasible = None
    screen: List[ContingencyLoading] = []
    try:
        ems_view = solve_scopf(case, attack.attacked_load, lodf=lodf)
        screen = contingency_screen(case, ems_view.flows, lodf)
    except (ScopfInfeasibleError, LoadOutOfBoundsError) as exc:
        ems_infeasible = exc.detail
        logger.info("EMS has no secure dispatch for the attacked loads: %s", exc.detail)

    vector_view = _true_view(case, np.asarray(attack.corrupted_dispatch), "vector", lodf, margin)
    ems_true = None
    if ems_view is not None:
        ems_true = _true_view(case, ems_view.dispatch_array(), "ems", lodf, margin)

    report = VerificationReport(
        stealthy=stealthy,
        ems_view=ems_view,
        ems_infeasible=ems_infeasible,
        ems_screen=tuple(screen),
        ems_secure=ems_view is not None and all(entry[2] <= 1 + tolerance for entry in screen),
        true_view=vector_view,
        true_view_ems=ems_true,
        confirmed_overloads=vector_view.overloads,
        cost_delta=corrupted_cost - pre.cost,
    )
    logger.info(
        "Verified attack: stealthy=%s, %d confirmed overloads, cost delta %.2f",
        report.stealthy, len(report.confirmed_overloads), report.cost_delta,
    )
    return report
