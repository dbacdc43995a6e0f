"""
Security-constrained optimal power flow (DC, linear costs).

Minimize sum(alpha + beta * P) over dispatched generators subject to:
- power balance
- each generator either off or within [p_min, p_max]
- base-case line limits
- post-contingency line limits for every non-islanding single-line outage,
  with post-outage flows predicted through LODF

The on/off choice is handled by enumerating commitment subsets; each subset
is a linear program. Ties are broken towards the lexicographically smallest
dispatch vector.
"""

import itertools
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.config import get_settings
from app.schemas.dispatch import BindingConstraint, ScopfSolution
from app.schemas.grid import Generator, GridCase
from app.schemas.powerflow import LodfMatrix
from app.services.lodf import compute_lodf
from app.services.lp_kernel import LinearProblem
from app.services.powerflow import ptdf_matrix, solve_powerflow
from app.utils.errors import (
    DispatchLimitError,
    LoadOutOfBoundsError,
    ScopfInfeasibleError,
)

logger = logging.getLogger(__name__)

ZERO_DISPATCH = 1e-9
TIE_TOLERANCE = 1e-7

# (line id, tripped line id or None)
RowLabel = Tuple[int, Optional[int]]


def evaluate_cost(case: GridCase, dispatch: Sequence[float]) -> float:
    """
    Generation cost of a per-bus dispatch.

    Args:
        case: Grid case
        dispatch: Generation per bus (pu)

    Returns:
        Sum of alpha + beta * P over generators with P > 0

    Raises:
        DispatchLimitError: A dispatch is neither 0 nor within the generator rating
    """
    tolerance = get_settings().flow_tolerance
    generators = case.generator_map()
    total = 0.0

    for bus, power in enumerate(dispatch, start=1):
        if abs(power) <= ZERO_DISPATCH:
            continue
        generator = generators.get(bus)
        if generator is None:
            raise DispatchLimitError(f"bus {bus} has no generator but is dispatched at {power}")
        if power < generator.p_min - tolerance or power > generator.p_max + tolerance:
            raise DispatchLimitError(
                f"generator at bus {bus}: {power} outside [{generator.p_min}, {generator.p_max}]"
            )
        total += generator.alpha + generator.beta * power
    return total


def check_loads(case: GridCase, loads: np.ndarray) -> None:
    """
    Validate per-bus loads against their rated bounds.

    Raises:
        LoadOutOfBoundsError: A load is outside its bounds or sits on a bus without load
    """
    tolerance = get_settings().flow_tolerance
    specs = case.load_map()
    if loads.shape != (case.n_buses,):
        raise LoadOutOfBoundsError(f"expected {case.n_buses} per-bus loads")

    for bus, value in enumerate(loads, start=1):
        spec = specs.get(bus)
        if spec is None:
            if abs(value) > tolerance:
                raise LoadOutOfBoundsError(f"bus {bus} has no load but consumes {value}")
            continue
        if value < spec.p_min - tolerance or value > spec.p_max + tolerance:
            raise LoadOutOfBoundsError(
                f"load at bus {bus}: {value} outside [{spec.p_min}, {spec.p_max}]"
            )


def security_rows(
    flow_coef: np.ndarray,
    flow_const: np.ndarray,
    lodf: LodfMatrix,
    contingencies: bool = True,
) -> Tuple[np.ndarray, np.ndarray, List[RowLabel]]:
    """
    Express base and post-contingency flows as affine functions of the variables.

    Base flows are ``flow_coef @ x + flow_const``. The flow on line i after
    outage k is base_i + LODF_i^k * base_k.

    Returns:
        (rows, constants, labels) with one row per (line, outage) pair
    """
    rows = [flow_coef]
    constants = [flow_const]
    labels: List[RowLabel] = [(i + 1, None) for i in range(len(flow_const))]

    if contingencies:
        factors = lodf.as_array()
        for k in lodf.secure_outages():
            column = factors[:, k - 1].copy()
            column[k - 1] = 0.0
            monitored = np.array([i for i in range(len(flow_const)) if i != k - 1])
            rows.append(flow_coef[monitored] + column[monitored, None] * flow_coef[k - 1])
            constants.append(flow_const[monitored] + column[monitored] * flow_const[k - 1])
            labels.extend((i + 1, k) for i in monitored)

    return np.vstack(rows), np.concatenate(constants), labels


def _subsets(generators: Sequence[Generator], demand: float):
    """Commitment subsets able to meet the demand, smallest first (all-off included)."""
    for size in range(0, len(generators) + 1):
        for subset in itertools.combinations(generators, size):
            if sum(g.p_max for g in subset) < demand - ZERO_DISPATCH:
                continue
            if sum(g.p_min for g in subset) > demand + ZERO_DISPATCH:
                continue
            yield subset


def _dispatch_problem(
    case: GridCase,
    subset: Sequence[Generator],
    loads: np.ndarray,
    ptdf: np.ndarray,
    lodf: LodfMatrix,
    contingencies: bool,
    line_limits: bool,
) -> LinearProblem:
    problem = LinearProblem(len(subset))
    problem.set_objective([g.beta for g in subset])
    for j, generator in enumerate(subset):
        problem.set_bounds(j, generator.p_min, generator.p_max)
    problem.add_eq(np.ones(len(subset)), loads.sum())

    if line_limits:
        coef = ptdf[:, [g.bus - 1 for g in subset]]
        const = -ptdf @ loads
        rows, constants, labels = security_rows(coef, const, lodf, contingencies)
        capacity = np.array([case.lines[i - 1].capacity for i, _ in labels])
        problem.add_abs_le(rows, constants, capacity)
    return problem


def _all_off_secure(
    case: GridCase,
    loads: np.ndarray,
    ptdf: np.ndarray,
    lodf: LodfMatrix,
    contingencies: bool,
    line_limits: bool,
) -> bool:
    """Whether zero generation is a valid operating point for these loads."""
    tolerance = get_settings().flow_tolerance
    if abs(loads.sum()) > ZERO_DISPATCH:
        return False
    if not line_limits:
        return True
    _, constants, labels = security_rows(
        np.zeros((case.n_lines, 0)), -ptdf @ loads, lodf, contingencies
    )
    capacity = np.array([case.lines[i - 1].capacity for i, _ in labels])
    return bool(np.all(np.abs(constants) <= capacity + tolerance))


def _lexicographic(
    problem: LinearProblem, subset: Sequence[Generator], cost_cap: float, start: np.ndarray
) -> np.ndarray:
    """Smallest dispatch vector (by bus order) among solutions costing <= cost_cap."""
    refined = problem.copy()
    refined.add_le(refined.objective, cost_cap)
    x = start
    for j in range(len(subset)):
        objective = np.zeros(len(subset))
        objective[j] = 1.0
        refined.set_objective(objective)
        result = refined.solve()
        if not result.feasible:
            break
        x = result.x
        upper = min(refined.upper[j], result.x[j] + TIE_TOLERANCE)
        refined.set_bounds(j, refined.lower[j], max(refined.lower[j], upper))
    return _snap(x, subset)


def _snap(x: np.ndarray, subset: Sequence[Generator]) -> np.ndarray:
    """Clip to the ratings and pull values within solver noise onto them."""
    lower = np.array([g.p_min for g in subset])
    upper = np.array([g.p_max for g in subset])
    x = np.clip(x, lower, upper)
    near = get_settings().flow_tolerance
    x = np.where(upper - x <= near, upper, x)
    return np.where(x - lower <= near, lower, x)


def _rebalance(dispatch: np.ndarray, committed: Sequence[int], case: GridCase, demand: float) -> None:
    """Move the balance residual onto a committed unit with room for it."""
    residual = demand - dispatch.sum()
    if not committed or residual == 0.0:
        return
    generators = case.generator_map()
    for bus in reversed(committed):
        generator = generators[bus]
        value = dispatch[bus - 1] + residual
        if generator.p_min <= value <= generator.p_max:
            dispatch[bus - 1] = value
            return
    dispatch[committed[-1] - 1] += residual


def _optimize(
    case: GridCase,
    loads: np.ndarray,
    lodf: LodfMatrix,
    contingencies: bool,
    line_limits: bool = True,
) -> Optional[Tuple[np.ndarray, Tuple[int, ...]]]:
    ptdf = ptdf_matrix(case)
    generators = sorted(case.generators, key=lambda g: g.bus)
    demand = float(loads.sum())

    candidates = []
    for subset in _subsets(generators, demand):
        if not subset:
            if _all_off_secure(case, loads, ptdf, lodf, contingencies, line_limits):
                candidates.append((0.0, subset, None, np.zeros(0)))
            continue
        problem = _dispatch_problem(case, subset, loads, ptdf, lodf, contingencies, line_limits)
        result = problem.solve()
        if not result.feasible:
            continue
        cost = result.objective + sum(g.alpha for g in subset)
        candidates.append((cost, subset, problem, result.x))
        logger.debug("Subset %s feasible at cost %.4f", [g.bus for g in subset], cost)

    if not candidates:
        return None

    best = min(candidate[0] for candidate in candidates)
    chosen = None
    for cost, subset, problem, start in candidates:
        if cost > best + TIE_TOLERANCE * max(1.0, abs(best)):
            continue
        if subset:
            fixed = sum(g.alpha for g in subset)
            x = _lexicographic(problem, subset, best - fixed + TIE_TOLERANCE, start)
        else:
            x = start
        dispatch = np.zeros(case.n_buses)
        for j, generator in enumerate(subset):
            dispatch[generator.bus - 1] = x[j]
        key = tuple(np.round(dispatch, 9))
        if chosen is None or key < chosen[0]:
            chosen = (key, dispatch, tuple(g.bus for g in subset))

    return chosen[1], chosen[2]


def _infeasibility_hint(case: GridCase, loads: np.ndarray, lodf: LodfMatrix, contingencies: bool) -> str:
    if contingencies and _optimize(case, loads, lodf, contingencies=False) is not None:
        return "post-contingency line limits"
    if _optimize(case, loads, lodf, contingencies=False, line_limits=False) is not None:
        return "base-case line limits"
    return "generator limits"


def _binding(
    case: GridCase, dispatch: np.ndarray, flows: np.ndarray, lodf: LodfMatrix, contingencies: bool
) -> Tuple[BindingConstraint, ...]:
    tolerance = get_settings().flow_tolerance
    found: List[BindingConstraint] = []

    for generator in sorted(case.generators, key=lambda g: g.bus):
        power = dispatch[generator.bus - 1]
        if power <= ZERO_DISPATCH:
            continue
        if power >= generator.p_max - tolerance:
            found.append(BindingConstraint(kind="gen_max", element=generator.bus,
                                           value=power, limit=generator.p_max))
        elif power <= generator.p_min + tolerance:
            found.append(BindingConstraint(kind="gen_min", element=generator.bus,
                                           value=power, limit=generator.p_min))

    rows, constants, labels = security_rows(
        np.zeros((case.n_lines, 0)), flows, lodf, contingencies
    )
    for value, (line, outage) in zip(constants, labels):
        capacity = case.lines[line - 1].capacity
        if abs(value) >= capacity - tolerance:
            found.append(BindingConstraint(
                kind="line_base" if outage is None else "line_contingency",
                element=line, contingency=outage, value=float(value), limit=capacity,
            ))
    return tuple(found)


def solve_scopf(
    case: GridCase,
    loads: Optional[Sequence[float]] = None,
    contingencies: bool = True,
    lodf: Optional[LodfMatrix] = None,
) -> ScopfSolution:
    """
    Find the least-cost N-1 secure dispatch.

    Args:
        case: Grid case
        loads: Load per bus (pu); the case's current loads when omitted
        contingencies: Enforce post-contingency limits (False gives plain OPF)
        lodf: Precomputed factors for the case topology

    Returns:
        ScopfSolution with dispatch, cost, base flows and binding constraints

    Raises:
        LoadOutOfBoundsError: Loads violate their rated bounds
        ScopfInfeasibleError: No secure dispatch exists
    """
    loads = case.load_vector() if loads is None else np.asarray(loads, dtype=float)
    check_loads(case, loads)
    if lodf is None:
        lodf = compute_lodf(case)

    if len(case.generators) > get_settings().max_enumerated_generators:
        raise ScopfInfeasibleError(
            f"{len(case.generators)} generators exceed the commitment enumeration limit"
        )

    capacity = sum(g.p_max for g in case.generators)
    if capacity < loads.sum() - ZERO_DISPATCH:
        raise ScopfInfeasibleError("generation capacity below total load")

    found = _optimize(case, loads, lodf, contingencies)
    if found is None:
        raise ScopfInfeasibleError(_infeasibility_hint(case, loads, lodf, contingencies))

    dispatch, committed = found
    dispatch[np.abs(dispatch) <= ZERO_DISPATCH] = 0.0
    # Absorb solver round-off so the balance check sees an exact match
    _rebalance(dispatch, committed, case, float(loads.sum()))

    state = solve_powerflow(case, dispatch, loads)
    solution = ScopfSolution(
        dispatch=tuple(dispatch.tolist()),
        cost=evaluate_cost(case, dispatch),
        flows=state,
        binding=_binding(case, dispatch, state.flows(), lodf, contingencies),
        committed=committed,
        islanding_excluded=lodf.islanding_outages() if contingencies else (),
        contingencies=contingencies,
    )
    logger.info("SCOPF cost %.2f with generators at buses %s", solution.cost, list(committed))
    return solution
