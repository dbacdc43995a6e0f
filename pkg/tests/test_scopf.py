import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from app.services.case_parser import parse_case
from app.services.lodf import compute_lodf
from app.services.powerflow import solve_outage_flows, solve_powerflow
from app.services.scopf import evaluate_cost, solve_scopf
from app.services.verification import contingency_screen
from app.utils.errors import DispatchLimitError, LoadOutOfBoundsError, ScopfInfeasibleError

IDLE_CASE = """\
# Topology (Line) Information
1    1    2    10    5
# Bus Types (bus no, is generator?, is load?)
1    1    0
2    0    1
# Generator Information (bus no, max generation, min generation, cost coefficients alpha, beta)
1    5    0.1    7    10
# Load Information (bus no, current load, max load, min load)
2    0    1    0
# Measurement Information (measurement no, measurement taken?, secured?, can attacker alter?)
1    1    0    1
2    1    0    1
3    1    0    1
4    1    0    1
# Cost Constraint
-1
# Attacker's Resource Limitation (measurements, buses)
4    2
# Maximum percent of delta load
20
# % of minimum Overloading amount, % of lines to be overloaded
5    100
"""


def _assert_within_ratings(case, solution):
    generators = case.generator_map()
    for bus, power in enumerate(solution.dispatch, start=1):
        if bus in solution.committed:
            generator = generators[bus]
            assert generator.p_min <= power <= generator.p_max
        else:
            assert power == 0.0


def test_cost_of_documented_dispatches(three_bus):
    assert evaluate_cost(three_bus, [18, 10, 2]) == pytest.approx(4430.0)
    assert evaluate_cost(three_bus, [20, 9, 1]) == pytest.approx(4130.0)


def test_idle_generator_costs_nothing(three_bus):
    assert evaluate_cost(three_bus, [20, 10, 0]) == pytest.approx(20 + 2000 + 2000)


def test_dispatch_above_rating_is_rejected(three_bus):
    with pytest.raises(DispatchLimitError):
        evaluate_cost(three_bus, [25, 5, 0])


def test_three_bus_secure_dispatch(three_bus_pre):
    assert three_bus_pre.dispatch == pytest.approx((19.0, 9.0, 2.0), abs=1e-6)
    assert three_bus_pre.cost == pytest.approx(4330.0, abs=1e-6)
    assert three_bus_pre.committed == (1, 2, 3)


def test_three_bus_attacked_loads(three_bus):
    solution = solve_scopf(three_bus, loads=[10, 7, 13])
    assert solution.dispatch == pytest.approx((20.0, 9.0, 1.0), abs=1e-6)
    assert solution.cost == pytest.approx(4130.0, abs=1e-6)


def test_plain_opf_is_not_more_expensive(three_bus, three_bus_pre):
    plain = solve_scopf(three_bus, contingencies=False)
    assert not plain.contingencies
    assert plain.cost <= three_bus_pre.cost + 1e-6


def test_secure_dispatch_is_cheapest_on_lattice(three_bus, three_bus_pre):
    lodf = compute_lodf(three_bus)
    load = three_bus.load_vector()
    capacity = np.array([line.capacity for line in three_bus.lines])
    for p1, p2 in itertools.product(range(21), range(16)):
        p3 = load.sum() - p1 - p2
        if not 0 <= p3 <= 5:
            continue
        dispatch = np.array([p1, p2, p3], dtype=float)
        state = solve_powerflow(three_bus, dispatch, load)
        if np.any(np.abs(state.flows()) > capacity + 1e-9):
            continue
        if contingency_screen(three_bus, state, lodf)[0][2] > 1 + 1e-9:
            continue
        assert evaluate_cost(three_bus, dispatch) >= three_bus_pre.cost - 1e-6


def test_loads_outside_bounds_are_rejected(three_bus):
    with pytest.raises(LoadOutOfBoundsError):
        solve_scopf(three_bus, loads=[11, 8, 11])


def test_infeasible_case_reports_hint(three_bus):
    tight = three_bus.model_copy(update={
        "lines": tuple(line.model_copy(update={"capacity": 0.5}) for line in three_bus.lines),
    })
    with pytest.raises(ScopfInfeasibleError) as info:
        solve_scopf(tight)
    assert info.value.hint == "base-case line limits"
    assert info.value.exit_code == 2


def test_ieee14_secure_dispatch(ieee14, ieee14_lodf, ieee14_pre):
    assert ieee14_pre.cost == pytest.approx(354.607696, abs=1e-4)
    assert ieee14_pre.islanding_excluded == (14,)
    assert sum(ieee14_pre.dispatch) == pytest.approx(ieee14.load_vector().sum(), abs=1e-9)
    screen = contingency_screen(ieee14, ieee14_pre.flows, ieee14_lodf)
    assert screen[0][2] <= 1 + 1e-6


def test_ieee14_binding_constraints(ieee14_pre):
    contingency = {(b.element, b.contingency) for b in ieee14_pre.binding if b.kind == "line_contingency"}
    assert contingency


def test_dispatches_stay_within_ratings(three_bus, three_bus_pre, ieee14, ieee14_pre):
    _assert_within_ratings(three_bus, three_bus_pre)
    _assert_within_ratings(three_bus, solve_scopf(three_bus, loads=[10, 7, 13]))
    _assert_within_ratings(three_bus, solve_scopf(three_bus, contingencies=False))
    _assert_within_ratings(ieee14, ieee14_pre)


def test_zero_load_turns_every_unit_off():
    case = parse_case(IDLE_CASE)
    solution = solve_scopf(case)
    assert solution.committed == ()
    assert solution.dispatch == (0.0, 0.0)
    assert solution.cost == 0.0


@pytest.mark.parametrize("fixture", ["three_bus", "ieee14"])
def test_more_line_capacity_never_costs_more(fixture, request):
    case = request.getfixturevalue(fixture)
    base = solve_scopf(case)
    wider = case.model_copy(update={
        "lines": tuple(line.model_copy(update={"capacity": line.capacity * 1.1}) for line in case.lines),
    })
    assert solve_scopf(wider).cost <= base.cost + 1e-6


def _outage_flow_maps(case, lodf):
    """Per secure outage (and the base case), the l x b map from injection to flows."""
    load = np.zeros(case.n_buses)
    load[case.slack_bus - 1] = 1.0
    maps = {None: [], **{k: [] for k in lodf.secure_outages()}}
    for bus in range(1, case.n_buses + 1):
        gen = np.zeros(case.n_buses)
        gen[bus - 1] = 1.0
        maps[None].append(solve_powerflow(case, gen, load).flows())
        for k in lodf.secure_outages():
            maps[k].append(solve_outage_flows(case, gen, load, k))
    return {k: np.column_stack(columns) for k, columns in maps.items()}


def test_ieee14_matches_brute_force_commitment_search(ieee14, ieee14_lodf, ieee14_pre):
    # Every commitment is solved as its own LP with post-outage flows taken
    # from full re-solves rather than outage factors.
    load = ieee14.load_vector()
    capacity = np.array([line.capacity for line in ieee14.lines])
    generators = sorted(ieee14.generators, key=lambda g: g.bus)
    maps = _outage_flow_maps(ieee14, ieee14_lodf)

    best = np.inf
    for size in range(1, len(generators) + 1):
        for subset in itertools.combinations(generators, size):
            columns = [g.bus - 1 for g in subset]
            a_ub, b_ub = [], []
            for matrix in maps.values():
                coef = matrix[:, columns]
                const = -matrix @ load
                a_ub.extend([coef, -coef])
                b_ub.extend([capacity - const, capacity + const])
            result = linprog(
                [g.beta for g in subset],
                A_ub=np.vstack(a_ub), b_ub=np.concatenate(b_ub),
                A_eq=np.ones((1, len(subset))), b_eq=[load.sum()],
                bounds=[(g.p_min, g.p_max) for g in subset], method="highs",
            )
            if result.status == 0:
                best = min(best, result.fun + sum(g.alpha for g in subset))

    assert ieee14_pre.cost == pytest.approx(best, abs=1e-5)
