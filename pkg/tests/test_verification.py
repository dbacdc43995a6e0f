import pytest

from app.schemas.attack import AttackVector
from app.services.attack_synthesis import vector_from_load_shift
from app.services.evaluation import configure_case
from app.services.powerflow import solve_powerflow
from app.services.scopf import evaluate_cost
from app.services.verification import check_attack_invariants, contingency_screen, verify
from app.utils.errors import AttackInvariantError


@pytest.fixture(scope="module")
def worked_attack(three_bus):
    return vector_from_load_shift(three_bus, [2, -1, -1], [20, 9, 1])


def test_null_attack_changes_nothing(three_bus, three_bus_pre):
    null = AttackVector.null(
        three_bus.n_buses, three_bus.n_lines, three_bus.load_vector(),
        three_bus_pre.dispatch, three_bus_pre.cost,
    )
    report = verify(three_bus, three_bus_pre, null)
    assert report.stealthy
    assert report.confirmed_overloads == ()
    assert report.cost_delta == pytest.approx(0.0)
    assert report.ems_secure
    assert report.true_view.base_violations == ()


def test_worked_attack_overloads_real_system(three_bus, three_bus_pre, worked_attack):
    report = verify(three_bus, three_bus_pre, worked_attack)
    assert report.stealthy
    assert report.oracles_agree
    assert report.cost_delta == pytest.approx(-200.0)

    confirmed = {(o.line, o.outage): o for o in report.confirmed_overloads}
    assert set(confirmed) == {(1, 2), (3, 2), (2, 3)}
    assert confirmed[(1, 2)].loading_percent == pytest.approx(1200 / 11, abs=1e-6)
    assert confirmed[(1, 2)].resolved_flow == pytest.approx(12.0, abs=1e-6)
    assert confirmed[(3, 2)].loading_percent == pytest.approx(1300 / 12, abs=1e-6)


def test_ems_sees_a_secure_cheaper_dispatch(three_bus, three_bus_pre, worked_attack):
    report = verify(three_bus, three_bus_pre, worked_attack)
    assert report.ems_view.dispatch == pytest.approx((20.0, 9.0, 1.0), abs=1e-6)
    assert report.ems_view.cost == pytest.approx(4130.0, abs=1e-6)
    assert report.ems_secure
    assert report.true_view_ems.overloads


def test_screen_of_zero_flows(three_bus):
    state = solve_powerflow(three_bus, three_bus.load_vector(), three_bus.load_vector())
    screen = contingency_screen(three_bus, state)
    assert len(screen) == 6
    assert all(loading == pytest.approx(0.0) for _, _, loading in screen)


def test_screen_is_sorted_by_loading(three_bus, three_bus_pre):
    loadings = [entry[2] for entry in contingency_screen(three_bus, three_bus_pre.flows)]
    assert loadings == sorted(loadings, reverse=True)
    assert loadings[0] <= 1 + 1e-6


def test_attacked_load_must_match_shift(three_bus, worked_attack):
    broken = worked_attack.model_copy(update={"attacked_load": (9.0, 7.0, 14.0)})
    with pytest.raises(AttackInvariantError, match="attacked loads"):
        check_attack_invariants(three_bus, broken)


def test_slack_angle_must_stay(three_bus, worked_attack):
    theta = (0.1,) + worked_attack.delta_theta[1:]
    broken = worked_attack.model_copy(update={"delta_theta": theta})
    with pytest.raises(AttackInvariantError, match="slack"):
        check_attack_invariants(three_bus, broken)


def test_bus_budget_is_enforced(three_bus, worked_attack):
    case = configure_case(three_bus, (0.25, 0.05, 0.33, 2))
    with pytest.raises(AttackInvariantError, match="compromised"):
        check_attack_invariants(case, worked_attack)


def test_load_change_limit_is_enforced(three_bus, worked_attack):
    case = configure_case(three_bus, (0.1, 0.05, 0.33, 3))
    with pytest.raises(AttackInvariantError, match="delta_b"):
        check_attack_invariants(case, worked_attack)


def test_secured_measurement_cannot_be_altered(three_bus, worked_attack):
    measurements = tuple(
        m.model_copy(update={"secured": m.index == 1}) for m in three_bus.measurements
    )
    case = three_bus.model_copy(update={"measurements": measurements})
    with pytest.raises(AttackInvariantError, match="measurement 1"):
        check_attack_invariants(case, worked_attack)


def test_tampered_cost_is_rejected(three_bus, three_bus_pre, worked_attack):
    broken = worked_attack.model_copy(update={"corrupted_cost": 4000.0})
    with pytest.raises(AttackInvariantError, match="corrupted cost"):
        verify(three_bus, three_bus_pre, broken)


def test_dispatch_above_rating_is_rejected(three_bus, three_bus_pre, worked_attack):
    broken = worked_attack.model_copy(update={"corrupted_dispatch": (21.0, 8.0, 1.0)})
    with pytest.raises(AttackInvariantError, match="outside"):
        verify(three_bus, three_bus_pre, broken)


def test_unbalanced_dispatch_is_rejected(three_bus, three_bus_pre, worked_attack):
    broken = worked_attack.model_copy(update={
        "corrupted_dispatch": (20.0, 9.0, 2.0),
        "corrupted_cost": evaluate_cost(three_bus, [20, 9, 2]),
    })
    with pytest.raises(AttackInvariantError, match="does not balance"):
        verify(three_bus, three_bus_pre, broken)


def test_dispatch_must_look_secure_to_the_ems(three_bus, three_bus_pre, worked_attack):
    # Cheaper than the SCOPF optimum on the attacked loads, so some limit must break
    broken = worked_attack.model_copy(update={
        "corrupted_dispatch": (20.0, 10.0, 0.0),
        "corrupted_cost": evaluate_cost(three_bus, [20, 10, 0]),
    })
    with pytest.raises(AttackInvariantError, match="EMS view"):
        verify(three_bus, three_bus_pre, broken)


def test_cost_delta_comes_from_the_dispatch(three_bus, three_bus_pre, worked_attack):
    report = verify(three_bus, three_bus_pre, worked_attack)
    expected = evaluate_cost(three_bus, worked_attack.corrupted_dispatch) - three_bus_pre.cost
    assert report.cost_delta == pytest.approx(expected)
