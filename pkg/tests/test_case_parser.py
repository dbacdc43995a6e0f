import pytest

from app.services.case_parser import parse_case, serialize_case
from app.services.fixtures import fixture_text
from app.utils.errors import CaseFormatError, CaseValidationError

from tests.conftest import CHAIN_CASE


def test_parse_three_bus_fixture(three_bus):
    assert three_bus.n_buses == 3
    assert three_bus.n_lines == 3
    assert [line.capacity for line in three_bus.lines] == [11, 12, 12]
    assert three_bus.attacker_limits.delta_b == pytest.approx(0.25)
    assert three_bus.attacker_limits.delta_l == pytest.approx(0.05)
    assert three_bus.attacker_limits.cost_budget is None
    assert three_bus.target_overload_pairs == 1


def test_percent_fields_become_fractions(ieee14):
    limits = ieee14.attacker_limits
    assert limits.delta_b == pytest.approx(0.2)
    assert limits.target_line_fraction == pytest.approx(0.05)
    assert ieee14.target_overload_pairs == 1
    assert (limits.max_measurements, limits.max_buses) == (20, 3)


def test_serialize_parses_back_to_equal_case(ieee14):
    assert parse_case(serialize_case(ieee14)) == ieee14


def test_explicit_cost_budget_is_kept():
    text = CHAIN_CASE.replace("# Cost Constraint\n-1", "# Cost Constraint\n382")
    assert parse_case(text).attacker_limits.cost_budget == 382


def test_slack_section_is_optional():
    text = CHAIN_CASE + "# Slack Bus\n3\n"
    case = parse_case(text)
    assert case.slack_bus == 3
    assert "# Slack Bus" in serialize_case(case)


def test_wrong_record_width_reports_line_and_section():
    text = CHAIN_CASE.replace("2    2    3    10    5", "2    2    3    10")
    with pytest.raises(CaseFormatError) as info:
        parse_case(text)
    assert info.value.section == "lines"
    assert info.value.line_number == 3


def test_non_numeric_token():
    with pytest.raises(CaseFormatError, match="not a number"):
        parse_case(CHAIN_CASE.replace("1    1    2    10    5", "1    1    2    ten    5"))


def test_sections_out_of_order():
    lines = CHAIN_CASE.splitlines(keepends=True)
    start = lines.index("# Cost Constraint\n")
    moved = lines[start:start + 2]
    reordered = moved + lines[:start] + lines[start + 2:]
    with pytest.raises(CaseFormatError, match="out of order"):
        parse_case("".join(reordered))


def test_missing_section():
    text = CHAIN_CASE.split("# Cost Constraint")[0]
    with pytest.raises(CaseFormatError, match="missing"):
        parse_case(text)


def test_invalid_cost_constraint():
    with pytest.raises(CaseFormatError, match="cost constraint"):
        parse_case(CHAIN_CASE.replace("# Cost Constraint\n-1", "# Cost Constraint\n-5"))


def test_disconnected_network_is_rejected():
    text = CHAIN_CASE.replace("4    3    4    10    5", "4    1    2    10    5")
    with pytest.raises(CaseValidationError, match="connected"):
        parse_case(text)


def test_load_flag_must_match_records():
    text = CHAIN_CASE.replace("4    0    1\n#", "4    0    0\n#")
    with pytest.raises(CaseValidationError):
        parse_case(text)


def test_measurement_count_must_be_2l_plus_b():
    text = CHAIN_CASE.replace("12    1    0    1\n", "")
    with pytest.raises(CaseValidationError):
        parse_case(text)


def test_generation_capacity_must_cover_load():
    text = CHAIN_CASE.replace("1    5    0    0    10", "1    0.5    0    0    10")
    text = text.replace("3    5    0    0    20", "3    0.5    0    0    20")
    with pytest.raises(CaseValidationError):
        parse_case(text)


def test_comments_outside_sections_are_ignored():
    text = "# provenance: hand written\n" + fixture_text("3bus")
    assert parse_case(text).n_lines == 3


@pytest.mark.parametrize("delta_b", [1 / 3, 0.07, 0.123456789, 2 / 7])
def test_fractional_percents_read_back_exactly(ieee14, delta_b):
    limits = ieee14.attacker_limits.model_copy(update={"delta_b": delta_b, "delta_l": 1 / 30})
    case = ieee14.model_copy(update={"attacker_limits": limits})
    parsed = parse_case(serialize_case(case))
    assert parsed.attacker_limits.delta_b == delta_b
    assert parsed.attacker_limits.delta_l == 1 / 30
    assert parsed == case


def test_whole_percents_stay_short(ieee14):
    text = serialize_case(ieee14)
    assert "# Maximum percent of delta load\n20\n" in text
    assert "lines to be overloaded\n5    5" in text
