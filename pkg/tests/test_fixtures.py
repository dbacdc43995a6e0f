import pytest

from app.services.case_parser import parse_case
from app.services.fixtures import fixture_names, fixture_text, load_fixture
from app.services.lodf import compute_lodf
from app.services.scopf import evaluate_cost, solve_scopf
from app.utils.errors import UnknownFixtureError


def test_bundled_names():
    assert fixture_names() == ("3bus", "ieee14")


def test_unknown_fixture():
    with pytest.raises(UnknownFixtureError, match="available"):
        fixture_text("ieee30")


@pytest.mark.parametrize("name", ["3bus", "ieee14"])
def test_every_field_has_provenance(name):
    _, manifest = load_fixture(name)
    assert manifest.provenance
    assert all(entry.source in ("published", "standard-dataset", "fitted") for entry in manifest.provenance)
    assert "# provenance:" in fixture_text(name)


@pytest.mark.parametrize("name", ["3bus", "ieee14"])
def test_emitted_text_parses_to_the_same_case(name):
    case, _ = load_fixture(name)
    assert parse_case(fixture_text(name)) == case


def test_three_bus_hard_expectations(three_bus, three_bus_pre):
    _, manifest = load_fixture("3bus")
    assert evaluate_cost(three_bus, [18, 10, 2]) == pytest.approx(manifest.expected("documented_dispatch_cost"))
    assert three_bus_pre.cost == pytest.approx(manifest.expected("scopf_cost"), abs=1e-6)
    assert three_bus_pre.dispatch == pytest.approx(manifest.expected("scopf_dispatch"), abs=1e-6)

    attacked = solve_scopf(three_bus, loads=[10, 7, 13])
    assert attacked.dispatch == pytest.approx(manifest.expected("attacked_dispatch"), abs=1e-6)
    assert attacked.cost == pytest.approx(manifest.expected("attacked_cost"), abs=1e-6)


def test_ieee14_hard_expectations(ieee14, ieee14_pre):
    _, manifest = load_fixture("ieee14")
    assert ieee14.load_vector().sum() == pytest.approx(manifest.expected("total_load"), abs=1e-9)
    assert ieee14_pre.cost == pytest.approx(manifest.expected("scopf_cost"), abs=1e-4)
    assert list(compute_lodf(ieee14).islanding_outages()) == manifest.expected("islanding_outages")


def test_soft_expectations_are_annotations():
    _, manifest = load_fixture("ieee14")
    soft = [e.name for e in manifest.expectations if e.kind == "soft"]
    assert "published_corrupted_cost" in soft
    with pytest.raises(KeyError):
        manifest.expected("no_such_value")
