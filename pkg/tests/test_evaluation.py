import logging

import pandas as pd
import pytest
from pydantic import ValidationError

from app.schemas.sweep import SecuringPolicy, SweepSpec
from app.services.attack_synthesis import enumerate_attack_space, vector_from_load_shift
from app.services.evaluation import (
    compare_securing,
    configure_case,
    measurements_at_buses,
    random_measurements,
    rank_buses_by_frequency,
    run_sweep,
    write_comparison_csv,
    write_sweep_csvs,
)
from app.tasks import sweep_runner


def test_rank_orders_by_count_then_bus(three_bus):
    everywhere = vector_from_load_shift(three_bus, [2, -1, -1], [20, 9, 1])
    assert rank_buses_by_frequency([everywhere, everywhere]) == [1, 2, 3]
    assert rank_buses_by_frequency([]) == []


def test_policy_parsing():
    assert SecuringPolicy.parse("none") == SecuringPolicy("none", 0)
    assert SecuringPolicy.parse("random:4").label() == "random:4"
    assert SecuringPolicy.parse("analytical:2") == SecuringPolicy("analytical", 2)
    with pytest.raises(ValueError):
        SecuringPolicy.parse("greedy:2")


@pytest.mark.parametrize("update", [
    {"delta_b": ()},
    {"delta_l": (1.5,)},
    {"max_buses": (-1,)},
    {"securing": ("sometimes",)},
])
def test_spec_rejects_bad_grids(update):
    fields = dict(delta_b=(0.1,), delta_l=(0.05,), line_fraction=(0.33,), max_buses=(3,))
    fields.update(update)
    with pytest.raises(ValidationError):
        SweepSpec(**fields)


def test_measurements_at_buses(three_bus):
    # Line 1 runs 1-2, line 2 runs 1-3; consumption of bus 1 is measurement 7
    assert measurements_at_buses(three_bus, [1]) == (1, 2, 7)
    assert measurements_at_buses(three_bus, []) == ()


def test_random_measurements_are_seeded(ieee14):
    first = random_measurements(ieee14, 5, seed=4)
    assert first == random_measurements(ieee14, 5, seed=4)
    assert len(set(first)) == 5
    assert list(first) == sorted(first)
    assert len(random_measurements(ieee14, 500, seed=1)) == 54


def test_configure_case_secures_measurements(three_bus):
    case = configure_case(three_bus, (0.1, 0.02, 0.5, 2), secured=(3, 4))
    assert case.attacker_limits.delta_b == pytest.approx(0.1)
    assert case.attacker_limits.max_buses == 2
    assert case.target_overload_pairs == 2
    assert [m.index for m in case.measurements if m.secured] == [3, 4]
    assert three_bus.attacker_limits.max_buses == 3


def test_zero_load_change_sweep_is_empty(three_bus):
    spec = SweepSpec(delta_b=(0.0,), delta_l=(0.05, 0.1), line_fraction=(0.33,), max_buses=(3,))
    result = run_sweep(three_bus, spec, workers=1)
    assert [cell.attack_space for cell in result.cells] == [0, 0]
    assert result.bus_frequency == (0, 0, 0)


def test_sweep_matches_enumeration(three_bus, three_bus_pre):
    spec = SweepSpec(
        delta_b=(0.25,), delta_l=(0.05,), line_fraction=(0.33,), max_buses=(3,),
        securing=("none", "analytical:1", "random:3"), seeds=(0, 1),
    )
    result = run_sweep(three_bus, spec, workers=1)
    assert [cell.policy for cell in result.cells] == ["none", "analytical:1", "random:3", "random:3"]
    assert [cell.seed for cell in result.cells] == [None, None, 0, 1]

    baseline = result.cells[0]
    assert baseline.attack_space == len(enumerate_attack_space(three_bus, three_bus_pre))
    assert all(cell.attack_space <= baseline.attack_space for cell in result.cells)
    assert len(result.cells[1].secured) == 3
    # Every attack needs bus 1, so securing its meters removes all of them
    assert result.cells[1].attack_space < baseline.attack_space

    total = sum(cell.attack_space for cell in result.cells)
    for row in result.heatmaps[3]:
        assert all(count <= total for count in row)


def test_sweep_csvs_are_deterministic(three_bus, tmp_path):
    spec = SweepSpec(delta_b=(0.25,), delta_l=(0.05,), line_fraction=(0.33,), max_buses=(3,))
    first = write_sweep_csvs(run_sweep(three_bus, spec, workers=1), tmp_path / "a")
    second = write_sweep_csvs(run_sweep(three_bus, spec, workers=1), tmp_path / "b")
    assert [p.name for p in first] == ["attack_space.csv", "bus_frequency.csv", "heatmap_TB3.csv"]
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()

    heatmap = pd.read_csv(first[2])
    assert list(heatmap.columns) == ["tripped", "1", "2", "3"]
    cells = pd.read_csv(first[0])
    assert list(cells["policy"]) == ["none"]


def test_comparison_csv(three_bus, tmp_path):
    comparisons = compare_securing(three_bus, (0.25, 0.05, 0.33, 3), top_buses=(1,), seeds=(0, 1))
    assert comparisons[0].secured_count == 3
    assert len(comparisons[0].random_spaces) == 2
    assert comparisons[0].analytical <= comparisons[0].baseline

    frame = pd.read_csv(write_comparison_csv(comparisons, tmp_path / "compare.csv"))
    assert frame.loc[0, "random_runs"] == 2


def test_crashed_cell_is_recorded_and_sweep_continues(three_bus, monkeypatch, caplog):
    real = sweep_runner.enumerate_attack_space

    def flaky(case, *args, **kwargs):
        if case.attacker_limits.delta_b == 0.25:
            raise RuntimeError("solver went away")
        return real(case, *args, **kwargs)

    monkeypatch.setattr(sweep_runner, "enumerate_attack_space", flaky)
    spec = SweepSpec(delta_b=(0.25, 0.3), delta_l=(0.05,), line_fraction=(0.33,), max_buses=(3,))
    with caplog.at_level(logging.ERROR, logger="app.tasks.sweep_runner"):
        result = run_sweep(three_bus, spec, workers=1)

    crashed, survived = result.cells
    assert crashed.error == "RuntimeError: solver went away"
    assert crashed.attack_space == 0
    assert survived.error is None
    assert survived.attack_space > 0
    assert "crashed" in caplog.text


def test_analytical_securing_beats_random_on_average(three_bus):
    (comparison,) = compare_securing(
        three_bus, (0.25, 0.05, 0.33, 3), top_buses=(1,), seeds=tuple(range(20)), workers=1
    )
    assert len(comparison.random_spaces) == 20
    assert comparison.analytical <= comparison.random_mean


def test_heatmap_rows_cover_every_vector(three_bus, three_bus_pre):
    spec = SweepSpec(delta_b=(0.25,), delta_l=(0.05,), line_fraction=(0.33,), max_buses=(3,))
    result = run_sweep(three_bus, spec, workers=1)
    vectors = enumerate_attack_space(three_bus, three_bus_pre)
    assert vectors

    heatmap = result.heatmaps[3]
    for outage in range(1, three_bus.n_lines + 1):
        hitting = sum(any(p.outage == outage for p in v.overload_pairs) for v in vectors)
        assert sum(heatmap[outage - 1]) >= hitting
    assert sum(map(sum, heatmap)) == sum(len(v.overload_pairs) for v in vectors)


def test_bus_frequency_ranks_like_the_vectors(three_bus, three_bus_pre):
    spec = SweepSpec(delta_b=(0.25,), delta_l=(0.05,), line_fraction=(0.33,), max_buses=(3,))
    frequency = run_sweep(three_bus, spec, workers=1).bus_frequency
    ranked = sorted(
        (bus for bus, count in enumerate(frequency, start=1) if count),
        key=lambda bus: (-frequency[bus - 1], bus),
    )
    assert ranked == rank_buses_by_frequency(enumerate_attack_space(three_bus, three_bus_pre))
