"""
Attack-space experiments over attacker capabilities and defences.

A sweep evaluates the attack-space size (see enumerate_attack_space) on every
point of a parameter grid, optionally after securing measurements:
- none: measurements as in the case file
- random:<n>: n taken measurements chosen uniformly with a seeded generator
- analytical:<k>: every measurement metered at the k buses compromised most
  often in the unsecured run of the same grid point
"""

import itertools
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.config import get_settings
from app.schemas.attack import AttackVector
from app.schemas.grid import GridCase
from app.schemas.sweep import SecuringComparison, SecuringPolicy, SweepCell, SweepResult, SweepSpec
from app.services.lodf import compute_lodf
from app.services.scopf import solve_scopf
from app.tasks.sweep_runner import CellJob, CellOutcome, run_jobs
from app.utils.csv_output import write_frame

logger = logging.getLogger(__name__)

# (delta_b, delta_l, line_fraction, max_buses)
GridPoint = Tuple[float, float, float, int]


def rank_buses_by_frequency(vectors: Iterable[AttackVector]) -> List[int]:
    """
    Buses ordered by how many vectors compromise them.

    Returns:
        Bus ids with a nonzero count, most frequent first, ties by bus id
    """
    counts: Dict[int, int] = {}
    for vector in vectors:
        for bus in vector.compromised_buses():
            counts[bus] = counts.get(bus, 0) + 1
    return sorted(counts, key=lambda bus: (-counts[bus], bus))


def _rank_counts(counts: Sequence[int]) -> List[int]:
    return sorted((j + 1 for j, c in enumerate(counts) if c > 0), key=lambda bus: (-counts[bus - 1], bus))


def measurements_at_buses(case: GridCase, buses: Iterable[int]) -> Tuple[int, ...]:
    """Taken measurement indices metered at any of ``buses``."""
    chosen = set(buses)
    taken = case.taken_mask()
    return tuple(
        index for index in range(1, case.n_measurements + 1)
        if taken[index - 1] and case.measurement_bus(index) in chosen
    )


def random_measurements(case: GridCase, count: int, seed: int) -> Tuple[int, ...]:
    """``count`` distinct taken measurements drawn with ``default_rng(seed)``."""
    taken = np.flatnonzero(case.taken_mask()) + 1
    rng = np.random.default_rng(seed)
    picked = rng.choice(taken, size=min(count, len(taken)), replace=False)
    return tuple(sorted(int(i) for i in picked))


def configure_case(case: GridCase, point: GridPoint, secured: Sequence[int] = ()) -> GridCase:
    """Copy of ``case`` with the grid point's attacker limits and extra secured measurements."""
    delta_b, delta_l, fraction, max_buses = point
    limits = case.attacker_limits.model_copy(update={
        "delta_b": delta_b,
        "delta_l": delta_l,
        "target_line_fraction": fraction,
        "max_buses": max_buses,
    })
    extra = set(secured)
    measurements = tuple(
        m.model_copy(update={"secured": True}) if m.index in extra else m
        for m in case.measurements
    )
    return case.model_copy(update={"attacker_limits": limits, "measurements": measurements})


def _points(spec: SweepSpec) -> List[GridPoint]:
    return list(itertools.product(spec.delta_b, spec.delta_l, spec.line_fraction, spec.max_buses))


def _cell(point: GridPoint, policy: str, seed: Optional[int] = None, secured: Sequence[int] = ()) -> SweepCell:
    delta_b, delta_l, fraction, max_buses = point
    return SweepCell(
        delta_b=delta_b, delta_l=delta_l, line_fraction=fraction, max_buses=max_buses,
        policy=policy, seed=seed, secured=tuple(secured),
    )


def run_sweep(case: GridCase, spec: SweepSpec, workers: Optional[int] = None) -> SweepResult:
    """
    Evaluate every cell of the sweep grid.

    Unsecured baselines are computed first; analytical securing ranks buses
    from them. Cell failures are recorded on the cell and the sweep continues.

    Args:
        case: Grid case
        spec: Parameter grid
        workers: Process count; settings default when omitted

    Returns:
        SweepResult with cells in grid order (points, then policies, then seeds)
    """
    workers = workers or get_settings().workers
    pre = solve_scopf(case)
    lodf = compute_lodf(case)
    points = _points(spec)
    policies = [SecuringPolicy.parse(text) for text in spec.securing]

    baseline_jobs = [
        CellJob(configure_case(case, point), pre, lodf, _cell(point, "none")) for point in points
    ]
    baselines = run_jobs(baseline_jobs, workers)
    rankings = {point: _rank_counts(outcome.bus_counts) for point, outcome in zip(points, baselines)}

    keys: List[Tuple[GridPoint, SecuringPolicy, Optional[int]]] = []
    jobs: List[CellJob] = []
    for point in points:
        for policy in policies:
            if policy.kind == "none":
                continue
            seeds = spec.seeds if policy.kind == "random" else (None,)
            for seed in seeds:
                if policy.kind == "random":
                    secured = random_measurements(case, policy.amount, seed)
                else:
                    secured = measurements_at_buses(case, rankings[point][:policy.amount])
                keys.append((point, policy, seed))
                jobs.append(CellJob(
                    configure_case(case, point, secured), pre, lodf,
                    _cell(point, policy.label(), seed, secured),
                ))
    secured_outcomes = dict(zip(keys, run_jobs(jobs, workers)))

    reported: List[CellOutcome] = []
    for point, baseline in zip(points, baselines):
        for policy in policies:
            if policy.kind == "none":
                reported.append(baseline)
                continue
            for seed in (spec.seeds if policy.kind == "random" else (None,)):
                reported.append(secured_outcomes[(point, policy, seed)])

    result = _aggregate(case, reported)
    logger.info("Sweep finished: %d cells", len(result.cells))
    return result


def _aggregate(case: GridCase, outcomes: Sequence[CellOutcome]) -> SweepResult:
    frequency = np.zeros(case.n_buses, dtype=int)
    heatmaps: Dict[int, np.ndarray] = {}
    for outcome in outcomes:
        frequency += np.asarray(outcome.bus_counts, dtype=int)
        heatmap = heatmaps.setdefault(
            outcome.cell.max_buses, np.zeros((case.n_lines, case.n_lines), dtype=int)
        )
        for outage, line, count in outcome.pair_counts:
            heatmap[outage - 1, line - 1] += count

    return SweepResult(
        cells=tuple(outcome.cell for outcome in outcomes),
        bus_frequency=tuple(int(v) for v in frequency),
        heatmaps={
            t_b: tuple(tuple(int(v) for v in row) for row in matrix)
            for t_b, matrix in sorted(heatmaps.items())
        },
    )


def compare_securing(
    case: GridCase,
    point: GridPoint,
    top_buses: Sequence[int] = (1, 2, 3),
    seeds: Sequence[int] = tuple(range(20)),
    workers: Optional[int] = None,
) -> List[SecuringComparison]:
    """
    Analytical against random securing at equal secured-measurement counts.

    For each k in ``top_buses`` the measurements at the k most compromised
    buses are secured; random securing then secures the same number of
    measurements once per seed.
    """
    workers = workers or get_settings().workers
    pre = solve_scopf(case)
    lodf = compute_lodf(case)

    baseline = run_jobs([CellJob(configure_case(case, point), pre, lodf, _cell(point, "none"))], 1)[0]
    ranking = _rank_counts(baseline.bus_counts)

    comparisons = []
    for k in top_buses:
        secured = measurements_at_buses(case, ranking[:k])
        jobs = [CellJob(configure_case(case, point, secured), pre, lodf,
                        _cell(point, f"analytical:{k}", None, secured))]
        for seed in seeds:
            picked = random_measurements(case, len(secured), seed)
            jobs.append(CellJob(configure_case(case, point, picked), pre, lodf,
                                _cell(point, f"random:{len(secured)}", seed, picked)))
        outcomes = run_jobs(jobs, workers)
        spaces = tuple(outcome.cell.attack_space for outcome in outcomes[1:])
        comparisons.append(SecuringComparison(
            top_buses=k,
            secured_count=len(secured),
            baseline=baseline.cell.attack_space,
            analytical=outcomes[0].cell.attack_space,
            random_mean=float(np.mean(spaces)) if spaces else 0.0,
            random_spaces=spaces,
        ))
        logger.info(
            "Securing %d measurements at top %d buses: analytical %d, random mean %.2f",
            len(secured), k, comparisons[-1].analytical, comparisons[-1].random_mean,
        )
    return comparisons


def write_sweep_csvs(result: SweepResult, out_dir: Path) -> List[Path]:
    """Write attack_space.csv, bus_frequency.csv and one heatmap_TB<k>.csv per T_B."""
    out_dir = Path(out_dir)
    cells = pd.DataFrame([
        {
            "delta_b": cell.delta_b,
            "delta_l": cell.delta_l,
            "line_fraction": cell.line_fraction,
            "max_buses": cell.max_buses,
            "policy": cell.policy,
            "seed": "" if cell.seed is None else cell.seed,
            "secured_count": len(cell.secured),
            "attack_space": cell.attack_space,
            "error": cell.error or "",
        }
        for cell in result.cells
    ])
    written = [write_frame(out_dir / "attack_space.csv", cells)]

    ranking = _rank_counts(result.bus_frequency)
    rank_of = {bus: position + 1 for position, bus in enumerate(ranking)}
    frequency = pd.DataFrame({
        "bus": range(1, len(result.bus_frequency) + 1),
        "count": result.bus_frequency,
        "rank": [rank_of.get(bus, "") for bus in range(1, len(result.bus_frequency) + 1)],
    })
    written.append(write_frame(out_dir / "bus_frequency.csv", frequency))

    for t_b, matrix in result.heatmaps.items():
        n_lines = len(matrix)
        heatmap = pd.DataFrame(matrix, columns=[str(i) for i in range(1, n_lines + 1)])
        heatmap.insert(0, "tripped", range(1, n_lines + 1))
        written.append(write_frame(out_dir / f"heatmap_TB{t_b}.csv", heatmap))
    return written


def write_comparison_csv(comparisons: Sequence[SecuringComparison], path: Path) -> Path:
    frame = pd.DataFrame([
        {
            "top_buses": c.top_buses,
            "secured_count": c.secured_count,
            "baseline": c.baseline,
            "analytical": c.analytical,
            "random_mean": c.random_mean,
            "random_runs": len(c.random_spaces),
        }
        for c in comparisons
    ])
    return write_frame(path, frame)
