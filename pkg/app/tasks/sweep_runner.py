"""
Sweep Runner - evaluates attack-space cells on a worker pool.

Each cell is an independent job: a configured case, the attack-free dispatch
and the cell parameters go in, the attack-space size and per-vector
aggregates come out. Cells share nothing mutable, so they run in separate
processes and results are returned in submission order.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.schemas.dispatch import ScopfSolution
from app.schemas.grid import GridCase
from app.schemas.powerflow import LodfMatrix
from app.schemas.sweep import SweepCell
from app.services.attack_synthesis import enumerate_attack_space, goal_from_case
from app.utils.errors import GridThreatError

logger = logging.getLogger(__name__)


class CellJob(NamedTuple):
    case: GridCase
    pre: ScopfSolution
    lodf: LodfMatrix
    cell: SweepCell


class CellOutcome(NamedTuple):
    cell: SweepCell
    bus_counts: Tuple[int, ...]
    # (tripped line, overloaded line, vectors)
    pair_counts: Tuple[Tuple[int, int, int], ...]


def run_cell(job: CellJob) -> CellOutcome:
    """Enumerate one cell; failures are recorded on the cell instead of raised."""
    case, pre, lodf, cell = job
    empty = (0,) * case.n_buses
    try:
        # Cells already run on the pool, so the subset loop stays in-process
        vectors = enumerate_attack_space(case, pre, goal_from_case(case, pre), lodf, workers=1)
    except GridThreatError as exc:
        logger.warning("Cell %s failed: %s", _describe(cell), exc.detail)
        return CellOutcome(cell.model_copy(update={"error": exc.detail}), empty, ())
    except Exception as exc:
        logger.exception("Cell %s crashed", _describe(cell))
        detail = f"{type(exc).__name__}: {exc}"
        return CellOutcome(cell.model_copy(update={"error": detail}), empty, ())

    buses = np.zeros(case.n_buses, dtype=int)
    pairs = np.zeros((case.n_lines, case.n_lines), dtype=int)
    for vector in vectors:
        buses += np.asarray(vector.compromised, dtype=int)
        for pair in vector.overload_pairs:
            pairs[pair.outage - 1, pair.line - 1] += 1

    counted = tuple(
        (int(k) + 1, int(i) + 1, int(pairs[k, i])) for k, i in zip(*np.nonzero(pairs))
    )
    logger.debug("Cell %s: %d vectors", _describe(cell), len(vectors))
    return CellOutcome(
        cell.model_copy(update={"attack_space": len(vectors)}),
        tuple(int(v) for v in buses),
        counted,
    )


def _describe(cell: SweepCell) -> str:
    return (
        f"(delta_b={cell.delta_b}, delta_l={cell.delta_l}, fraction={cell.line_fraction}, "
        f"T_B={cell.max_buses}, policy={cell.policy}, seed={cell.seed})"
    )


def run_jobs(jobs: Sequence[CellJob], workers: Optional[int] = 1) -> List[CellOutcome]:
    """
    Run cell jobs, in-process for a single worker, otherwise on a process pool.

    Returns:
        Outcomes in the order of ``jobs``
    """
    workers = max(1, workers or 1)
    logger.info("Running %d sweep cells on %d worker(s)", len(jobs), workers)
    if workers == 1 or len(jobs) <= 1:
        return [run_cell(job) for job in jobs]

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_cell, jobs))
