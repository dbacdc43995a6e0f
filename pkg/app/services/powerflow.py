"""
DC power flow.

Lines are lossless, voltages are 1 pu and angle differences are small, so
- flow on line i is d_i * (theta_from - theta_to)
- bus consumption P^D - P^G equals inflow minus outflow
- B * theta = P^G - P^D with the slack row and column removed
"""

import logging
from typing import Optional, Sequence

import numpy as np

from app.config import get_settings
from app.schemas.grid import GridCase
from app.schemas.powerflow import PowerFlowState
from app.utils.errors import IslandingContingencyError, PowerImbalanceError, SingularSystemError

logger = logging.getLogger(__name__)


def incidence_matrix(case: GridCase) -> np.ndarray:
    """l x b matrix with +1 at each line's from-bus and -1 at its to-bus."""
    matrix = np.zeros((case.n_lines, case.n_buses))
    for i, line in enumerate(case.lines):
        matrix[i, line.from_bus - 1] = 1.0
        matrix[i, line.to_bus - 1] = -1.0
    return matrix


def admittance_vector(case: GridCase) -> np.ndarray:
    return np.array([line.admittance for line in case.lines])


def laplacian(case: GridCase, out_of_service: Optional[int] = None) -> np.ndarray:
    """Full b x b susceptance matrix A^T D A, optionally with one line removed."""
    incidence = incidence_matrix(case)
    admittance = admittance_vector(case)
    if out_of_service is not None:
        admittance[out_of_service - 1] = 0.0
    return incidence.T @ (admittance[:, None] * incidence)


def non_slack(case: GridCase) -> np.ndarray:
    """Bus positions (0-based) of the state variables."""
    return np.array([j for j in range(case.n_buses) if j != case.slack_bus - 1], dtype=int)


def _reduce(case: GridCase, matrix: np.ndarray) -> np.ndarray:
    keep = non_slack(case)
    return matrix[np.ix_(keep, keep)]


def build_b_matrix(case: GridCase) -> np.ndarray:
    """
    Build the reduced susceptance matrix.

    Returns:
        Symmetric (b-1) x (b-1) matrix with the slack row and column removed

    Raises:
        SingularSystemError: The matrix has lost rank (disconnected network)
    """
    reduced = _reduce(case, laplacian(case))
    if np.linalg.matrix_rank(reduced) < reduced.shape[0]:
        raise SingularSystemError("reduced susceptance matrix is singular")
    return reduced


def _solve_angles(case: GridCase, reduced: np.ndarray, injection: np.ndarray) -> np.ndarray:
    settings = get_settings()
    keep = non_slack(case)
    rhs = injection[keep]
    try:
        solution = np.linalg.solve(reduced, rhs)
    except np.linalg.LinAlgError:
        raise SingularSystemError("reduced susceptance matrix is singular")

    residual = np.max(np.abs(reduced @ solution - rhs), initial=0.0)
    if residual > settings.residual_tolerance * max(1.0, np.max(np.abs(rhs), initial=0.0)):
        raise SingularSystemError(f"angle solve residual {residual:.3e} above tolerance")

    theta = np.zeros(case.n_buses)
    theta[keep] = solution
    return theta


def line_flows(case: GridCase, theta: Sequence[float]) -> np.ndarray:
    """Flows d_i * (theta_from - theta_to) for a given angle vector."""
    return admittance_vector(case) * (incidence_matrix(case) @ np.asarray(theta, dtype=float))


def _balanced(case: GridCase, gen: Sequence[float], load: Sequence[float]):
    gen = np.asarray(gen, dtype=float)
    load = np.asarray(load, dtype=float)
    if gen.shape != (case.n_buses,) or load.shape != (case.n_buses,):
        raise PowerImbalanceError(f"dispatch and load need {case.n_buses} per-bus entries")

    mismatch = gen.sum() - load.sum()
    if abs(mismatch) > get_settings().flow_tolerance:
        raise PowerImbalanceError(
            f"generation {gen.sum():.6f} and load {load.sum():.6f} differ by {mismatch:.3e} pu"
        )
    return gen, load


def solve_powerflow(case: GridCase, gen: Sequence[float], load: Sequence[float]) -> PowerFlowState:
    """
    Solve the DC power flow for one operating point.

    Args:
        case: Grid case
        gen: Generation per bus (pu), position j-1 for bus j
        load: Load per bus (pu)

    Returns:
        PowerFlowState with angles, flows and consumptions

    Raises:
        PowerImbalanceError: Generation and load differ by more than the tolerance
        SingularSystemError: The network cannot be solved
    """
    gen, load = _balanced(case, gen, load)
    theta = _solve_angles(case, build_b_matrix(case), gen - load)
    flows = line_flows(case, theta)

    return PowerFlowState(
        theta=tuple(theta.tolist()),
        line_flow=tuple(flows.tolist()),
        injection=tuple((load - gen).tolist()),
    )


def solve_outage_flows(
    case: GridCase, gen: Sequence[float], load: Sequence[float], line_id: int
) -> np.ndarray:
    """
    Re-solve the power flow with one line removed.

    Returns:
        Flow per line with the tripped line reported as 0

    Raises:
        IslandingContingencyError: Removing the line disconnects the network
    """
    gen, load = _balanced(case, gen, load)
    reduced = _reduce(case, laplacian(case, out_of_service=line_id))
    if np.linalg.matrix_rank(reduced) < reduced.shape[0]:
        raise IslandingContingencyError(line_id)

    theta = _solve_angles(case, reduced, gen - load)
    flows = line_flows(case, theta)
    flows[line_id - 1] = 0.0
    return flows


def ptdf_matrix(case: GridCase) -> np.ndarray:
    """
    l x b power transfer distribution factors.

    Column j gives the line flows caused by injecting 1 pu at bus j and
    withdrawing it at the slack bus.
    """
    keep = non_slack(case)
    inverse = np.zeros((case.n_buses, case.n_buses))
    inverse[np.ix_(keep, keep)] = np.linalg.inv(build_b_matrix(case))
    return admittance_vector(case)[:, None] * (incidence_matrix(case) @ inverse)
