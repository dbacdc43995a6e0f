"""
Line outage distribution factors.

The sensitivity matrix X is the inverse of the bus admittance matrix with the
slack row and column eliminated (zero padded back to b x b). For outage of
line k (p -> q) and monitored line i (a -> b):

    LODF_i^k = (z_k / z_i) * (X_ap - X_aq - X_bp + X_bq) / (z_k - (X_pp + X_qq - 2 X_pq))

with z = 1/d. A vanishing denominator means line k is a bridge.
"""

import logging

import numpy as np

from app.config import get_settings
from app.schemas.grid import GridCase
from app.schemas.powerflow import LodfMatrix, PowerFlowState
from app.services.powerflow import admittance_vector, incidence_matrix, laplacian, non_slack
from app.utils.errors import IslandingContingencyError

logger = logging.getLogger(__name__)


def build_ybus(case: GridCase) -> np.ndarray:
    """
    Bus admittance matrix of the lossless network.

    Off-diagonals are minus the summed admittance of lines joining the two
    buses; each diagonal is the sum of incident admittances, so rows sum to 0.
    """
    return laplacian(case)


def sensitivity_matrix(case: GridCase) -> np.ndarray:
    """Inverse of the slack-reduced Ybus, padded with zeros at the slack."""
    keep = non_slack(case)
    ybus = build_ybus(case)
    inverse = np.zeros_like(ybus)
    inverse[np.ix_(keep, keep)] = np.linalg.inv(ybus[np.ix_(keep, keep)])
    return inverse


def compute_lodf(case: GridCase) -> LodfMatrix:
    """
    Compute the full l x l LODF matrix.

    Islanding outages are flagged rather than raised; their columns hold NaN
    except for the -1 self factor.
    """
    tolerance = get_settings().islanding_tolerance
    incidence = incidence_matrix(case)
    admittance = admittance_vector(case)
    reactance = 1.0 / admittance
    sensitivity = sensitivity_matrix(case)

    # shared[i, k] = X_ap - X_aq - X_bp + X_bq
    shared = incidence @ sensitivity @ incidence.T
    denominator = reactance - np.diag(shared)
    islanding = np.abs(denominator) < tolerance

    with np.errstate(divide="ignore", invalid="ignore"):
        factors = (reactance[None, :] / reactance[:, None]) * shared / denominator[None, :]
    factors[:, islanding] = np.nan
    np.fill_diagonal(factors, -1.0)

    if islanding.any():
        logger.info(
            "Outages of lines %s island the network",
            [k + 1 for k in np.flatnonzero(islanding)],
        )

    return LodfMatrix(
        factors=tuple(tuple(row) for row in factors.tolist()),
        islanding=tuple(bool(flag) for flag in islanding),
    )


def post_contingency_flows(state: PowerFlowState, lodf: LodfMatrix, k: int) -> np.ndarray:
    """
    Predict flows after line k trips: P_i + LODF_i^k * P_k.

    Args:
        state: Pre-outage operating point
        lodf: Factors for the same topology
        k: Tripped line id (1-based)

    Returns:
        Flow per line; the entry of the tripped line is NaN

    Raises:
        IslandingContingencyError: Line k is a bridge
    """
    if lodf.islanding[k - 1]:
        raise IslandingContingencyError(k)

    flows = state.flows()
    column = lodf.as_array()[:, k - 1]
    predicted = flows + column * flows[k - 1]
    predicted[k - 1] = np.nan
    return predicted


def contingency_flow_matrix(flows: np.ndarray, factors: np.ndarray) -> np.ndarray:
    """
    All post-contingency flows at once.

    Entry [i, k] is the flow on line i after line k trips. Diagonal and
    islanding columns are NaN.
    """
    matrix = flows[:, None] + factors * flows[None, :]
    np.fill_diagonal(matrix, np.nan)
    return matrix
