"""
DC state estimation and bad data detection.

Measurement model z = H x + e with the non-slack bus angles as state x.
- rows 1..l: forward line flows
- rows l+1..2l: backward line flows (negated forward rows)
- rows 2l+1..2l+b: bus consumptions (inflow minus outflow)

An injection a = H c shifts the estimate by c and leaves the residual unchanged,
which is what makes such an injection invisible to residual-based detection.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from app.config import get_settings
from app.schemas.estimation import EstimationResult, MeasurementVector
from app.schemas.grid import GridCase
from app.schemas.powerflow import PowerFlowState
from app.services.powerflow import admittance_vector, incidence_matrix, non_slack
from app.utils.errors import UnobservableError

logger = logging.getLogger(__name__)


def build_h_matrix(case: GridCase) -> np.ndarray:
    """
    Measurement Jacobian over all m = 2l + b measurements.

    Returns:
        m x (b-1) matrix with the slack column dropped
    """
    incidence = incidence_matrix(case)
    forward = admittance_vector(case)[:, None] * incidence
    consumption = -incidence.T @ forward
    full = np.vstack([forward, -forward, consumption])
    return full[:, non_slack(case)]


def measurement_values(case: GridCase, delta_line: Sequence[float], delta_bus: Sequence[float]) -> np.ndarray:
    """Assemble a full m-vector from line flow and bus consumption values."""
    delta_line = np.asarray(delta_line, dtype=float)
    return np.concatenate([delta_line, -delta_line, np.asarray(delta_bus, dtype=float)])


def taken_indices(case: GridCase) -> np.ndarray:
    return np.flatnonzero(case.taken_mask()) + 1


def simulate_measurements(
    case: GridCase,
    state: PowerFlowState,
    noise_sigma: float = 0.0,
    seed: Optional[int] = None,
) -> MeasurementVector:
    """
    Meter readings of an operating point.

    Args:
        case: Grid case
        state: Operating point to measure
        noise_sigma: Standard deviation of additive Gaussian noise (pu); 0 is noiseless
        seed: Seed for the noise generator

    Returns:
        MeasurementVector restricted to taken measurements
    """
    full = measurement_values(case, state.line_flow, state.injection)
    indices = taken_indices(case)
    values = full[indices - 1]
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        values = values + rng.normal(0.0, noise_sigma, size=values.shape)
    return MeasurementVector(indices=tuple(indices.tolist()), values=tuple(values.tolist()))


def default_tau(taken_count: int) -> float:
    return get_settings().tau_scale * float(np.sqrt(taken_count))


def _rows(case: GridCase, z: MeasurementVector) -> np.ndarray:
    return build_h_matrix(case)[np.asarray(z.indices, dtype=int) - 1]


def estimate(
    case: GridCase,
    z: MeasurementVector,
    weights: Optional[Sequence[float]] = None,
    tau: Optional[float] = None,
) -> EstimationResult:
    """
    Weighted least squares estimate x_hat = (H^T W H)^-1 H^T W z.

    Args:
        case: Grid case
        z: Readings of the taken measurements
        weights: Reciprocal variance per reading; identity when omitted
        tau: Bad data threshold on ||z - H x_hat||; default scales with sqrt(count)

    Returns:
        EstimationResult with the estimate and detection verdict

    Raises:
        UnobservableError: The taken rows of H are rank deficient
    """
    h = _rows(case, z)
    values = z.as_array()
    n_states = h.shape[1]

    rank = np.linalg.matrix_rank(h)
    if rank < n_states:
        raise UnobservableError(n_states - rank)

    w = np.ones(len(values)) if weights is None else np.asarray(weights, dtype=float)
    gain = h.T @ (w[:, None] * h)
    x_hat = np.linalg.solve(gain, h.T @ (w * values))

    residual = values - h @ x_hat
    residual_norm = float(np.linalg.norm(residual))
    threshold = default_tau(len(values)) if tau is None else tau
    flagged = residual_norm > threshold

    bad = None
    if flagged:
        bad = int(z.indices[int(np.argmax(np.abs(residual)))])
        logger.info("Bad data detected: residual %.3e > tau %.3e", residual_norm, threshold)

    return EstimationResult(
        x_hat=tuple(x_hat.tolist()),
        residual_norm=residual_norm,
        tau=threshold,
        flagged=flagged,
        bad_measurement=bad,
    )


def stealth_check(
    case: GridCase,
    z: MeasurementVector,
    a: Sequence[float],
    c: Sequence[float],
) -> bool:
    """
    Check that injecting ``a`` and shifting the state by ``c`` is undetectable.

    Args:
        case: Grid case
        z: Clean readings
        a: Injection over all m measurements (only taken entries are used)
        c: Shift of the non-slack angles

    Returns:
        True when a = H c and the estimation residual is unchanged
    """
    tolerance = get_settings().stealth_tolerance
    h = _rows(case, z)
    values = z.as_array()
    injected = np.asarray(a, dtype=float)[np.asarray(z.indices, dtype=int) - 1]
    shift = np.asarray(c, dtype=float)

    scale = max(1.0, float(np.max(np.abs(injected), initial=0.0)))
    if np.max(np.abs(injected - h @ shift), initial=0.0) > tolerance * scale:
        return False

    x_hat, *_ = np.linalg.lstsq(h, values, rcond=None)
    before = np.linalg.norm(values - h @ x_hat)
    after = np.linalg.norm(values + injected - h @ (x_hat + shift))
    return bool(abs(after - before) <= tolerance * max(1.0, float(np.linalg.norm(values))))
