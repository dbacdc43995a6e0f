import numpy as np
import pytest

from app.schemas.estimation import MeasurementVector
from app.services.powerflow import non_slack, solve_powerflow
from app.services.state_estimation import (
    build_h_matrix,
    estimate,
    simulate_measurements,
    stealth_check,
)
from app.utils.errors import UnobservableError


@pytest.fixture(scope="module")
def clean(ieee14, ieee14_pre):
    return simulate_measurements(ieee14, ieee14_pre.flows)


def test_h_matrix_shape(ieee14):
    assert build_h_matrix(ieee14).shape == (54, 13)


def test_h_matrix_reproduces_measurements(ieee14, ieee14_pre, clean):
    theta = np.asarray(ieee14_pre.flows.theta)[non_slack(ieee14)]
    assert build_h_matrix(ieee14) @ theta == pytest.approx(clean.as_array(), abs=1e-9)


def test_clean_estimate_recovers_state(ieee14, ieee14_pre, clean):
    result = estimate(ieee14, clean)
    assert not result.flagged
    assert result.bad_measurement is None
    theta = np.asarray(ieee14_pre.flows.theta)[non_slack(ieee14)]
    assert np.asarray(result.x_hat) == pytest.approx(theta, abs=1e-9)


def test_noisy_estimate_uses_seeded_noise(ieee14, ieee14_pre):
    first = simulate_measurements(ieee14, ieee14_pre.flows, noise_sigma=0.01, seed=3)
    second = simulate_measurements(ieee14, ieee14_pre.flows, noise_sigma=0.01, seed=3)
    assert first == second
    assert estimate(ieee14, first, tau=1.0).residual_norm > 0


def test_gross_error_is_flagged(ieee14, clean):
    values = list(clean.values)
    values[4] += 1.0
    result = estimate(ieee14, MeasurementVector(indices=clean.indices, values=tuple(values)))
    assert result.flagged
    assert result.bad_measurement is not None


def test_consistent_injection_is_stealthy(ieee14, clean):
    h = build_h_matrix(ieee14)
    rng = np.random.default_rng(11)
    before = estimate(ieee14, clean).residual_norm
    for _ in range(1000):
        c = rng.normal(0.0, 0.1, size=h.shape[1])
        a = h @ c
        assert stealth_check(ieee14, clean, a, c)

    c = rng.normal(0.0, 0.1, size=h.shape[1])
    shifted = MeasurementVector(indices=clean.indices, values=tuple(clean.as_array() + h @ c))
    assert estimate(ieee14, shifted).residual_norm == pytest.approx(before, abs=1e-9)


def test_inconsistent_injection_is_visible(ieee14, clean):
    h = build_h_matrix(ieee14)
    rng = np.random.default_rng(5)
    a = rng.normal(0.0, 0.1, size=h.shape[0])
    c = np.zeros(h.shape[1])
    # Component of a outside the column space of H
    projection = a - h @ np.linalg.lstsq(h, a, rcond=None)[0]
    assert np.linalg.norm(projection) > 1e-3
    assert not stealth_check(ieee14, clean, a, c)

    attacked = MeasurementVector(indices=clean.indices, values=tuple(clean.as_array() + a))
    assert estimate(ieee14, attacked).flagged


def test_too_few_measurements_are_unobservable(ieee14):
    z = MeasurementVector(indices=(1, 2, 3), values=(0.1, 0.2, 0.3))
    with pytest.raises(UnobservableError) as info:
        estimate(ieee14, z)
    assert info.value.deficiency == 10


def test_three_bus_estimate_matches_flows(three_bus):
    state = solve_powerflow(three_bus, [19, 9, 2], three_bus.load_vector())
    result = estimate(three_bus, simulate_measurements(three_bus, state))
    assert np.asarray(result.x_hat) == pytest.approx(state.theta[1:], abs=1e-9)


def test_weighted_residual_is_orthogonal_to_h(ieee14, ieee14_pre):
    z = simulate_measurements(ieee14, ieee14_pre.flows, noise_sigma=0.02, seed=9)
    weights = np.random.default_rng(9).uniform(0.5, 5.0, size=len(z.values))
    result = estimate(ieee14, z, weights=weights, tau=10.0)

    h = build_h_matrix(ieee14)[np.asarray(z.indices) - 1]
    residual = z.as_array() - h @ np.asarray(result.x_hat)
    assert np.abs(h.T @ (weights * residual)).max() < 1e-8


def test_heavy_weight_pins_its_reading(ieee14, ieee14_pre):
    z = simulate_measurements(ieee14, ieee14_pre.flows, noise_sigma=0.02, seed=4)
    h = build_h_matrix(ieee14)[np.asarray(z.indices) - 1]
    weights = np.ones(len(z.values))
    weights[0] = 1e8

    plain = z.as_array() - h @ np.asarray(estimate(ieee14, z, tau=10.0).x_hat)
    pinned = z.as_array() - h @ np.asarray(estimate(ieee14, z, weights=weights, tau=10.0).x_hat)
    assert abs(pinned[0]) < 1e-6
    assert abs(pinned[0]) < abs(plain[0])


def test_square_system_interpolates(ieee14):
    h = build_h_matrix(ieee14)
    chosen = []
    for index in range(h.shape[0]):
        if np.linalg.matrix_rank(h[chosen + [index]]) == len(chosen) + 1:
            chosen.append(index)
    assert len(chosen) == h.shape[1]

    values = np.random.default_rng(1).normal(size=len(chosen))
    z = MeasurementVector(indices=tuple(i + 1 for i in chosen), values=tuple(values))
    result = estimate(ieee14, z)
    assert result.residual_norm < 1e-9
    assert not result.flagged
    assert np.asarray(result.x_hat) == pytest.approx(np.linalg.solve(h[chosen], values))


def test_single_reading_outside_the_column_space_is_caught(ieee14, clean):
    h = build_h_matrix(ieee14)
    rng = np.random.default_rng(21)
    caught = 0
    for _ in range(1000):
        a = np.zeros(h.shape[0])
        a[rng.integers(h.shape[0])] = rng.uniform(0.1, 1.0) * rng.choice([-1.0, 1.0])
        c = np.linalg.lstsq(h, a, rcond=None)[0]
        if np.abs(a - h @ c).max() < 1e-5:
            continue
        assert not stealth_check(ieee14, clean, a, c)
        caught += 1
    assert caught > 900
