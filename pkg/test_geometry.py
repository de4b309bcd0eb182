#!/usr/bin/env python3
"""
Geometry Tests - chained fields, brackets, straightening map and exact flows
"""

import numpy as np
import pytest

from exceptions import IndexRangeError
from geometry.goursat import (
    chained_states,
    controlled_field,
    flow_from,
    frame_matrix,
    lie_bracket_check,
    phi,
    phi_inv,
    radial,
    straightened_field,
    straightened_flow,
    vector_field,
)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.mark.parametrize("d", [4, 5, 7])
def test_frame_matrix_inverse(d):
    A = frame_matrix(0.37, d)
    assert np.allclose(A.entries @ A.inverse().entries, np.eye(d), atol=1e-14)
    assert np.allclose(np.triu(A.entries, 1), 0.0)
    assert np.allclose(np.diag(A.entries), 1.0)


def test_frame_matrix_columns_are_fields_on_axis():
    t, d = 0.21, 6
    A = frame_matrix(t, d)
    x = np.zeros(d)
    x[0] = t
    for k in range(1, d + 1):
        assert np.allclose(A.entries[:, k - 1], vector_field(k, x))


def test_vector_field_values():
    x = np.array([0.5, 9.0, -3.0, 2.0, 1.0])
    assert np.allclose(vector_field(1, x), [1, 0, 0, 0, 0])
    assert np.allclose(vector_field(2, x), [0, 1, 0.5, 0.125, 0.5**3 / 6])
    assert np.allclose(vector_field(5, x), [0, 0, 0, 0, 1])


@pytest.mark.parametrize("k", [0, 5])
def test_vector_field_index_range(k):
    with pytest.raises(IndexRangeError):
        vector_field(k, np.zeros(4))


def test_vector_field_broadcasts(rng):
    x = rng.normal(size=(3, 7, 5))
    stacked = vector_field(3, x)
    assert stacked.shape == x.shape
    assert np.allclose(stacked[1, 2], vector_field(3, x[1, 2]))


@pytest.mark.parametrize("d", [4, 6])
def test_brackets_with_drift_raise_the_index(d, rng):
    x = rng.uniform(-0.5, 0.5, size=d)
    for k in range(2, d):
        assert np.allclose(lie_bracket_check(1, k, x), vector_field(k + 1, x), atol=1e-7)
    assert np.allclose(lie_bracket_check(1, d, x), 0.0, atol=1e-7)


def test_higher_fields_commute(rng):
    x = rng.uniform(-0.5, 0.5, size=5)
    for k in range(2, 6):
        for l in range(2, 6):
            assert np.allclose(lie_bracket_check(k, l, x), 0.0, atol=1e-7)


def test_lie_bracket_rejects_nonpositive_step():
    with pytest.raises(ValueError):
        lie_bracket_check(1, 2, np.zeros(4), h=0.0)


def test_phi_round_trip(rng):
    x = rng.uniform(-1.0, 1.0, size=(50, 6))
    assert np.allclose(phi(phi_inv(x)), x, atol=1e-12)
    assert np.allclose(phi_inv(phi(x)), x, atol=1e-12)


def test_phi_matches_frame_matrix(rng):
    x = rng.uniform(-1.0, 1.0, size=5)
    assert np.allclose(phi(x), frame_matrix(x[0], 5).entries @ x)


def test_radial_vanishes_on_axis():
    x = np.zeros((5, 4))
    x[:, 0] = np.linspace(-0.2, 0.2, 5)
    assert np.allclose(radial(x), 0.0)
    assert radial(np.array([0.0, 0.0, 0.3, 0.4])) == pytest.approx(0.5)


def test_flow_from_solves_the_ode(rng):
    x = rng.uniform(-0.3, 0.3, size=5)
    u = np.array([0.7, -0.4])
    s, h = 0.2, 1e-6
    forward = flow_from(x, u, s + h)
    backward = flow_from(x, u, s - h)
    derivative = (forward - backward) / (2 * h)
    assert np.allclose(derivative, controlled_field(flow_from(x, u, s), u), atol=1e-6)


def test_chained_states_compose_flows(rng):
    x0 = rng.uniform(-0.2, 0.2, size=4)
    controls = rng.uniform(-1, 1, size=(6, 2))
    durations = rng.uniform(0.01, 0.1, size=6)
    states = chained_states(x0, controls, durations)
    x = x0
    for k in range(6):
        x = flow_from(x, controls[k], durations[k])
        assert np.allclose(states[k + 1], x, atol=1e-13)


def test_chained_states_empty_control():
    states = chained_states(np.ones(4), np.zeros((0, 2)), np.zeros(0))
    assert states.shape == (1, 4)


def test_straightened_flow_conjugates_the_flow(rng):
    x = rng.uniform(-0.3, 0.3, size=6)
    u = np.array([-0.6, 0.9])
    for s in (0.0, 0.05, 0.3):
        assert np.allclose(straightened_flow(phi_inv(x), u, s), phi_inv(flow_from(x, u, s)), atol=1e-12)


def test_straightened_field_is_the_derivative(rng):
    y = rng.uniform(-0.3, 0.3, size=5)
    u = np.array([0.8, 0.3])
    h = 1e-6
    derivative = (straightened_flow(y, u, h) - straightened_flow(y, u, -h)) / (2 * h)
    assert np.allclose(derivative, straightened_field(y, u), atol=1e-7)
