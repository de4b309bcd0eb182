#!/usr/bin/env python3
"""
Relaxation Tests - problem specs, the Mayer lift, penalized problems and the velocity hull
"""

import numpy as np
import pytest

from constants import MAYER_DIMENSION
from costs.lagrangians import LagrangianKind, TerminalCost
from domain.instance import build_instance
from exceptions import AlphaTooSmallError, PreconditionError
from geometry.goursat import controlled_field, vector_field
from relaxation.hull import convexified_lagrangian, velocity_hull_membership
from relaxation.problems import (
    TargetMode,
    contender_cost,
    lift_curve,
    lifted_field,
    lifted_terminal_value,
    mayer_lift,
    penalized_spec,
    problem_spec,
    spec_from_dict,
)
from trajectories.integrators import chained_flow, young_chained_flow
from trajectories.paths import ControlPath, Curve, YoungPath
from trajectories.reference import axis_path, reference_minimizer


@pytest.fixture
def inst():
    return build_instance()


@pytest.fixture
def spec(inst):
    return problem_spec(inst, LagrangianKind.VEEVEE)


def test_spec_document_round_trip(inst):
    smooth = inst.with_changes(eps_moll=0.005)
    spec = problem_spec(smooth, "MOLLIFIED", TerminalCost(alpha=1.0, eps=1e-3), TargetMode.NONE)
    decoded = spec_from_dict(smooth, spec.to_dict())
    assert decoded.lagrangian.kind is LagrangianKind.MOLLIFIED
    assert decoded.lagrangian.eps == pytest.approx(0.005)
    assert decoded.terminal == spec.terminal
    assert decoded.target_mode is TargetMode.NONE


def test_mayer_lift_only_once(spec):
    lifted = mayer_lift(spec)
    assert lifted.lifted
    assert lifted.state_dim == spec.state_dim + 1
    with pytest.raises(PreconditionError):
        mayer_lift(lifted)


def test_lifted_field_appends_the_density(spec, inst):
    lifted = mayer_lift(spec)
    x = np.concatenate((inst.axis_point(0.0), [0.3]))
    u = np.array([1.0, 0.0])
    v = lifted_field(lifted, x, u)
    assert np.allclose(v[:-1], controlled_field(inst.axis_point(0.0), u))
    assert v[-1] == pytest.approx(3.0)
    assert np.allclose(lifted.field(x, u), v)
    assert lifted.running_density(x[:-1], u) == 0.0


def test_lift_curve_accumulates_the_cost(spec, inst):
    ypath, curve = reference_minimizer(inst)
    lifted_curve = lift_curve(spec, curve, ypath)
    assert lifted_curve.dim == inst.d + 1
    assert lifted_curve.points[0, -1] == 0.0
    assert lifted_curve.end[-1] == pytest.approx(2.0 * inst.a, abs=1e-10)
    assert np.all(np.diff(lifted_curve.points[:, -1]) >= 0.0)
    assert lifted_terminal_value(mayer_lift(spec), lifted_curve) == pytest.approx(2.0 * inst.a, abs=1e-10)


def test_lift_curve_rejects_lifted_specs(spec, inst):
    _, curve = reference_minimizer(inst)
    with pytest.raises(PreconditionError):
        lift_curve(mayer_lift(spec), curve)


def _random_control_path(inst, rng, n=12):
    return ControlPath(np.linspace(-inst.a_delta, inst.a_delta, n + 1), rng.uniform(-1.0, 1.0, (n, 2)))


def _random_young_path(inst, rng, n=12):
    atoms, weights = [], []
    for _ in range(n):
        m = int(rng.integers(1, 4))
        atoms.append(rng.uniform(-1.0, 1.0, (m, 2)))
        weights.append(rng.dirichlet(np.ones(m)))
    return YoungPath(np.linspace(-inst.a_delta, inst.a_delta, n + 1), tuple(atoms), tuple(weights))


def test_lift_curve_matches_the_classical_cost(spec, inst):
    rng = np.random.default_rng(11)
    for _ in range(100):
        path = _random_control_path(inst, rng)
        curve = chained_flow(inst, path, inst.x0, substeps=2)
        lifted = lift_curve(spec, curve)
        assert lifted.end[-1] == pytest.approx(contender_cost(spec, curve).running, abs=1e-8)
        assert np.allclose(lifted.end[: inst.d], curve.end, atol=1e-9)


def test_lift_curve_matches_the_relaxed_cost(spec, inst):
    rng = np.random.default_rng(12)
    for _ in range(100):
        ypath = _random_young_path(inst, rng)
        curve = young_chained_flow(inst, ypath, inst.x0, substeps=2)
        lifted = lift_curve(spec, curve, ypath)
        assert lifted.end[-1] == pytest.approx(contender_cost(spec, curve, ypath).running, abs=1e-8)
        assert np.allclose(lifted.end[: inst.d], curve.end, atol=1e-9)


def test_lift_curve_splits_at_the_support_edges(spec, inst):
    path = ControlPath(np.array([-inst.a_delta, inst.a_delta]), np.array([[1.0, 0.0]]))
    lifted = lift_curve(spec, chained_flow(inst, path, inst.x0), steps_per_interval=1)
    x1 = lifted.points[:, 0]
    assert np.any(np.isclose(x1, -inst.a, rtol=0.0, atol=1e-12))
    assert np.any(np.isclose(x1, inst.a, rtol=0.0, atol=1e-12))
    assert lifted.end[-1] == pytest.approx(6.0 * inst.a, abs=1e-10)
    with pytest.raises(ValueError):
        lift_curve(spec, chained_flow(inst, path, inst.x0), steps_per_interval=0)


def test_lift_never_shrinks_sup_distance(spec, inst):
    rng = np.random.default_rng(13)
    for _ in range(20):
        first = lift_curve(spec, chained_flow(inst, _random_control_path(inst, rng), inst.x0))
        second = lift_curve(spec, young_chained_flow(inst, _random_young_path(inst, rng), inst.x0))
        base_first = Curve(first.times, first.points[:, : inst.d])
        base_second = Curve(second.times, second.points[:, : inst.d])
        assert first.sup_distance(second) >= base_first.sup_distance(base_second) - 1e-15


def test_contender_cost_of_the_axis(spec, inst):
    curve = chained_flow(inst, axis_path(inst, 60), inst.x0)
    assert contender_cost(spec, curve).total == pytest.approx(6.0 * inst.a, abs=1e-12)


def test_penalized_spec(inst):
    with pytest.raises(AlphaTooSmallError):
        penalized_spec(inst, alpha=2.0 * inst.a, eps=1e-3)
    spec = penalized_spec(inst, alpha=1.0, eps=1e-3)
    assert spec.target_mode is TargetMode.NONE
    assert spec.terminal.alpha == 1.0
    ypath, curve = reference_minimizer(inst)
    assert contender_cost(spec, curve, ypath).terminal == pytest.approx(0.0)


def test_hull_contains_the_drift(spec, inst):
    x = inst.axis_point(0.0)
    cert = velocity_hull_membership(spec, x, vector_field(1, x))
    assert cert is not None
    assert len(cert.weights) <= inst.d + 2
    assert cert.weights.sum() == pytest.approx(1.0)
    assert cert.residual <= 1e-9


def test_hull_rejects_bracket_directions(spec, inst):
    x = inst.axis_point(0.0)
    assert velocity_hull_membership(spec, x, vector_field(3, x)) is None


def test_lifted_hull_respects_the_cost_floor(spec, inst):
    lifted = mayer_lift(spec)
    x = inst.axis_point(0.0)
    drift = vector_field(1, x)
    assert velocity_hull_membership(lifted, x, np.concatenate((drift, [0.5]))) is None
    cert = velocity_hull_membership(lifted, x, np.concatenate((drift, [1.0])))
    assert cert is not None
    assert np.allclose(np.abs(cert.atoms), 1.0)


def test_convexified_lagrangian_on_the_axis(spec, inst):
    x = inst.axis_point(0.0)
    assert convexified_lagrangian(spec, x, vector_field(1, x)) == pytest.approx(1.0, abs=1e-9)
    assert convexified_lagrangian(spec, x, vector_field(4, x)) == np.inf


def test_mayer_lift_in_higher_dimension():
    inst5 = build_instance(d=MAYER_DIMENSION)
    lifted = mayer_lift(problem_spec(inst5, "VEE"))
    assert lifted.state_dim == 6
    x = np.zeros(6)
    v = lifted_field(lifted, x, np.array([0.5, -1.0]))
    assert v.shape == (6,)
    assert v[-1] == pytest.approx(1.0)
