#!/usr/bin/env python3
"""
Trajectory Tests - control paths, integrators, admissibility and the cap planner
"""

import numpy as np
import pytest

from constants import CORNERS
from domain.instance import build_instance
from exceptions import GridMismatchError, PlannerFailedError, PreconditionError, WeightNormalizationError
from geometry.goursat import phi, phi_inv
from trajectories.admissibility import admissible, refine_curve
from trajectories.integrators import chained_flow, integrate_horizontal, integrate_young
from trajectories.paths import (
    ControlPath,
    YoungPath,
    arc_length,
    control_path_from_list,
    save_curve_csv,
    segment_control_index,
)
from trajectories.planner import BangTree, PlannerSettings, plan_cap_connector, straightened_states
from trajectories.reference import alternating_corner_path, axis_path, reference_minimizer


@pytest.fixture
def inst():
    return build_instance()


def test_control_path_validation():
    with pytest.raises(ValueError):
        ControlPath(np.array([0.0, 0.0, 1.0]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ControlPath(np.array([0.0, 1.0]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ControlPath(np.array([0.0, 1.0]), np.array([[np.nan, 0.0]]))


def test_young_path_weights_must_sum_to_one():
    with pytest.raises(WeightNormalizationError):
        YoungPath(np.array([0.0, 1.0]), (np.array([[1.0, 1.0], [1.0, -1.0]]),), (np.array([0.5, 0.4]),))
    with pytest.raises(WeightNormalizationError):
        YoungPath(np.array([0.0, 1.0]), (np.array([[1.0, 1.0], [1.0, -1.0]]),), (np.array([1.0, 0.0]),))


def test_young_path_mean_and_padding(inst):
    ypath, _ = reference_minimizer(inst)
    assert np.allclose(ypath.mean_controls(), [[0, 0], [1, 0], [0, 0]])
    atoms, weights = ypath.padded()
    assert atoms.shape == (3, 4, 2)
    assert np.allclose(weights[1], [0.5, 0.5, 0.0, 0.0])


def test_path_documents():
    path = ControlPath.from_durations(0.0, [0.1, 0.2], [[1.0, 1.0], [-1.0, 0.5]])
    decoded = control_path_from_list(path.to_list())
    assert np.allclose(decoded.breakpoints, [0.0, 0.1, 0.3])
    assert np.allclose(decoded.values, path.values)
    ypath, _ = reference_minimizer(build_instance())
    with pytest.raises(ValueError):
        control_path_from_list(ypath.to_list())


def test_concatenate_shifts_the_tail():
    first = ControlPath.from_durations(0.0, [0.1], [[1.0, 0.0]])
    second = ControlPath.from_durations(5.0, [0.2], [[0.0, 1.0]])
    joined = first.concatenate(second)
    assert np.allclose(joined.breakpoints, [0.0, 0.1, 0.3])


def test_arc_length_of_the_axis_path(inst):
    assert arc_length(axis_path(inst, 60)) == pytest.approx(2.0 * inst.lam * inst.a)
    assert arc_length(ControlPath(np.zeros(1), np.zeros((0, 2)))) == 0.0


def test_rk4_agrees_with_the_exact_flow(inst):
    rng = np.random.default_rng(3)
    breakpoints = np.linspace(-inst.a_delta, inst.a_delta, 31)
    path = ControlPath(breakpoints, rng.uniform(-1.0, 1.0, size=(30, 2)))
    rk4 = integrate_horizontal(inst, path, inst.x0, steps_per_interval=8)
    exact = chained_flow(inst, path, inst.x0, substeps=8)
    assert np.allclose(rk4.times, exact.times)
    assert np.allclose(rk4.points, exact.points, atol=1e-9)


def test_rk4_error_drops_sixteenfold_per_halving():
    # with d = 6 the field along the flow is a degree-4 polynomial in t
    inst6 = build_instance(d=6)
    path = ControlPath(np.array([0.0, 1.0]), np.array([[1.0, 1.0]]))
    exact = chained_flow(inst6, path, np.zeros(6)).end
    errors = [
        np.max(np.abs(integrate_horizontal(inst6, path, np.zeros(6), steps_per_interval=n).end - exact))
        for n in (4, 8, 16)
    ]
    assert errors[-1] > 1e-12
    for coarse, fine in zip(errors, errors[1:]):
        assert 14.0 <= coarse / fine <= 18.0


def test_integrators_reject_empty_step_count(inst):
    with pytest.raises(ValueError):
        integrate_horizontal(inst, axis_path(inst, 10), inst.x0, steps_per_interval=0)


def test_reference_curve_is_admissible(inst):
    ypath, curve = reference_minimizer(inst)
    assert curve.ypath is ypath
    assert np.allclose(curve.end, inst.x1, atol=1e-12)
    report = admissible(curve, inst)
    assert report.admissible
    assert report.first_violation_time is None
    assert abs(report.min_clearance) < 1e-9


def test_axis_curve_ends_at_x1(inst):
    curve = chained_flow(inst, axis_path(inst, 60), inst.x0)
    assert np.allclose(curve.end, inst.x1, atol=1e-15)
    assert admissible(curve, inst).admissible


def test_chattering_leaves_omega_only_when_constrained(inst):
    path = alternating_corner_path(inst, 40)
    constrained = admissible(chained_flow(inst, path, inst.x0), inst)
    assert not constrained.state_feasible
    assert constrained.first_violation_time is not None

    free = inst.unconstrained()
    report = admissible(chained_flow(free, path, free.x0), free)
    assert report.state_feasible
    assert report.admissible


def test_refine_curve_inserts_exact_samples(inst):
    curve = chained_flow(inst, alternating_corner_path(inst, 20), inst.x0)
    dense = refine_curve(curve, inst, refine=4)
    assert len(dense.times) == 4 * (len(curve.times) - 1) + 1
    assert np.allclose(dense.points[::4], curve.points, atol=1e-14)
    assert refine_curve(curve, inst, refine=1) is curve


def test_segment_control_index_mismatch():
    breakpoints = np.array([0.0, 0.5, 1.0])
    assert list(segment_control_index(breakpoints, np.array([0.0, 0.25, 0.5, 1.0]))) == [0, 0, 1]
    with pytest.raises(GridMismatchError):
        segment_control_index(breakpoints, np.array([0.0, 0.4, 1.0]))
    with pytest.raises(GridMismatchError):
        segment_control_index(breakpoints, np.array([0.0, 0.5, 0.9]))


def test_young_integration_uses_the_mean_control(inst):
    ypath, _ = reference_minimizer(inst)
    curve = integrate_young(inst, ypath, inst.x0)
    mean = integrate_horizontal(inst, ypath.mean_path(), inst.x0)
    assert np.allclose(curve.points, mean.points)


def test_curve_csv(inst, tmp_path):
    curve = chained_flow(inst, axis_path(inst, 6), inst.x0)
    path = save_curve_csv(curve, np.zeros(len(curve.times)), str(tmp_path / "curve.csv"))
    lines = open(path).read().strip().splitlines()
    assert lines[0] == "t,x1,x2,x3,x4,clearance"
    assert len(lines) == len(curve.times) + 1


def test_planner_returns_empty_path_for_equal_points(inst):
    path = plan_cap_connector(inst, inst.x1, inst.x1, side=1)
    assert path.n_intervals == 0


def test_planner_preconditions(inst):
    with pytest.raises(PreconditionError):
        plan_cap_connector(inst, inst.x1, inst.x1, side=0)
    with pytest.raises(PreconditionError):
        plan_cap_connector(inst, inst.x0, inst.x1, side=1)
    with pytest.raises(PreconditionError):
        plan_cap_connector(inst, inst.x1, np.array([0.12, 0.0, 0.5, 0.0]), side=1)


def test_planner_reaches_a_corner_reachable_goal(inst):
    corners = np.array(CORNERS, dtype=float)
    durations = np.array([0.003, 0.002, 0.001, 0.001])
    y_goal = straightened_states(phi_inv(inst.x1), corners, durations)[-1, -1]
    goal = phi(y_goal)

    settings = PlannerSettings(max_expansions=50_000)
    path = plan_cap_connector(inst, inst.x1, goal, side=1, seed=0, settings=settings)
    assert path.n_intervals >= 1
    assert np.all(np.isin(np.abs(path.values), [1.0]))
    reached = straightened_states(phi_inv(inst.x1), path.values, path.durations)[-1, -1]
    assert np.linalg.norm(reached - y_goal) <= settings.goal_tolerance


def test_planner_uses_fixed_bang_primitives(inst):
    settings = PlannerSettings(max_expansions=50_000)
    assert settings.primitive_duration(inst) == pytest.approx(inst.a / (5.0 * inst.b))
    path = plan_cap_connector(inst, inst.x0, inst.axis_point(-inst.a), side=-1, seed=4, settings=settings)
    allowed = settings.primitive_duration(inst) * 0.5 ** np.arange(settings.refinements + 1)
    assert np.all(np.isclose(path.durations[:, None], allowed[None, :], rtol=1e-9, atol=0.0).any(axis=1))


def test_planner_path_is_admissible_from_x0(inst):
    settings = PlannerSettings(max_expansions=50_000)
    goal = inst.axis_point(-inst.a)
    path = plan_cap_connector(inst, inst.x0, goal, side=-1, seed=0, settings=settings)
    assert np.all(np.isin(np.abs(path.values), [1.0]))
    assert set(map(tuple, path.values)) <= set(CORNERS)

    curve = integrate_horizontal(inst, path.shifted(-inst.a_delta), inst.x0)
    report = admissible(curve, inst, require_target=False)
    assert report.starts_at_x0
    assert report.state_feasible
    assert np.linalg.norm(phi_inv(curve.end) - phi_inv(goal)) <= settings.goal_tolerance + 1e-9


def test_planner_runs_out_of_expansions(inst):
    with pytest.raises(PlannerFailedError):
        plan_cap_connector(
            inst, inst.x0, inst.axis_point(-inst.a), side=-1, settings=PlannerSettings(max_expansions=3)
        )


def test_planner_is_reproducible(inst):
    settings = PlannerSettings(max_expansions=50_000)
    first = plan_cap_connector(inst, inst.x1, inst.axis_point(inst.a), side=1, seed=9, settings=settings)
    second = plan_cap_connector(inst, inst.x1, inst.axis_point(inst.a), side=1, seed=9, settings=settings)
    assert np.array_equal(first.values, second.values)
    assert np.array_equal(first.breakpoints, second.breakpoints)


def test_polishing_never_worsens_the_miss(inst):
    goal = inst.axis_point(-inst.a)
    rough = plan_cap_connector(inst, inst.x0, goal, side=-1, seed=1, settings=PlannerSettings(max_expansions=50_000))
    settings = PlannerSettings(max_expansions=50_000, polish=True)
    polished = plan_cap_connector(inst, inst.x0, goal, side=-1, seed=1, settings=settings)
    y_start, y_goal = phi_inv(inst.x0), phi_inv(goal)

    def miss(path):
        return np.linalg.norm(straightened_states(y_start, path.values, path.durations)[-1, -1] - y_goal)

    assert miss(polished) <= miss(rough)
    assert np.all(np.isin(np.abs(polished.values), [1.0]))


def test_bang_tree_branches():
    tree = BangTree(np.zeros(4), n_primitives=3)
    first = tree.add(np.ones(4), 0, 2)
    second = tree.add(2.0 * np.ones(4), first, 1)
    assert list(tree.primitives_to(second)) == [2, 1]
    assert tree.nearest(np.full(4, 1.9)) == second
    for k in range(2000):
        tree.add(np.full(4, 3.0 + k), second, 0)
    assert tree.size == 2003
    assert list(tree.primitives_to(2)) == [2, 1]
