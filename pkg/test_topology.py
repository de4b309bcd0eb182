#!/usr/bin/env python3
"""
Topology Tests - winding, crossing intervals, shells and ball-box scaling
"""

import math

import numpy as np
import pytest

from domain.instance import build_instance
from domain.region import RegionTag, classify, spiral_center
from exceptions import CostPreconditionError, NoCrossingError, OriginHitError, PreconditionError
from geometry.goursat import phi
from topology.ballbox import (
    ballbox_probe,
    default_radii,
    estimate_cbar,
    fit_scaling_exponents,
    generic_base_point,
    sample_radii,
)
from topology.shells import apriori_radius_check, block_length, polygonal_winding_bound, shell_partition
from topology.winding import (
    PlanarCurve,
    crossing_interval,
    ring_lift,
    winding_bound_check,
    winding_integral,
)
from trajectories.integrators import chained_flow
from trajectories.paths import ControlPath, Curve
from trajectories.reference import axis_path, reference_minimizer


@pytest.fixture
def inst():
    return build_instance()


def _circle(turns: float, n: int = 400) -> PlanarCurve:
    s = np.linspace(0.0, 2.0 * math.pi * turns, n)
    return PlanarCurve(s, np.column_stack((np.cos(s), np.sin(s))))


def _tube_axis_curve(inst) -> Curve:
    t = np.linspace(-inst.a, inst.a, 4001)
    y = np.column_stack((t, spiral_center(t, inst)))
    return Curve(times=t, points=phi(y))


def test_circle_winding():
    assert winding_integral(_circle(1.0)) == pytest.approx(2.0 * math.pi)
    assert winding_integral(_circle(1.0).reversed()) == pytest.approx(-2.0 * math.pi)
    assert winding_integral(_circle(3.0, 1200)) == pytest.approx(6.0 * math.pi)


def test_winding_through_origin():
    pc = PlanarCurve(np.arange(3.0), np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(OriginHitError) as info:
        winding_integral(pc)
    assert info.value.sample_index == 1


def test_single_sample_has_no_winding():
    assert winding_integral(PlanarCurve(np.zeros(1), np.array([[1.0, 1.0]]))) == 0.0


def _wobbly_loop(rng, n: int = 600) -> PlanarCurve:
    s = np.linspace(0.0, 2.0 * math.pi, n)
    radius = 1.0 + 0.3 * np.sin(3.0 * s + rng.uniform(0.0, 2.0 * math.pi))
    angle = s + 0.4 * np.sin(2.0 * s)
    return PlanarCurve(s, np.column_stack((radius * np.cos(angle), radius * np.sin(angle))))


def test_reversal_negates_the_winding():
    rng = np.random.default_rng(31)
    for _ in range(10):
        pc = PlanarCurve(np.arange(50.0), rng.uniform(0.2, 1.0, (50, 2)) * rng.choice([-1.0, 1.0], (50, 2)))
        assert winding_integral(pc.reversed()) == pytest.approx(-winding_integral(pc), abs=1e-12)


def test_winding_adds_over_concatenation():
    rng = np.random.default_rng(32)
    points = rng.uniform(0.2, 1.0, (80, 2)) * rng.choice([-1.0, 1.0], (80, 2))
    whole = PlanarCurve(np.arange(80.0), points)
    head = PlanarCurve(np.arange(41.0), points[:41])
    tail = PlanarCurve(np.arange(40.0, 80.0), points[40:])
    assert winding_integral(whole) == pytest.approx(winding_integral(head) + winding_integral(tail), abs=1e-12)


def test_leashed_curves_wind_alike():
    rng = np.random.default_rng(33)
    for _ in range(20):
        dog = _wobbly_loop(rng)
        distance = np.linalg.norm(dog.points, axis=1)
        leash = rng.uniform(0.0, 0.9, len(distance)) * distance
        angle = rng.uniform(0.0, 2.0 * math.pi, len(distance))
        walker = PlanarCurve(dog.times, dog.points + leash[:, None] * np.column_stack((np.cos(angle), np.sin(angle))))
        assert abs(winding_integral(walker) - winding_integral(dog)) < math.pi


def test_crossing_interval_of_the_reference(inst):
    _, curve = reference_minimizer(inst)
    i0, i1, t0, t1 = crossing_interval(curve, inst)
    assert i0 < i1
    assert t0 == pytest.approx(-inst.a, abs=1e-12)
    assert t1 == pytest.approx(inst.a, abs=1e-12)


def test_resting_curve_never_crosses(inst):
    path = ControlPath(np.array([-inst.a_delta, inst.a_delta]), np.zeros((1, 2)))
    curve = chained_flow(inst, path, inst.x0)
    with pytest.raises(NoCrossingError):
        winding_bound_check(curve, inst)


def test_reference_ring_winding(inst):
    _, curve = reference_minimizer(inst)
    check = winding_bound_check(curve, inst)
    assert check.winding == pytest.approx(2.0 * inst.a * inst.b, rel=1e-3)
    assert check.bound == pytest.approx(inst.a * inst.b - 2.0 * math.pi)
    assert check.passed
    assert check.to_dict()["pass"] is True


def test_ring_lift_stays_away_from_the_origin(inst):
    _, curve = reference_minimizer(inst)
    ring = ring_lift(curve, inst)
    assert np.min(np.abs(ring.as_complex())) > 0.5 / inst.b


def test_block_length():
    assert block_length(1) == 1.0
    assert block_length(4) == pytest.approx(1.0 / 32.0)


def test_tube_axis_lies_in_one_shell(inst):
    curve = _tube_axis_curve(inst)
    partition = shell_partition(curve, inst)
    j = int(math.floor(inst.b))
    assert partition.measure(j) >= 0.99 * 2.0 * inst.a
    assert partition.block_count(j) > 0
    assert not partition.tail_flagged
    assert str(j) in partition.to_dict()["shells"]


def test_polygonal_bound_dominates_the_winding(inst):
    curve = _tube_axis_curve(inst)
    winding = winding_integral(ring_lift(curve, inst, dense=False))
    assert winding == pytest.approx(2.0 * inst.a * inst.b, rel=1e-3)
    bound = polygonal_winding_bound(curve, inst)
    assert bound >= winding


def test_axis_has_no_shells(inst):
    curve = chained_flow(inst, axis_path(inst, 60), inst.x0)
    partition = shell_partition(curve, inst)
    assert partition.runs == []
    assert partition.covered_fraction == 0.0
    assert polygonal_winding_bound(curve, inst, partition) == 0.0


def test_apriori_radius_check_on_the_axis(inst):
    curve = chained_flow(inst, axis_path(inst, 60), inst.x0)
    check = apriori_radius_check(curve, inst, eps=1e-3)
    assert check.passed
    assert check.sup_r == pytest.approx(0.0, abs=1e-15)
    assert check.bound == pytest.approx(5.0 * 1e-3**0.25)
    assert check.cost == pytest.approx(2.0 * inst.a)


def test_apriori_radius_check_rejects_expensive_curves(inst):
    free = inst.unconstrained()
    path = ControlPath.from_durations(-free.a_delta, [0.6], [[0.5, 1.0]])
    curve = chained_flow(free, path, free.x0, substeps=16)
    with pytest.raises(CostPreconditionError) as info:
        apriori_radius_check(curve, free, eps=1e-3)
    assert info.value.cost > 2.0 * free.a


def test_apriori_radius_check_needs_the_control(inst):
    _, curve = reference_minimizer(inst)
    with pytest.raises(PreconditionError):
        apriori_radius_check(curve, inst, eps=1e-3)


def test_ballbox_radius_range(inst):
    with pytest.raises(PreconditionError):
        ballbox_probe(inst, rho=0.0)
    with pytest.raises(PreconditionError):
        ballbox_probe(inst, rho=3.0 / inst.b)


def test_ballbox_scaling_exponents(inst):
    samples = sample_radii(inst, n_samples=500, seed=1)
    assert len(samples) == len(default_radii(inst))
    exponents = fit_scaling_exponents(samples)
    assert np.allclose(exponents, [1.0, 1.0, 2.0, 3.0], atol=0.1)
    cbar = estimate_cbar(samples)
    assert 0.0 < cbar < np.inf


def test_ballbox_draws_fresh_samples_per_radius(inst):
    samples = sample_radii(inst, n_samples=100, seed=1)
    powers = np.array([1.0, 1.0, 2.0, 3.0])
    normalized = np.array([s.displacements / s.rho**powers for s in samples])
    assert not np.allclose(normalized[0], normalized[1])
    assert np.all(normalized <= 1.0 + 1e-9)


def test_generic_base_point_is_inside_and_off_axis(inst):
    p = generic_base_point(inst)
    assert classify(p, inst) is RegionTag.SPIRAL_S
    assert not np.allclose(p, inst.axis_point(0.0))
    assert np.all(np.abs(p[1:]) > 0.0)
    sample = ballbox_probe(inst, rho=1.0 / inst.b, n_samples=20, seed=2)
    assert np.array_equal(sample.base_point, p)


def test_ballbox_displacements_do_not_depend_on_the_base_point(inst):
    rho = 1.0 / inst.b
    generic = ballbox_probe(inst, generic_base_point(inst), rho, n_samples=200, seed=3)
    axis = ballbox_probe(inst, inst.axis_point(0.0), rho, n_samples=200, seed=3)
    assert np.allclose(generic.displacements, axis.displacements, rtol=1e-6, atol=0.0)


def test_ballbox_is_reproducible(inst):
    first = ballbox_probe(inst, rho=1.0 / inst.b, n_samples=50, seed=7)
    second = ballbox_probe(inst, rho=1.0 / inst.b, n_samples=50, seed=7)
    assert np.array_equal(first.displacements, second.displacements)
    assert first.to_dict()["n_samples"] == 50
