#!/usr/bin/env python3
"""
Optimization Tests - transcription, multistart gap runs, the lower-bound epsilon,
the occupation LP and the separation experiment
"""

import math

import numpy as np
import pytest

from domain.instance import build_instance
from domain.region import RegionTag, classify_many
from exceptions import MemoryBudgetError, OriginHitError, PreconditionError
from geometry.goursat import phi
import optimize.gap as gap_module
from optimize.gap import (
    TopologyOptions,
    gap_lower_bound_eps,
    multistart_gap_experiment,
    radius_report,
    resample_controls,
    shell_report,
    shell_tail,
)
from optimize.occupation import (
    OccupationGrid,
    assemble_occupation_lp,
    assemble_reference_measure,
    cross_half_widths,
    lattice_states,
    lp_refinement_study,
    occupation_lp,
    x1_lattice,
)
from optimize.separation import fw_separation_experiment
from optimize.transcription import TranscribedProblem, local_search
from relaxation.problems import penalized_spec
from topology.ballbox import estimate_cbar, sample_radii
from topology.winding import winding_bound_check
from trajectories.integrators import chained_flow
from trajectories.paths import ControlPath
from trajectories.reference import alternating_corner_path, axis_path


@pytest.fixture
def inst():
    return build_instance()


def test_resample_controls():
    path = ControlPath(np.array([0.0, 1.0, 2.0]), np.array([[1.0, 0.0], [0.0, 1.0]]))
    controls = resample_controls(path, np.array([0.0, 0.5, 1.5, 2.0]))
    assert np.allclose(controls, [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])


def test_resample_empty_path():
    path = ControlPath(np.zeros(1), np.zeros((0, 2)))
    assert np.array_equal(resample_controls(path, np.linspace(0.0, 1.0, 4)), np.zeros((3, 2)))


def test_transcription_needs_enough_intervals(inst):
    with pytest.raises(PreconditionError):
        TranscribedProblem(inst, N=5)


def test_axis_controls_are_feasible(inst):
    tp = TranscribedProblem(inst, N=20)
    evaluation = tp.evaluate(axis_path(inst, 20).values, weight=100.0)
    assert evaluation.feasible
    assert evaluation.cost == pytest.approx(6.0 * inst.a, abs=1e-9)
    assert evaluation.endpoint_error == pytest.approx(0.0, abs=1e-12)


def test_local_search_does_not_lose_the_start(inst):
    tp = TranscribedProblem(inst, N=20, max_evaluations=300)
    path, cost = local_search(tp, axis_path(inst, 20).values, rng=np.random.default_rng(0))
    assert path.n_intervals == 20
    assert cost <= 6.0 * inst.a + 1e-12


def test_multistart_is_independent_of_the_worker_count(inst):
    kwargs = dict(n_starts=2, N=20, seed=3, max_evaluations=300)
    serial = multistart_gap_experiment(inst, workers=1, **kwargs)
    parallel = multistart_gap_experiment(inst, workers=2, **kwargs)

    assert serial.relaxed_cost == pytest.approx(2.0 * inst.a, abs=1e-12)
    assert serial.margin > 0.0
    assert serial.best_classical_cost == parallel.best_classical_cost
    assert [d["status"] for d in serial.diagnostics] == [d["status"] for d in parallel.diagnostics]
    assert [d["index"] for d in serial.diagnostics] == [0, 1]
    for d in serial.diagnostics:
        assert d["status"] in {"FEASIBLE", "INADMISSIBLE", "FAILED_FEASIBILITY"}


def test_topology_failures_are_recorded_per_start(inst, monkeypatch):
    def touches_origin(curve, inst_):
        raise OriginHitError("ring curve hits the origin", sample_index=0)

    monkeypatch.setattr(gap_module, "winding_bound_check", touches_origin)
    report = multistart_gap_experiment(inst, n_starts=2, N=20, seed=3, max_evaluations=300)
    feasible = [d for d in report.diagnostics if d["status"] == "FEASIBLE"]
    assert feasible
    assert [d["index"] for d in report.diagnostics] == [0, 1]
    for d in feasible:
        assert d["winding"] is None
        assert d["topology_error"]["code"] == "ORIGIN_HIT"


def test_multistart_report_document(inst):
    report = multistart_gap_experiment(inst, n_starts=1, N=20, max_evaluations=200, cbar=100.0, lp_value=0.19)
    document = report.to_dict()
    for key in ("winding", "shells", "radius", "lower_bound_eps", "lp_value", "diagnostics"):
        assert key in document
    assert set(document["shells"]) == {"checked", "enforced", "passed"}
    assert set(document["radius"]) == {"checked", "passed"}
    assert document["lp_value"] == 0.19
    assert 0.0 < document["lower_bound_eps"]
    assert [row[0] for row in report.summary_rows()][:3] == ["relaxed_cost", "best_classical_cost", "margin"]


def test_multistart_needs_a_start(inst):
    with pytest.raises(PreconditionError):
        multistart_gap_experiment(inst, n_starts=0, N=20)


def test_axis_diagnostics(inst):
    curve = chained_flow(inst, axis_path(inst, 60), inst.x0)
    check = winding_bound_check(curve, inst)
    shells = shell_report(curve, inst, check.winding, TopologyOptions())
    assert shells["polygonal_bound"] == 0.0
    assert shells["enforced"] is False
    assert shells["passed"] is None

    radius = radius_report(curve, inst)
    assert radius["pass"]
    assert radius["sup_r"] == pytest.approx(0.0, abs=1e-15)


def test_gap_lower_bound_needs_positive_cbar(inst):
    with pytest.raises(PreconditionError):
        gap_lower_bound_eps(inst, 0.0)


def test_gap_lower_bound_bracket_ends(inst):
    hi = min(1.0, (math.sqrt(2.0) / inst.b / 5.0**2.5) ** 1.6)
    assert gap_lower_bound_eps(inst, 1000.0) == 0.0
    assert gap_lower_bound_eps(inst, 1.0) == pytest.approx(hi)


def test_gap_lower_bound_threshold(inst):
    cbar = 100.0
    target = inst.a * inst.b - 2.0 * math.pi
    eps = gap_lower_bound_eps(inst, cbar)
    hi = min(1.0, (math.sqrt(2.0) / inst.b / 5.0**2.5) ** 1.6)
    assert 0.0 < eps < hi
    assert shell_tail(inst, cbar, eps) < target
    assert shell_tail(inst, cbar, eps * (1.0 + 1e-9)) >= target


def test_shell_tail_grows_with_eps(inst):
    assert shell_tail(inst, 100.0, 1e-10) <= shell_tail(inst, 100.0, 1e-8)


SMALL_GRID = OccupationGrid(n_mid_cells=4, n_slab_cells=1, n_rest_cells=1, n_cap_cells=1, n_cross=3)


def test_occupation_grid():
    grid = OccupationGrid()
    finer = grid.refined()
    assert (finer.n_mid_cells, finer.n_slab_cells, finer.n_rest_cells, finer.n_cap_cells) == (16, 4, 4, 2)
    assert finer.n_cross == 9
    with pytest.raises(ValueError):
        OccupationGrid(n_mid_cells=0)
    with pytest.raises(ValueError):
        OccupationGrid(n_cross=4)


def test_x1_lattice_spans_the_caps(inst):
    x1 = x1_lattice(inst, SMALL_GRID)
    assert np.all(np.diff(x1) > 0.0)
    assert x1[0] > -inst.tip and x1[-1] < inst.tip
    assert np.any(np.isclose(x1, inst.lam * inst.a)) and np.any(np.isclose(x1, -inst.lam * inst.a))
    assert np.sum(x1 > inst.lam * inst.a) == 2 * SMALL_GRID.n_cap_cells


def test_lattice_states_fill_the_domain(inst):
    states = lattice_states(inst, OccupationGrid(n_cross=5))
    tags = classify_many(states, inst)
    assert all(tag is not RegionTag.OUTSIDE for tag in tags)
    assert any(tag is RegionTag.CAP_GAMMA for tag in tags)
    off_axis = np.linalg.norm(states[:, 1:], axis=1) > 0.5 / inst.b
    assert np.any(off_axis)
    half = cross_half_widths(inst, x1_lattice(inst, OccupationGrid()))
    assert np.all(np.abs(states[:, 1:]) <= half + 1e-12)


def test_cross_box_contains_the_domain(inst):
    rng = np.random.default_rng(3)
    x1 = rng.uniform(-inst.tip, inst.tip, 400)
    half = cross_half_widths(inst, x1)
    y = np.column_stack((x1, rng.uniform(-3.0 / inst.b, 3.0 / inst.b, (400, inst.d - 1))))
    x = phi(y)
    inside = np.array([tag is not RegionTag.OUTSIDE for tag in classify_many(x, inst)])
    assert np.all(np.abs(x[inside, 1:]) <= half + 1e-12)


def test_every_time_node_sees_every_state(inst):
    lp = assemble_occupation_lp(inst, SMALL_GRID)
    n_atoms = len(lp.atoms)
    mass = lp.matrix[lp.n_constraints - 1 - len(lp.node_times):lp.n_constraints - 1]
    per_node = np.diff(mass.tocsr().indptr)
    assert np.all(per_node == lp.n_states * n_atoms)
    assert lp.n_interior == len(lp.node_times) * lp.n_states * n_atoms


def test_occupation_lp_rows(inst):
    lp = assemble_occupation_lp(inst, SMALL_GRID)
    assert lp.row_counts["monomials"] == 3 ** (inst.d + 1)
    assert lp.n_constraints == sum(lp.row_counts.values())
    assert lp.n_variables == lp.n_interior + len(lp.terminal_points)


def test_reference_measure_is_feasible(inst):
    lp = assemble_occupation_lp(inst, SMALL_GRID)
    z = assemble_reference_measure(lp, inst)
    assert np.all(z >= 0.0)
    assert lp.residual(z) <= 1e-4
    assert lp.objective(z) == pytest.approx(2.0 * inst.a, abs=2e-2)


def test_occupation_lp_with_highs(inst):
    result = occupation_lp(inst, SMALL_GRID, solver="highs")
    assert result.converged
    assert 0.15 <= result.value <= 2.0 * inst.a + 1e-3
    assert result.n_states > 0
    assert result.to_dict()["grid"]["n_cross"] == 3


def test_occupation_lp_memory_budget(inst):
    with pytest.raises(MemoryBudgetError):
        assemble_occupation_lp(inst, memory_fraction=1e-12)


def test_fw_separation_without_curves(inst):
    assert fw_separation_experiment(inst, delta=0.005, n_curves=0).min_sup_distance == math.inf


def test_fw_separation_needs_room_around_x0(inst):
    with pytest.raises(PreconditionError):
        fw_separation_experiment(inst, delta=0.05, n_curves=4)


def test_fw_separation_constrained_vs_free(inst):
    constrained = fw_separation_experiment(inst, delta=0.005, n_curves=8, seed=1)
    assert constrained.n_curves > 0
    assert constrained.min_sup_distance > 0.05

    free = inst.unconstrained()
    unconstrained = fw_separation_experiment(free, delta=0.005, n_curves=8, seed=1)
    assert unconstrained.min_sup_distance < 0.02


@pytest.mark.slow
def test_occupation_lp_with_pdhg(inst):
    result = occupation_lp(inst, solver="pdhg", tol=1e-4)
    assert result.converged
    assert 0.15 <= result.value <= 0.201
    assert max(result.residuals.values()) <= 1e-4


@pytest.mark.slow
def test_lp_value_converges_under_refinement(inst):
    study = lp_refinement_study(inst, SMALL_GRID, steps=1, solver="highs")
    coarse, fine = (entry["value"] for entry in study)
    assert study[1]["n_states"] > study[0]["n_states"]
    assert 0.15 <= coarse <= 2.0 * inst.a + 1e-3
    assert 0.15 <= fine <= 2.0 * inst.a + 1e-3
    assert fine >= coarse - 5e-3
    assert abs(fine - coarse) <= 0.02


@pytest.mark.slow
def test_full_gap_experiment(inst):
    report = multistart_gap_experiment(inst, n_starts=8, N=200, workers=4)
    assert report.n_feasible >= 1
    assert report.margin > 0.0
    assert report.winding["passed"] == report.winding["checked"]


@pytest.mark.slow
def test_penalized_gap_experiment(inst):
    spec = penalized_spec(inst, alpha=1.0, eps=1e-3)
    report = multistart_gap_experiment(inst, n_starts=4, N=100, spec=spec)
    assert report.relaxed_cost == pytest.approx(2.0 * inst.a, abs=1e-6)
    assert all(d["cost"] > 2.0 * inst.a for d in report.diagnostics if d["status"] == "FEASIBLE")


def test_second_start_chatters_between_corners(inst):
    tp = TranscribedProblem(inst, N=40)
    start = gap_module.start_controls(tp, 1, np.random.default_rng(0))
    assert np.array_equal(start, alternating_corner_path(inst, 40).values)


@pytest.mark.slow
def test_gap_is_stable_across_seeds(inst):
    margins = [multistart_gap_experiment(inst, n_starts=50, N=200, seed=s, workers=4).margin for s in range(5)]
    assert min(margins) > 0.0
    assert max(margins) - min(margins) <= 0.2 * np.mean(margins)
    cbar = estimate_cbar(sample_radii(inst, n_samples=1000))
    assert min(margins) >= gap_lower_bound_eps(inst, cbar) - 0.05


@pytest.mark.slow
def test_no_gap_without_the_state_constraint(inst):
    report = multistart_gap_experiment(inst.unconstrained(), n_starts=4, N=400, workers=4)
    assert report.n_feasible >= 1
    assert report.best_classical_cost - 2.0 * inst.a <= 0.01


@pytest.mark.slow
def test_separation_is_stable_when_the_sample_doubles(inst):
    half = fw_separation_experiment(inst, delta=0.005, n_curves=500, seed=2)
    full = fw_separation_experiment(inst, delta=0.005, n_curves=1000, seed=2)
    assert full.n_curves >= 500
    assert half.min_sup_distance > 0.0
    assert abs(full.min_sup_distance - half.min_sup_distance) <= 0.2 * half.min_sup_distance
