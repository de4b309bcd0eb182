#!/usr/bin/env python3
"""
gapforge - Main Entry Point

Command-line front end for the relaxation gap experiments. Every subcommand
reads or builds an instance, runs one experiment and writes its artifacts
(JSON, CSV or SVG) into the output directory. Summaries go to stdout, logs
to stderr.

Exit codes: 0 on success, 1 on invalid input, 2 when an experiment fails.
"""

import argparse
import dataclasses
import logging
import math
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config import Config, set_config
from constants import APP_DESCRIPTION, APP_NAME, EXIT_CODES
from costs.lagrangians import Lagrangian, LagrangianKind, as_lagrangian
from domain.instance import Instance, build_instance, load_instance, save_instance
from domain.region import boundary_clearance, classify
from exceptions import (
    ConfigurationError,
    FeasibilityError,
    GapForgeError,
    NoCrossingError,
    VALIDATION_ERRORS,
)
from geometry.goursat import lie_bracket_check, vector_field
from logging_config import log_performance_metrics, setup_component_loggers, setup_logging
from optimize.gap import TopologyOptions, multistart_gap_experiment, shell_report
from optimize.occupation import OccupationGrid, lp_refinement_study, occupation_lp
from optimize.separation import fw_separation_experiment
from performance import get_performance_monitor
from plotting import PLOT_KINDS, export_plot
from relaxation.problems import contender_cost, penalized_spec, problem_spec
from topology.ballbox import estimate_cbar, fit_scaling_exponents, sample_radii
from topology.winding import ring_lift, winding_bound_check, winding_integral
from trajectories.admissibility import admissible
from trajectories.integrators import chained_flow
from trajectories.paths import Curve, save_curve_csv
from trajectories.planner import PlannerSettings
from trajectories.reference import alternating_corner_path, axis_path, reference_minimizer
from utils import ensure_directory, format_float, load_json_file, save_json_file
from validators import validate_seed
from version import __version__, get_version_info

logger = logging.getLogger(__name__)

CURVES = ("ref", "axis", "alternating")
BRACKET_RESIDUAL_LIMIT = 1e-6
LAGRANGIANS = tuple(kind.value for kind in LagrangianKind)


class UsageError(ConfigurationError):
    """Malformed command line"""


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting"""

    def error(self, message: str) -> None:
        raise UsageError(message, "argv")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help="Output directory (default: output.directory or $GAPFORGE_OUT)")
    common.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Configuration override, repeatable")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    common.add_argument("--config", help="Configuration file (YAML or JSON)")
    return common


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per experiment"""
    common = _common_options()
    parser = _Parser(prog=APP_NAME, description=APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("build-instance", parents=[common], help="Validate parameters and write instance.json")
    p.add_argument("--d", type=int)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--eps-moll", type=float)
    p.add_argument("--unconstrained", action="store_true", help="Drop the state constraint")
    p.add_argument("--output", default="instance.json", help="File name inside the output directory")

    p = sub.add_parser("check-invariants", parents=[common], help="Check standing properties of an instance")
    p.add_argument("instance")

    p = sub.add_parser("eval-cost", parents=[common], help="Cost of a built-in contender")
    p.add_argument("instance")
    p.add_argument("--curve", choices=CURVES, default="ref")
    p.add_argument("--lagrangian", choices=LAGRANGIANS, default=LagrangianKind.VEEVEE.value)
    p.add_argument("--N", type=int)

    p = sub.add_parser("winding", parents=[common], help="Ring winding of a built-in contender")
    p.add_argument("instance")
    p.add_argument("--curve", choices=CURVES, default="ref")
    p.add_argument("--N", type=int)

    p = sub.add_parser("ballbox", parents=[common], help="Ball-box displacement sampling and the empirical constant")
    p.add_argument("instance")
    p.add_argument("--samples", type=int)
    p.add_argument("--segments", type=int)

    p = sub.add_parser("demo-gap", parents=[common], help="Multistart classical search against the relaxed cost")
    p.add_argument("instance")
    p.add_argument("--starts", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--lagrangian", choices=LAGRANGIANS, default=LagrangianKind.VEEVEE.value)
    p.add_argument("--workers", type=int)
    p.add_argument("--cbar", type=float, help="Ball-box constant for the lower-bound epsilon")
    p.add_argument("--alpha", type=float, help="Free endpoint with terminal penalty alpha (must exceed 2a)")
    p.add_argument("--lp", action="store_true", help="Also solve the occupation LP")
    p.add_argument("--dump-curves", action="store_true", help="Write every feasible trajectory as CSV")

    p = sub.add_parser("occupation-lp", parents=[common], help="Occupation-measure LP lower bound")
    p.add_argument("instance")
    p.add_argument("--solver", choices=["pdhg", "highs"])
    p.add_argument("--refine", type=int, default=0, help="Number of grid refinements to study")

    p = sub.add_parser("fw-separation", parents=[common], help="Lifted distance from classical to relaxed")
    p.add_argument("instance")
    p.add_argument("--delta", type=float)
    p.add_argument("--curves", type=int)
    p.add_argument("--N", type=int)

    p = sub.add_parser("export-plot", parents=[common], help="Write a plot or table artifact")
    p.add_argument("kind", choices=PLOT_KINDS)
    p.add_argument("instance", nargs="?")
    p.add_argument("--report", help="gap_report.json for gap-table")
    p.add_argument("--curve", choices=CURVES, default="ref")
    p.add_argument("--output", help="File name inside the output directory")

    return parser


def _pick(value: Optional[Any], config: Config, key: str) -> Any:
    return value if value is not None else config.get(key)


def _contender(inst: Instance, name: str, N: int, config: Config) -> Curve:
    if name == "ref":
        return reference_minimizer(inst, config.get("integrator.steps_per_interval"))[1]
    path = axis_path(inst, N) if name == "axis" else alternating_corner_path(inst, N)
    return chained_flow(inst, path, inst.x0, substeps=config.get("optimizer.substeps"))


class GapForgeCLI:
    """Runs one parsed command against a configuration"""

    def __init__(self, args: argparse.Namespace, config: Config):
        self.args = args
        self.config = config
        self.out_dir = args.out_dir or config.get("output.directory")
        self.logger = logging.getLogger(__name__)

    def _out(self, name: str) -> str:
        ensure_directory(self.out_dir)
        return os.path.join(self.out_dir, name)

    def _write(self, name: str, payload: Dict[str, Any]) -> str:
        document = {"version": get_version_info(), "seed": self.args.seed}
        document.update(payload)
        return save_json_file(self._out(name), document)

    def _instance(self) -> Instance:
        return load_instance(self.args.instance)

    def _lagrangian(self, name: str, inst: Instance) -> Lagrangian:
        lagr = as_lagrangian(name, inst)
        if lagr.is_mollified:
            lagr = dataclasses.replace(lagr, nodes_per_axis=self.config.get("mollifier.nodes_per_axis"))
        return lagr

    def _planner(self) -> PlannerSettings:
        c = self.config
        return PlannerSettings(
            primitive_fraction=c.get("planner.primitive_fraction"),
            refinements=c.get("planner.refinements"),
            goal_tolerance=c.get("planner.goal_tolerance"),
            goal_bias=c.get("planner.goal_bias"),
            max_expansions=c.get("planner.max_expansions"),
            polish=c.get("planner.polish"),
        )

    def _topology(self) -> TopologyOptions:
        c = self.config
        return TopologyOptions(
            shell_cap=c.get("topology.shell_cap"),
            max_blocks=c.get("topology.max_blocks"),
            coverage_threshold=c.get("topology.coverage_threshold"),
            refine=c.get("integrator.refine"),
        )

    def _admissible(self, curve: Curve, inst: Instance, require_target: bool = True):
        return admissible(curve, inst, refine=self.config.get("integrator.refine"), require_target=require_target)

    def run(self) -> int:
        handler = getattr(self, "cmd_" + self.args.command.replace("-", "_"))
        self.logger.info(f"Running {self.args.command} (seed {self.args.seed}, output {self.out_dir})")
        monitor = get_performance_monitor()
        monitor.clear_metrics()
        try:
            return handler()
        finally:
            log_performance_metrics(monitor.totals())

    def cmd_build_instance(self) -> int:
        a = self.args
        params = dict(self.config.get("instance"))
        flags = {"d": a.d, "a": a.a, "b": a.b, "lambda": a.lam, "delta": a.delta, "eps_moll": a.eps_moll}
        params.update({k: v for k, v in flags.items() if v is not None})
        if a.unconstrained:
            params["constrained"] = False
        inst = build_instance(params)
        path = save_instance(inst, self._out(a.output))
        print(f"ab/2pi = {inst.turns:.4f}")
        print(f"wrote {path}")
        return EXIT_CODES["SUCCESS"]

    def cmd_check_invariants(self) -> int:
        inst = self._instance()
        ypath, reference = reference_minimizer(inst, self.config.get("integrator.steps_per_interval"))
        report = self._admissible(reference, inst)
        h = self.config.get("integrator.bracket_step")
        bracket_residual = max(
            float(np.max(np.abs(lie_bracket_check(1, k, inst.x0, h=h) - vector_field(k + 1, inst.x0))))
            for k in range(2, inst.d)
        )
        checks: Dict[str, Any] = {
            "bracket_residual": bracket_residual,
            "x0_clearance": float(boundary_clearance(inst.x0, inst)),
            "x1_clearance": float(boundary_clearance(inst.x1, inst)),
            "x0_region": classify(inst.x0, inst).value,
            "x1_region": classify(inst.x1, inst).value,
            "reference_admissible": report.to_dict(),
            "reference_cost": contender_cost(problem_spec(inst), reference, ypath).total,
            "relaxed_cost_target": 2.0 * inst.a,
        }
        try:
            checks["reference_winding"] = winding_bound_check(reference, inst).to_dict()
        except NoCrossingError as e:
            checks["reference_winding"] = {"error": str(e)}
        passed = (
            report.admissible
            and bracket_residual < BRACKET_RESIDUAL_LIMIT
            and checks["x0_clearance"] > 0.0
            and math.isclose(checks["reference_cost"], 2.0 * inst.a, rel_tol=1e-9, abs_tol=1e-12)
        )
        checks["passed"] = bool(passed)
        path = self._write("invariants.json", {"instance": inst.summary(), "checks": checks})
        print(f"invariants {'passed' if passed else 'FAILED'}; wrote {path}")
        return EXIT_CODES["SUCCESS"] if passed else EXIT_CODES["EXPERIMENT"]

    def cmd_eval_cost(self) -> int:
        inst = self._instance()
        N = _pick(self.args.N, self.config, "optimizer.N")
        curve = _contender(inst, self.args.curve, N, self.config)
        spec = problem_spec(inst, self._lagrangian(self.args.lagrangian, inst))
        breakdown = contender_cost(spec, curve)
        report = self._admissible(curve, inst)
        path = self._write("cost.json", {
            "curve": self.args.curve,
            "lagrangian": spec.lagrangian.label,
            "cost": breakdown.to_dict(),
            "admissibility": report.to_dict(),
        })
        print(f"{self.args.curve} {spec.lagrangian.label} cost = {format_float(breakdown.total)}")
        print(f"wrote {path}")
        return EXIT_CODES["SUCCESS"]

    def cmd_winding(self) -> int:
        inst = self._instance()
        curve = _contender(inst, self.args.curve, _pick(self.args.N, self.config, "optimizer.N"), self.config)
        check = winding_bound_check(curve, inst)
        total = winding_integral(ring_lift(curve, inst, dense=False))
        path = self._write("winding.json", {
            "curve": self.args.curve,
            "winding": check.to_dict(),
            "shells": shell_report(curve, inst, check.winding, self._topology()),
            "total_winding": total,
            "ab": inst.a * inst.b,
        })
        print(f"winding = {check.winding:.6f}  bound = {check.bound:.6f}  pass = {check.passed}")
        print(f"wrote {path}")
        return EXIT_CODES["SUCCESS"]

    def cmd_ballbox(self) -> int:
        inst = self._instance()
        samples = sample_radii(
            inst,
            n_samples=_pick(self.args.samples, self.config, "topology.ballbox_samples"),
            seed=self.args.seed,
            segments=_pick(self.args.segments, self.config, "topology.ballbox_segments"),
        )
        exponents = fit_scaling_exponents(samples)
        cbar = estimate_cbar(samples)
        path = self._write("ballbox.json", {
            "samples": [s.to_dict() for s in samples],
            "exponents": exponents,
            "cbar": cbar,
        })
        print("exponents = " + " ".join(f"{e:.3f}" for e in exponents))
        print(f"cbar = {cbar:.6g}")
        print(f"wrote {path}")
        return EXIT_CODES["SUCCESS"]

    def _lp_kwargs(self) -> Dict[str, Any]:
        return {
            "solver": self.config.get("lp.solver"),
            "tol": self.config.get("lp.tolerance"),
            "max_iterations": self.config.get("lp.max_iterations"),
            "stall_iterations": self.config.get("lp.stall_iterations"),
            "memory_fraction": self.config.get("lp.memory_fraction"),
        }

    def _lp_grid(self) -> OccupationGrid:
        c = self.config
        return OccupationGrid(
            n_mid_cells=c.get("lp.n_mid_cells"),
            n_slab_cells=c.get("lp.n_slab_cells"),
            n_rest_cells=c.get("lp.n_rest_cells"),
            n_cap_cells=c.get("lp.n_cap_cells"),
            n_cross=c.get("lp.n_cross"),
            atoms_per_axis=c.get("lp.atoms_per_axis"),
            degree=c.get("lp.degree"),
        )

    def cmd_demo_gap(self) -> int:
        a, c = self.args, self.config
        inst = self._instance()
        lagr = self._lagrangian(a.lagrangian, inst)
        if a.alpha is not None:
            spec = penalized_spec(
                inst,
                alpha=a.alpha,
                eps=c.get("mollifier.terminal_eps"),
                kind=lagr,
                nodes_per_axis=c.get("mollifier.nodes_per_axis"),
            )
        else:
            spec = problem_spec(inst, lagr)
        lp_value = occupation_lp(inst, self._lp_grid(), lagr, **self._lp_kwargs()).value if a.lp else None
        report = multistart_gap_experiment(
            inst,
            n_starts=_pick(a.starts, c, "optimizer.n_starts"),
            N=_pick(a.N, c, "optimizer.N"),
            seed=a.seed,
            spec=spec,
            workers=_pick(a.workers, c, "optimizer.workers"),
            max_evaluations=c.get("optimizer.max_evaluations"),
            substeps=c.get("optimizer.substeps"),
            noise=c.get("optimizer.start_noise"),
            cbar=a.cbar,
            lp_value=lp_value,
            penalty_schedule=c.get("optimizer.penalty_schedule"),
            initial_step=c.get("optimizer.initial_step"),
            min_step=c.get("optimizer.min_step"),
            planner=self._planner(),
            topology=self._topology(),
        )
        path = self._write("gap_report.json", report.to_dict())
        if a.dump_curves:
            for i, curve in enumerate(report.curves):
                save_curve_csv(curve, boundary_clearance(curve.points, inst), self._out(f"curve_{i:03d}.csv"))
        print(f"{'quantity':<22}value")
        for name, value in report.summary_rows():
            text = format_float(value) if isinstance(value, float) else str(value)
            print(f"{name:<22}{text}")
        print(f"wrote {path}")
        if report.n_feasible == 0:
            raise FeasibilityError(f"no feasible start among {report.n_starts}")
        return EXIT_CODES["SUCCESS"]

    def cmd_occupation_lp(self) -> int:
        inst = self._instance()
        kwargs = self._lp_kwargs()
        if self.args.solver:
            kwargs["solver"] = self.args.solver
        grid = self._lp_grid()
        result = occupation_lp(inst, grid, **kwargs)
        payload: Dict[str, Any] = {"result": result.to_dict(), "two_a": 2.0 * inst.a}
        if self.args.refine > 0:
            payload["refinement"] = lp_refinement_study(inst, grid, steps=self.args.refine, **kwargs)
        path = self._write("occupation_lp.json", payload)
        print(f"LP value = {result.value:.6f}  (2a = {2.0 * inst.a:.6f}, converged = {result.converged})")
        print(f"wrote {path}")
        return EXIT_CODES["SUCCESS"]

    def cmd_fw_separation(self) -> int:
        a, c = self.args, self.config
        inst = self._instance()
        result = fw_separation_experiment(
            inst,
            delta=_pick(a.delta, c, "separation.delta"),
            n_curves=_pick(a.curves, c, "separation.n_curves"),
            seed=a.seed,
            N=_pick(a.N, c, "separation.N"),
            planner=self._planner(),
        )
        path = self._write("fw_separation.json", result.to_dict())
        print(f"min sup distance = {result.min_sup_distance:.6g} over {result.n_curves} curves")
        print(f"wrote {path}")
        return EXIT_CODES["SUCCESS"]

    def cmd_export_plot(self) -> int:
        a = self.args
        data: Dict[str, Any] = {}
        if a.kind == "gap-table":
            if not a.report:
                raise UsageError("gap-table needs --report", "report")
            data["report"] = load_json_file(a.report)
        else:
            if not a.instance:
                raise UsageError(f"{a.kind} needs an instance file", "instance")
            inst = self._instance()
            data["instance"] = inst
            if a.kind == "ring-curve":
                data["curve"] = _contender(inst, a.curve, self.config.get("optimizer.N"), self.config)
        default_name = f"{a.kind}.csv" if a.kind == "gap-table" else f"{a.kind}.svg"
        path = export_plot(a.kind, data, self._out(a.output or default_name))
        print(f"wrote {path}")
        return EXIT_CODES["SUCCESS"]


def _load_config(args: argparse.Namespace) -> Config:
    config = Config(config_file=args.config) if args.config else Config()
    config.apply_overrides(args.overrides)
    if args.log_level:
        config.set("system.log_level", args.log_level)
    return config


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse argv, run the subcommand and map failures onto exit codes

    Returns:
        0 on success, 1 on validation errors, 2 on experiment failures
    """
    argv: List[str] = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        is_valid, message = validate_seed(args.seed)
        if not is_valid:
            raise UsageError(message, "seed")
        config = _load_config(args)
        set_config(config)
        level = config.get("system.log_level")
        setup_logging(
            level=level,
            log_dir=config.get("system.log_dir"),
            file_output=bool(config.get("system.log_to_file")),
        )
        setup_component_loggers(level)
        return GapForgeCLI(args, config).run()
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CODES["VALIDATION"]
    except GapForgeError as e:
        print(f"experiment failed: {e}", file=sys.stderr)
        return EXIT_CODES["EXPERIMENT"]
    finally:
        set_config(None)


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
