"""
Plotting Module

Static artifacts: the domain seen through x -> (x1, x_{d-1}, x_d), the ring
curve of a trajectory, and the gap summary table. SVG output is made
reproducible by a fixed hash salt and by dropping the date metadata.
"""

import io
import logging
from typing import Any, Dict, List

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from domain.instance import Instance  # noqa: E402
from domain.region import cap_profile, spiral_center  # noqa: E402
from exceptions import UnknownPlotKindError  # noqa: E402
from geometry.goursat import phi  # noqa: E402
from topology.winding import PlanarCurve, ring_lift  # noqa: E402
from utils import save_csv_file, save_text_file, sanitize_json  # noqa: E402

logger = logging.getLogger(__name__)

PLOT_KINDS = ("omega-projection", "ring-curve", "gap-table")
_SVG_SALT = "gapforge"


def _svg_text(fig: Figure) -> str:
    buffer = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": _SVG_SALT, "svg.fonttype": "path"}):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def _tube_rings(inst: Instance, n_axial: int, n_angle: int) -> np.ndarray:
    """Boundary circles of the tube and caps in straightened coordinates, shape (n_axial, n_angle, d)"""
    t = np.linspace(-inst.tip, inst.tip, n_axial)
    radius = np.where(np.abs(t) <= inst.a, 1.0 / inst.b, cap_profile(np.clip(np.abs(t), inst.a, inst.tip), inst))
    center = spiral_center(np.clip(t, -inst.a, inst.a), inst)
    theta = np.linspace(0.0, 2.0 * np.pi, n_angle)
    y = np.zeros((n_axial, n_angle, inst.d))
    y[..., 0] = t[:, None]
    y[..., 1:] = center[:, None, :]
    y[..., -2] += radius[:, None] * np.cos(theta)[None, :]
    y[..., -1] += radius[:, None] * np.sin(theta)[None, :]
    return y


def plot_omega_projection(inst: Instance, n_axial: int = 400, n_angle: int = 48) -> Figure:
    """Wireframe of the domain boundary and the axis eta under (x1, x_{d-1}, x_d)"""
    rings = phi(_tube_rings(inst, n_axial, n_angle))
    fig = Figure(figsize=(8, 5))
    ax = fig.add_subplot(projection="3d")
    ax.plot_wireframe(
        rings[..., 0], rings[..., -2], rings[..., -1], rstride=4, cstride=4, linewidth=0.3, color="tab:blue"
    )
    t = np.linspace(-inst.lam * inst.a, inst.lam * inst.a, 200)
    ax.plot(t, np.zeros_like(t), np.zeros_like(t), color="tab:red", linewidth=1.2, label="eta")
    ax.set_xlabel("x1")
    ax.set_ylabel(f"x{inst.d - 1}")
    ax.set_zlabel(f"x{inst.d}")
    ax.set_title(f"a = {inst.a:g}, b = {inst.b:g}, ab/2pi = {inst.turns:.4f}")
    ax.legend(loc="upper left")
    return fig


def plot_ring_curve(planar: PlanarCurve, inst: Instance) -> Figure:
    """The ring curve with the circle of radius 1/b for reference"""
    fig = Figure(figsize=(5, 5))
    ax = fig.add_subplot()
    theta = np.linspace(0.0, 2.0 * np.pi, 256)
    ax.plot(np.cos(theta) / inst.b, np.sin(theta) / inst.b, color="0.7", linestyle="--", linewidth=0.8)
    ax.plot(planar.points[:, 0], planar.points[:, 1], color="tab:blue", linewidth=1.0)
    ax.plot([0.0], [0.0], marker="+", color="k")
    ax.set_aspect("equal")
    ax.set_title("ring curve")
    return fig


def gap_table_rows(report: Any) -> List[List[Any]]:
    """quantity,value rows for every scalar report field; nested mappings are flattened with dots"""
    data: Dict[str, Any] = report.to_dict() if hasattr(report, "to_dict") else dict(report)
    rows = []
    for key, value in data.items():
        if key == "diagnostics":
            rows.append(["n_diagnostics", len(value)])
        elif isinstance(value, dict):
            rows.extend([f"{key}.{sub}", sanitize_json(v)] for sub, v in value.items())
        else:
            rows.append([key, sanitize_json(value)])
    return rows


def export_plot(kind: str, data: Dict[str, Any], file_path: str) -> str:
    """
    Write a plot or table artifact

    Args:
        kind: omega-projection (data: instance), ring-curve (data: instance, curve),
            or gap-table (data: report)
        data: Inputs of the artifact
        file_path: Destination (.svg for plots, .csv for the table)

    Returns:
        The path written

    Raises:
        UnknownPlotKindError: If kind is not supported
    """
    if kind == "omega-projection":
        text = _svg_text(plot_omega_projection(data["instance"]))
    elif kind == "ring-curve":
        inst = data["instance"]
        planar = data["curve"] if isinstance(data["curve"], PlanarCurve) else ring_lift(data["curve"], inst)
        text = _svg_text(plot_ring_curve(planar, inst))
    elif kind == "gap-table":
        return save_csv_file(file_path, ["quantity", "value"], gap_table_rows(data["report"]))
    else:
        raise UnknownPlotKindError(f"unknown plot kind {kind!r}; expected one of {', '.join(PLOT_KINDS)}", kind)
    save_text_file(file_path, text)
    logger.info(f"Exported {kind} to {file_path}")
    return file_path
