"""
Baseline planners: lawnmower coverage, conical spiral and random waypoints.

The lattice-only baseline is the greedy planner with refinement switched
off (``PlannerConfig.optimize = False``).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .planner import MissionState, PlannerConfig, Workspace
from .sensors import CameraConfig
from .trajectory import Trajectory, plan_polynomial, polyline_trajectory

__all__ = ["lawnmower", "spiral", "random_planner", "lawnmower_waypoints", "spiral_points"]

_SPIRAL_SAMPLES = 4001
_PASS_TOL = 1e-3


def _passes(lo: float, hi: float, width: float) -> np.ndarray:
    """Centre lines of strips of `width` covering ``[lo, hi]``."""
    span = hi - lo
    if width >= span:
        return np.array([0.5 * (lo + hi)])
    # 8.66 m is the rounded altitude for a 10 m footprint; tolerate that rounding
    n = math.ceil(span / width * (1.0 - _PASS_TOL))
    return np.minimum(lo + width * (np.arange(n) + 0.5), hi - 0.5 * width)


def lawnmower_waypoints(workspace: Workspace, camera: CameraConfig, altitude: float) -> np.ndarray:
    """Boustrophedon turning points at `altitude`; passes run along y."""
    (x0, y0, _), (x1, y1, _) = workspace.lower, workspace.upper
    hx, hy = camera.half_widths(altitude)
    xs = _passes(x0, x1, 2.0 * hx)
    # passes run edge to edge so periodic images reach the corners
    y_lo, y_hi = (y0, y1) if 2.0 * hy < y1 - y0 else ((y0 + y1) / 2.0,) * 2
    pts = []
    for i, x in enumerate(xs):
        ends = (y_lo, y_hi) if i % 2 == 0 else (y_hi, y_lo)
        pts += [(x, ends[0], altitude), (x, ends[1], altitude)]
    return np.array(pts)


def lawnmower(workspace: Workspace, camera: CameraConfig, budget: float, altitude: float = 8.66):
    """Constant-altitude coverage sweep that lasts exactly `budget` seconds.

    Pass spacing equals the footprint width at `altitude`. Every cell is
    imaged as long as the distance flown between images does not exceed the
    footprint width. If one footprint already covers the area the path
    degenerates to hovering at the centre.

    Returns
    -------
    trajectory : Trajectory
    speed : float
        Commanded ground speed, path length divided by `budget`.
    """
    if not workspace.lower[2] <= altitude <= workspace.upper[2]:
        raise ValueError(f"altitude {altitude} outside the workspace")
    pts = lawnmower_waypoints(workspace, camera, altitude)
    length = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
    return polyline_trajectory(pts, budget), length / budget


def spiral_points(workspace: Workspace, turns: float, z_range=(1.0, 26.0), samples: int = _SPIRAL_SAMPLES) -> np.ndarray:
    """Points of an ascending conical helix whose radius shrinks linearly to zero."""
    (x0, y0, _), (x1, y1, _) = workspace.lower, workspace.upper
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    R = 0.5 * min(x1 - x0, y1 - y0)
    s = np.linspace(0.0, 1.0, samples)
    r = R * (1.0 - s)
    theta = 2.0 * math.pi * turns * s
    z = z_range[0] + (z_range[1] - z_range[0]) * s
    return np.column_stack([cx + r * np.cos(theta), cy + r * np.sin(theta), z])


def _length(points: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def spiral(workspace: Workspace, budget: float, z_range=(1.0, 26.0), v_max: float = 5.0) -> Trajectory:
    """Conical spiral from the bottom of `z_range` to its top lasting `budget` seconds.

    The number of turns is chosen so the path is as long as can be flown at
    `v_max` within the budget; speed is constant along the path.
    """
    if not (workspace.lower[2] <= z_range[0] <= z_range[1] <= workspace.upper[2]):
        raise ValueError(f"altitude range {z_range} outside the workspace")
    target = v_max * budget
    turns = 0.0
    if _length(spiral_points(workspace, 0.0, z_range)) < target:
        hi = 1.0
        while _length(spiral_points(workspace, hi, z_range)) < target:
            hi *= 2.0
        turns = brentq(lambda n: _length(spiral_points(workspace, n, z_range)) - target, 0.0, hi, xtol=1e-6)
    return polyline_trajectory(spiral_points(workspace, turns, z_range), budget)


def random_planner(state: MissionState, workspace: Workspace, rng: np.random.Generator, config: PlannerConfig | None = None) -> Trajectory:
    """Fly from the current pose to a destination drawn uniformly in the workspace."""
    config = config or PlannerConfig()
    dest = rng.uniform(workspace.lo, workspace.hi)
    return plan_polynomial([state.pose, dest], config.order, config.v_max, config.a_max)
