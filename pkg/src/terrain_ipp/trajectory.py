"""
Polynomial trajectories through control waypoints.

Each axis is a clamped interpolating spline through the waypoints (quintic
for ``order >= 5``, cubic below) that starts and ends at rest. Segment
durations come from a trapezoidal velocity profile over the straight-line
distance; if the resulting curve would exceed the reference speed, all
durations are stretched uniformly until it does not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import BSpline, make_interp_spline

__all__ = [
    "Trajectory",
    "plan_polynomial",
    "polyline_trajectory",
    "profile_time",
    "measurement_times",
    "measurement_poses",
    "cost",
    "MIN_SEGMENT_DURATION",
]

MIN_SEGMENT_DURATION = 0.01
_SPEED_SAMPLES_PER_SEGMENT = 64


@dataclass(frozen=True)
class Trajectory:
    """Time-parameterised 3-D path through ordered control waypoints.

    Attributes
    ----------
    waypoints : (N, 3) ndarray
        Control points; ``waypoints[0]`` is the start pose.
    segment_durations : (N - 1,) ndarray
        Time between consecutive waypoints in seconds.
    curve : scipy.interpolate.BSpline
        Position as a function of time on ``[0, duration]``.
    """

    waypoints: np.ndarray
    segment_durations: np.ndarray
    curve: BSpline
    v_max: float = math.inf
    a_max: float = math.inf

    @property
    def duration(self) -> float:
        return float(np.sum(self.segment_durations))

    @property
    def knot_times(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.segment_durations)])

    def position(self, t) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.duration)
        return self.curve(t)

    def velocity(self, t) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.duration)
        return self.curve.derivative()(t)

    def sample(self, dt: float = 0.1):
        """Times and positions every `dt` seconds, endpoint included."""
        n = max(2, int(math.ceil(self.duration / dt)) + 1)
        t = np.linspace(0.0, self.duration, n)
        return t, self.position(t)

    def to_csv(self, path, dt: float = 0.1) -> None:
        t, p = self.sample(dt)
        np.savetxt(Path(path), np.column_stack([t, p]), delimiter=",", fmt="%.10g", header="t,x,y,z", comments="")


def profile_time(distance: float, v_max: float, a_max: float) -> float:
    """Rest-to-rest travel time under a trapezoidal (or triangular) speed profile."""
    if distance <= 0:
        return 0.0
    if distance >= v_max**2 / a_max:
        return distance / v_max + v_max / a_max
    return 2.0 * math.sqrt(distance / a_max)


def _peak_speed(curve: BSpline, knot_times: np.ndarray) -> float:
    ts = np.concatenate(
        [np.linspace(a, b, _SPEED_SAMPLES_PER_SEGMENT) for a, b in zip(knot_times[:-1], knot_times[1:])]
    )
    return float(np.max(np.linalg.norm(curve.derivative()(ts), axis=1)))


def plan_polynomial(waypoints, order: int = 12, v_max: float = 5.0, a_max: float = 2.0) -> Trajectory:
    """Fit a rest-to-rest spline trajectory through `waypoints`.

    Parameters
    ----------
    waypoints : (N, 3) array_like
        ``N >= 2`` control points, the first being the current pose.
    order : int
        Requested polynomial order (>= 3); orders of 5 and above use a
        quintic spline with zero velocity and acceleration at both ends,
        lower orders a cubic with zero end velocity.
    v_max, a_max : float
        Reference speed and acceleration used for time allocation.
    """
    W = np.array(waypoints, dtype=float)
    if W.ndim != 2 or W.shape[1] != 3 or len(W) < 2:
        raise ValueError("need at least two 3-D waypoints")
    if order < 3:
        raise ValueError(f"polynomial order must be >= 3, got {order}")
    if not (v_max > 0 and a_max > 0):
        raise ValueError("velocity and acceleration limits must be positive")

    dist = np.linalg.norm(np.diff(W, axis=0), axis=1)
    durations = np.array([max(profile_time(d, v_max, a_max), MIN_SEGMENT_DURATION) for d in dist])
    knots = np.concatenate([[0.0], np.cumsum(durations)])

    if order >= 5:
        bc = ([(1, np.zeros(3)), (2, np.zeros(3))], [(1, np.zeros(3)), (2, np.zeros(3))])
        curve = make_interp_spline(knots, W, k=5, bc_type=bc, axis=0)
    else:
        bc = ([(1, np.zeros(3))], [(1, np.zeros(3))])
        curve = make_interp_spline(knots, W, k=3, bc_type=bc, axis=0)

    peak = _peak_speed(curve, knots)
    if peak > v_max:
        # stretching time by alpha scales every velocity by 1/alpha
        alpha = peak / v_max
        curve = BSpline(curve.t * alpha, curve.c, curve.k, axis=0)
        durations = durations * alpha
    return Trajectory(W, durations, curve, v_max, a_max)


def polyline_trajectory(points, duration: float) -> Trajectory:
    """Constant-speed piecewise-linear path through `points` lasting `duration`.

    A zero-length path hovers at the first point for the whole duration.
    """
    P = np.array(points, dtype=float)
    if len(P) < 2:
        P = np.vstack([P, P])
    if not duration > 0:
        raise ValueError("duration must be positive")
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    total = seg.sum()
    if total <= 0:
        P = P[[0, -1]]
        durations = np.array([duration])
    else:
        keep = np.concatenate([[True], seg > 0])
        P = P[keep]
        seg = seg[seg > 0]
        durations = seg / total * duration
    knots = np.concatenate([[0.0], np.cumsum(durations)])
    knots[-1] = duration
    curve = make_interp_spline(knots, P, k=1, axis=0)
    speed = total / duration
    return Trajectory(P, durations, curve, v_max=speed)


def measurement_times(duration: float, frequency: float, max_count: int | None = None) -> np.ndarray:
    """Sensor trigger times ``0, 1/f, 2/f, ...`` up to `duration`, capped at `max_count`."""
    if not frequency > 0:
        raise ValueError("frequency must be positive")
    period = 1.0 / frequency
    n = int(math.floor(duration / period + 1e-9)) + 1
    if max_count is not None:
        n = min(n, max_count)
    return np.arange(n) * period


def measurement_poses(traj: Trajectory, frequency: float, max_count: int | None = None) -> np.ndarray:
    """Poses at which the sensor fires along `traj`; the first is the start pose."""
    return traj.position(measurement_times(traj.duration, frequency, max_count))


def cost(traj: Trajectory) -> float:
    """Travel time of `traj` in seconds."""
    return traj.duration
