"""
Fixed-horizon informative path planning.

Each replan picks ``N - 1`` waypoints greedily from a coarse 3-D lattice by
information gain per unit travel time, then refines them with CMA-ES on the
ratio of trajectory gain to trajectory duration. The mission alternates
replanning and execution until the time budget is spent.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .cmaes import CmaConfig, maximize
from .field import GridGeometry, GroundTruthField
from .gp_map import (
    GPFieldMap,
    TraceGainEvaluator,
    fuse,
    interesting_cells_continuous,
    predict_continuous_update,
    trace_uncertainty,
)
from .metrics import MetricsRecord, delta_sigma2, mll, rmse, wmll, wrmse
from .occupancy import (
    OccupancyMap,
    binary_entropy,
    entropy,
    interesting_cells_discrete,
    predict_discrete_update,
    update_discrete,
)
from .sensors import (
    BinaryClassifierModel,
    CameraConfig,
    ContinuousSensorModel,
    footprint,
    simulate_binary_measurement,
    simulate_continuous_measurement,
)
from .trajectory import Trajectory, measurement_poses, measurement_times, plan_polynomial

__all__ = [
    "Workspace",
    "Lattice",
    "build_lattice",
    "PlannerConfig",
    "MissionState",
    "ContinuousBelief",
    "DiscreteBelief",
    "EntropyGainEvaluator",
    "utility",
    "trajectory_utility",
    "travel_time",
    "greedy_lattice_search",
    "ReplanResult",
    "replan",
    "MissionResult",
    "run_mission",
]


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned flight volume ``[lower, upper]`` in metres."""

    lower: tuple[float, float, float]
    upper: tuple[float, float, float]

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("workspace bounds must be 3-vectors")
        if np.any(lo > hi) or np.any(lo[:2] == hi[:2]):
            raise ValueError(f"empty workspace {self.lower} .. {self.upper}")
        if not lo[2] > 0:
            raise ValueError("minimum altitude must be positive")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in hi))

    @classmethod
    def over(cls, geometry: GridGeometry, altitude_range=(1.0, 26.0)) -> "Workspace":
        ox, oy = geometry.origin
        return cls((ox, oy, altitude_range[0]), (ox + geometry.width, oy + geometry.height, altitude_range[1]))

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def centroid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= self.lo - tol) & (p <= self.hi + tol), axis=1)

    def clip(self, points) -> np.ndarray:
        return np.clip(points, self.lo, self.hi)


@dataclass(frozen=True)
class Lattice:
    """Candidate viewpoints arranged in altitude layers.

    Attributes
    ----------
    points : (n, 3) ndarray
        Ordered bottom layer first, row-major within a layer.
    altitudes : (L,) ndarray
    spacings : (L, 2) ndarray
        Lateral point spacing (x, y) per layer.
    """

    points: np.ndarray
    altitudes: np.ndarray
    spacings: np.ndarray

    def __len__(self):
        return len(self.points)


def _pyramid_layers(count: int) -> int:
    total, k = 0, 0
    while total < count:
        k += 1
        total += k * k
    if total != count:
        raise ValueError(f"lattice size {count} is not a sum of consecutive squares 1 + 4 + ... + k^2")
    return k


def _layer(ws: Workspace, kx: int, ky: int, z: float):
    (x0, y0, _), (x1, y1, _) = ws.lower, ws.upper
    sx, sy = (x1 - x0) / kx, (y1 - y0) / ky
    xs = x0 + sx * (np.arange(kx) + 0.5)
    ys = y0 + sy * (np.arange(ky) + 0.5)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)])
    return pts, (sx, sy)


def build_lattice(workspace: Workspace, count: int = 30, camera: CameraConfig | None = None) -> Lattice:
    """Multiresolution lattice with ``k x k`` points per layer, ``k = L .. 1``.

    Each layer sits at the altitude where footprints of neighbouring points
    abut, clipped to the workspace altitude range, so layers get sparser
    towards the top. `count` must be ``1 + 4 + ... + L^2`` (14 and 30 are the
    usual presets). A workspace with a single altitude gets one planar grid
    whose footprints cover the area.
    """
    camera = camera or CameraConfig()
    tx = 2.0 * math.tan(math.radians(camera.fov_x) / 2.0)
    ty = 2.0 * math.tan(math.radians(camera.fov_y) / 2.0)
    (x0, y0, z0), (x1, y1, z1) = workspace.lower, workspace.upper
    W, H = x1 - x0, y1 - y0

    if z0 == z1:
        kx, ky = max(1, math.ceil(W / (z0 * tx) - 1e-9)), max(1, math.ceil(H / (z0 * ty) - 1e-9))
        pts, s = _layer(workspace, kx, ky, z0)
        return Lattice(pts, np.array([z0]), np.array([s]))

    n_layers = _pyramid_layers(count)
    points, alts, spacings = [], [], []
    for k in range(n_layers, 0, -1):
        z = float(np.clip(max(W / (k * tx), H / (k * ty)), z0, z1))
        pts, s = _layer(workspace, k, k, z)
        points.append(pts)
        alts.append(z)
        spacings.append(s)
    return Lattice(np.vstack(points), np.array(alts), np.array(spacings))


@dataclass
class PlannerConfig:
    """Planner and mission settings.

    Parameters
    ----------
    n_waypoints : int
        Control waypoints per plan, including the start pose.
    budget : float
        Mission time budget in seconds.
    adaptive : bool
        Restrict utility to the interesting cells (``mean + beta * std >= mu_th``
        for continuous maps, ``p > p_th`` for occupancy maps).
    lattice_size : int
    optimize : bool
        Refine the greedy waypoints with CMA-ES; False gives the lattice-only planner.
    max_measurements : int, optional
        Measurements per planned trajectory (counted from its start pose).
    step_sizes : tuple
        Initial CMA-ES standard deviation per waypoint coordinate (x, y, z).
    min_travel_time : float
        Floor on the straight-line travel time used by the greedy search.
    """

    n_waypoints: int = 5
    budget: float = 200.0
    adaptive: bool = False
    mu_th: float = 40.0
    beta: float = 3.0
    p_th: float = 0.4
    lattice_size: int = 30
    optimize: bool = True
    order: int = 12
    v_max: float = 5.0
    a_max: float = 2.0
    max_measurements: int | None = 10
    step_sizes: tuple = (3.0, 3.0, 4.0)
    cma_iterations: int = 45
    population_size: int | None = None
    min_travel_time: float = 1.0
    start: tuple = (7.5, 7.5, 8.66)
    altitude_range: tuple = (1.0, 26.0)
    camera: CameraConfig = field(default_factory=CameraConfig)

    def __post_init__(self):
        if self.n_waypoints < 2:
            raise ValueError("n_waypoints must be at least 2")
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if len(self.step_sizes) != 3:
            raise ValueError("step_sizes needs one value per axis")
        if not self.min_travel_time > 0:
            raise ValueError("min_travel_time must be positive")


@dataclass
class MissionState:
    elapsed: float
    pose: np.ndarray
    log: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# map adapters


class EntropyGainEvaluator:
    """Entropy reduction from expected classifier updates at a pose sequence.

    Poses are applied one after another to a scratch copy of the log-odds,
    each footprint cell re-observing its currently most likely state.
    """

    def __init__(self, occ: OccupancyMap, layer: str, camera: CameraConfig, model: BinaryClassifierModel, subset=None):
        self.L0 = occ.layer(layer)
        self.clamp = occ.clamp
        self.geometry = occ.geometry
        self.camera = camera
        self.model = model
        if subset is None:
            self.mask = None
        else:
            self.mask = np.zeros(self.L0.size, dtype=bool)
            self.mask[np.asarray(subset, dtype=np.intp)] = True

    def gain(self, poses) -> float:
        if self.mask is not None and not self.mask.any():
            return 0.0
        L = self.L0.copy()
        touched = []
        for pose in poses:
            cells = footprint(pose, self.camera, self.geometry)
            if cells.size == 0:
                continue
            likely = (L[cells] >= 0.0).astype(int)
            L[cells] += self.model.log_likelihood_ratio(float(pose[2]), likely)
            if self.clamp is not None:
                L[cells] = np.clip(L[cells], -self.clamp, self.clamp)
            touched.append(cells)
        if not touched:
            return 0.0
        idx = np.unique(np.concatenate(touched))
        if self.mask is not None:
            idx = idx[self.mask[idx]]
        before = binary_entropy(1.0 / (1.0 + np.exp(-self.L0[idx])))
        after = binary_entropy(1.0 / (1.0 + np.exp(-L[idx])))
        return float(np.sum(before - after))


class ContinuousBelief:
    """GP map plus the sensor that observes it."""

    kind = "continuous"

    def __init__(self, gmap: GPFieldMap, camera: CameraConfig, model: ContinuousSensorModel):
        self.map = gmap
        self.camera = camera
        self.model = model

    def copy(self) -> "ContinuousBelief":
        return ContinuousBelief(self.map.copy(), self.camera, self.model)

    def interesting(self, config: PlannerConfig):
        if not config.adaptive:
            return None
        return interesting_cells_continuous(self.map, config.mu_th, config.beta)

    def evaluator(self, subset=None) -> TraceGainEvaluator:
        return TraceGainEvaluator(self.map, self.camera, self.model, subset)

    def predict(self, pose) -> None:
        predict_continuous_update(self.map, pose, self.camera, self.model, inplace=True)

    def observe(self, pose, truth: GroundTruthField, rng) -> None:
        fuse(self.map, simulate_continuous_measurement(pose, self.camera, self.model, truth, rng), inplace=True)

    def uncertainty(self, subset=None) -> float:
        return trace_uncertainty(self.map, subset)

    def record(self, truth: GroundTruthField, config: PlannerConfig) -> dict:
        hot = np.flatnonzero(truth.flat >= config.mu_th)
        return dict(
            trace=self.uncertainty(),
            rmse=rmse(self.map, truth),
            wrmse=wrmse(self.map, truth),
            mll=mll(self.map, truth),
            wmll=wmll(self.map, truth),
            delta_sigma2=delta_sigma2(self.map.variance, hot),
            trace_interesting=self.uncertainty(hot),
        )


class DiscreteBelief:
    """Occupancy layer plus the classifier that observes it."""

    kind = "discrete"

    def __init__(self, occ: OccupancyMap, camera: CameraConfig, model: BinaryClassifierModel, layer: str = "target"):
        occ.layer(layer)
        self.map = occ
        self.camera = camera
        self.model = model
        self.layer = layer

    def copy(self) -> "DiscreteBelief":
        return DiscreteBelief(self.map.copy(), self.camera, self.model, self.layer)

    def interesting(self, config: PlannerConfig):
        if not config.adaptive:
            return None
        return interesting_cells_discrete(self.map, self.layer, config.p_th)

    def evaluator(self, subset=None) -> EntropyGainEvaluator:
        return EntropyGainEvaluator(self.map, self.layer, self.camera, self.model, subset)

    def predict(self, pose) -> None:
        predict_discrete_update(self.map, self.layer, pose, self.camera, self.model, inplace=True)

    def observe(self, pose, truth: GroundTruthField, rng) -> None:
        cells, labels = simulate_binary_measurement(pose, self.camera, self.model, truth, rng)
        update_discrete(self.map, self.layer, cells, labels, float(pose[2]), self.model)

    def uncertainty(self, subset=None) -> float:
        return entropy(self.map, self.layer, subset)

    def record(self, truth: GroundTruthField, config: PlannerConfig) -> dict:
        p = self.map.probability(self.layer)
        return dict(entropy=self.uncertainty(), rmse=rmse(p, truth), wrmse=wrmse(p, truth))


# ---------------------------------------------------------------------------
# utilities and search


def utility(belief, poses, config: PlannerConfig) -> float:
    """Information gained by measuring at `poses` in order.

    `poses` may be a single ``(3,)`` pose or an ``(m, 3)`` sequence. In
    adaptive mode only the currently interesting cells count.
    """
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    return belief.evaluator(belief.interesting(config)).gain(poses)


def _trajectory_poses(traj: Trajectory, config: PlannerConfig, workspace: Workspace) -> np.ndarray:
    # the spline may overshoot between waypoints; the vehicle stays in bounds
    return workspace.clip(measurement_poses(traj, config.camera.frequency, config.max_measurements))


def trajectory_utility(belief, traj: Trajectory, config: PlannerConfig, workspace: Workspace) -> float:
    return utility(belief, _trajectory_poses(traj, config, workspace), config)


def travel_time(a, b, config: PlannerConfig) -> float:
    """Straight-line time from `a` to `b` at full speed, floored at `min_travel_time`."""
    return max(float(np.linalg.norm(np.subtract(b, a))) / config.v_max, config.min_travel_time)


def greedy_lattice_search(belief, start, n_waypoints: int, lattice: Lattice, config: PlannerConfig) -> np.ndarray:
    """Waypoints ``[start, c_1, ..., c_{N-1}]`` chosen by best gain per travel time.

    Each lattice point is used at most once per plan (the whole lattice
    becomes available again if it runs out). After each choice the predicted
    measurement is fused into a scratch copy of the belief. Ties go to the
    lowest lattice index. When no free point has positive gain the nearest
    free point is taken.
    """
    start = np.asarray(start, dtype=float)
    work = belief.copy()
    chosen = [start]
    used = np.zeros(len(lattice), dtype=bool)
    for _ in range(n_waypoints - 1):
        if used.all():
            used[:] = False
        prev = chosen[-1]
        free = np.flatnonzero(~used)
        ev = work.evaluator(work.interesting(config))
        gains = np.array([ev.gain(lattice.points[i][None, :]) for i in free])
        if np.max(gains) > 0:
            costs = np.array([travel_time(prev, lattice.points[i], config) for i in free])
            idx = int(free[np.argmax(gains / costs)])
        else:
            idx = int(free[np.argmin(np.linalg.norm(lattice.points[free] - prev, axis=1))])
        used[idx] = True
        chosen.append(lattice.points[idx])
        work.predict(lattice.points[idx])
    return np.vstack(chosen)


@dataclass
class ReplanResult:
    trajectory: Trajectory
    objective: float
    seed_trajectory: Trajectory
    seed_objective: float
    improved: bool
    warning: str | None = None


def _objective_factory(belief, start, config: PlannerConfig, workspace: Workspace) -> Callable:
    ev = belief.evaluator(belief.interesting(config))
    n = config.n_waypoints - 1

    def plan(x):
        W = np.vstack([start, np.reshape(x, (n, 3))])
        return plan_polynomial(W, config.order, config.v_max, config.a_max)

    def objective(x):
        traj = plan(x)
        return ev.gain(_trajectory_poses(traj, config, workspace)) / traj.duration

    return plan, objective


def replan(belief, state: MissionState, config: PlannerConfig, lattice: Lattice, workspace: Workspace, seed: int = 0) -> ReplanResult:
    """Greedy lattice seed followed by CMA-ES refinement; returns the better plan."""
    if state.elapsed >= config.budget:
        raise ValueError("no budget left to plan")
    start = np.asarray(state.pose, dtype=float)
    C = greedy_lattice_search(belief, start, config.n_waypoints, lattice, config)
    plan, objective = _objective_factory(belief, start, config, workspace)
    x0 = C[1:].ravel()
    seed_traj = plan(x0)
    seed_obj = objective(x0)
    if not config.optimize or config.cma_iterations == 0:
        return ReplanResult(seed_traj, seed_obj, seed_traj, seed_obj, False)

    n = config.n_waypoints - 1
    cma = CmaConfig(
        initial_step_sizes=np.tile(config.step_sizes, n),
        lower=np.tile(workspace.lo, n),
        upper=np.tile(workspace.hi, n),
        max_iterations=config.cma_iterations,
        population_size=config.population_size,
        seed=seed,
    )
    try:
        res = maximize(objective, x0, cma)
    except Exception as exc:  # noqa: BLE001 - any optimiser failure falls back to the seed
        msg = f"optimizer failed ({exc!r}); using greedy seed"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        return ReplanResult(seed_traj, seed_obj, seed_traj, seed_obj, False, msg)
    if res.score > seed_obj:
        return ReplanResult(plan(res.x), res.score, seed_traj, seed_obj, True)
    return ReplanResult(seed_traj, seed_obj, seed_traj, seed_obj, False)


# ---------------------------------------------------------------------------
# missions


@dataclass
class MissionResult:
    records: list
    belief: object
    trajectories: list
    replans: list = field(default_factory=list)


def run_mission(
    truth: GroundTruthField,
    belief,
    config: PlannerConfig,
    rng: np.random.Generator,
    planner: str = "cmaes",
    trial: int = 0,
    planner_rng: np.random.Generator | None = None,
    lawnmower_altitude: float = 8.66,
) -> MissionResult:
    """Alternate planning and execution until the budget is spent.

    Measurements along each trajectory are taken every ``1/f`` seconds from
    its start; a measurement is fused only if it happens within the budget.
    A trajectory shorter than one sensor period is padded by hovering so the
    camera never fires faster than its frequency. `belief` is updated in
    place. `planner` is one of ``cmaes``, ``lattice``, ``random``,
    ``lawnmower`` or ``spiral``.
    """
    from . import benchmarks  # local import: benchmarks builds on this module

    workspace = Workspace.over(truth.geometry, config.altitude_range)
    period = 1.0 / config.camera.frequency
    planner_rng = planner_rng if planner_rng is not None else np.random.default_rng(0)
    B = config.budget

    if planner in ("cmaes", "lattice"):
        lattice = build_lattice(workspace, config.lattice_size, config.camera)
        cfg = replace(config, optimize=planner == "cmaes")
    elif planner not in ("random", "lawnmower", "spiral"):
        raise ValueError(f"unknown planner {planner!r}")

    start = workspace.clip(np.asarray(config.start, dtype=float))
    if not workspace.contains(config.start)[0]:
        raise ValueError(f"start pose {config.start} lies outside the workspace")
    state = MissionState(0.0, start)
    records, trajectories, replans = [], [], []
    count = 0

    def measure(pose, t):
        nonlocal count
        belief.observe(pose, truth, rng)
        rec = MetricsRecord(float(t), count, float(pose[0]), float(pose[1]), float(pose[2]), trial=trial, planner=planner)
        for k, v in belief.record(truth, config).items():
            setattr(rec, k, v)
        records.append(rec)
        count += 1

    while state.elapsed < B:
        cap = config.max_measurements
        if planner in ("cmaes", "lattice"):
            res = replan(belief, state, cfg, lattice, workspace, seed=int(planner_rng.integers(2**31)))
            traj = res.trajectory
            replans.append(res)
        elif planner == "random":
            traj = benchmarks.random_planner(state, workspace, planner_rng, config)
        else:
            cap = None
            if planner == "lawnmower":
                traj, _ = benchmarks.lawnmower(workspace, config.camera, B, lawnmower_altitude)
            else:
                traj = benchmarks.spiral(workspace, B, config.altitude_range, config.v_max)
            if state.elapsed == 0.0:
                # coverage patterns start at their own entry point
                state.pose = traj.position(0.0)
        trajectories.append((state.elapsed, traj))
        for t in measurement_times(traj.duration, config.camera.frequency, cap):
            if state.elapsed + t > B:
                break
            pose = workspace.clip(traj.position(t))
            measure(pose, state.elapsed + t)
            state.log.append((state.elapsed + t, pose))
        state.elapsed += max(traj.duration, period)
        state.pose = workspace.clip(traj.position(traj.duration))
    return MissionResult(records, belief, trajectories, replans)
