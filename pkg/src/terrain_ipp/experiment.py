"""
Multi-trial experiment runner.

An experiment is described by a TOML file with the sections ``experiment``,
``scenario``, ``map``, ``sensor``, ``planner`` and ``benchmarks`` (see
``demos/configs`` for annotated examples). Every field has a default, so an
empty section may be omitted. Results are written as::

    <out>/trials/<planner>_<trial>.csv          one row per measurement
    <out>/trials/<planner>_<trial>_replans.csv  one row per replan (cmaes, lattice)
    <out>/aggregate.csv                         mean and 95% CI per 1 s bin
    <out>/manifest.json                         config echo, hash, seeds, status
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import json
import math
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .field import GridGeometry, generate_binary_field, generate_gaussian_field, generate_split_field
from .gp_map import MaternKernel, build_prior
from .metrics import MetricsRecord
from .occupancy import OccupancyMap
from .planner import ContinuousBelief, DiscreteBelief, PlannerConfig, run_mission
from .sensors import BinaryClassifierModel, CameraConfig, ContinuousSensorModel
from .trajectory import measurement_times

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "run_trial",
    "run_experiment",
    "aggregate",
    "write_records",
    "read_records",
    "PLANNERS",
]

PLANNERS = ("cmaes", "lattice", "random", "lawnmower", "spiral")
SCHEMA_VERSION = 1
METRIC_COLUMNS = ("trace", "entropy", "rmse", "wrmse", "mll", "wmll", "delta_sigma2", "trace_interesting")
REPLAN_COLUMNS = (
    "replan", "t", "objective", "seed_objective", "improved",
    "seed_waypoint_z", "waypoint_z", "seed_site_z", "site_z", "warning",
)


class ConfigError(ValueError):
    """Malformed experiment configuration; the message names the field."""


@dataclass
class ExperimentSection:
    name: str = "experiment"
    trials: int = 1
    seed: int = 0
    planners: tuple = ("cmaes",)
    workers: int = 1


@dataclass
class ScenarioSection:
    kind: str = "gaussian"
    width: float = 30.0
    height: float = 30.0
    resolution: float = 0.75
    cluster_radius: tuple = (1.0, 3.0)
    split_threshold: float = 40.0
    occupancy_fraction: float = 0.3


@dataclass
class MapSection:
    """GP and occupancy map settings.

    ``units`` selects the scale the continuous map works in. Config values
    (``prior_mean``, ``planner.mu_th``, ``scenario.split_threshold``) are
    always given in percent; with ``"fraction"`` the truth, prior mean and
    threshold are divided by 100 before mapping, so the kernel and noise
    hyperparameters and all reported errors refer to a [0, 1] field.
    """

    units: str = "fraction"
    prior_mean: float = 50.0
    sigma_f2: float = 1.82
    length_scale: float = 3.67
    sigma_n2: float = 1.42
    prior_probability: float = 0.5


@dataclass
class SensorSection:
    fov: float = 60.0
    frequency: float = 0.15
    a: float = 0.2
    b: float = 0.05
    bands: tuple = ((10.0, 1.0), (math.inf, 0.5))
    classifier_altitudes: tuple = (0.0, 10.0, 20.0, 30.0)
    true_positive: tuple = (0.95, 0.85, 0.70, 0.50)
    false_positive: tuple = (0.05, 0.15, 0.30, 0.50)


@dataclass
class PlannerSection:
    n_waypoints: int = 5
    budget: float = 200.0
    adaptive: bool = False
    mu_th: float = 40.0
    beta: float = 3.0
    p_th: float = 0.4
    lattice_size: int = 30
    order: int = 12
    v_max: float = 5.0
    a_max: float = 2.0
    max_measurements: int = 10
    step_sizes: tuple = (3.0, 3.0, 4.0)
    cma_iterations: int = 45
    population_size: int = 0
    min_travel_time: float = 1.0
    start: tuple = (7.5, 7.5, 8.66)
    altitude_range: tuple = (1.0, 26.0)


@dataclass
class BenchmarkSection:
    lawnmower_altitude: float = 8.66


_SECTIONS = {
    "experiment": ExperimentSection,
    "scenario": ScenarioSection,
    "map": MapSection,
    "sensor": SensorSection,
    "planner": PlannerSection,
    "benchmarks": BenchmarkSection,
}


@dataclass
class ExperimentConfig:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    map: MapSection = field(default_factory=MapSection)
    sensor: SensorSection = field(default_factory=SensorSection)
    planner: PlannerSection = field(default_factory=PlannerSection)
    benchmarks: BenchmarkSection = field(default_factory=BenchmarkSection)

    def as_dict(self) -> dict:
        return {name: dataclasses.asdict(getattr(self, name)) for name in _SECTIONS}

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the resolved config.

        The worker count is left out since it does not change results.
        """
        d = self.as_dict()
        d["experiment"].pop("workers")
        text = json.dumps(_jsonable(d), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    # -- derived model objects

    def geometry(self) -> GridGeometry:
        s = self.scenario
        return GridGeometry(s.width, s.height, s.resolution)

    def value_scale(self) -> float:
        """Factor from percent to map units."""
        return 0.01 if self.map.units == "fraction" else 1.0

    def camera(self) -> CameraConfig:
        return CameraConfig(self.sensor.fov, self.sensor.fov, self.sensor.frequency)

    def planner_config(self) -> PlannerConfig:
        p = self.planner
        return PlannerConfig(
            n_waypoints=p.n_waypoints, budget=p.budget, adaptive=p.adaptive, mu_th=p.mu_th * self.value_scale(),
            beta=p.beta, p_th=p.p_th, lattice_size=p.lattice_size, order=p.order, v_max=p.v_max,
            a_max=p.a_max, max_measurements=p.max_measurements or None, step_sizes=tuple(p.step_sizes),
            cma_iterations=p.cma_iterations, population_size=p.population_size or None,
            min_travel_time=p.min_travel_time, start=tuple(p.start),
            altitude_range=tuple(p.altitude_range), camera=self.camera(),
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _coerce(value, default, name: str):
    """Convert a TOML value to the type of `default`, naming `name` on failure."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"field '{name}' must be true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"field '{name}' must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"field '{name}' must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"field '{name}' must be a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(f"field '{name}' must be an array, got {value!r}")
        proto = default[0] if default else value[0] if value else None
        return tuple(_coerce(v, proto, f"{name}[{i}]") if proto is not None else v for i, v in enumerate(value))
    return value


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a config mapping (as loaded from TOML)."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a table of sections")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    sections = {}
    for name, cls in _SECTIONS.items():
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"section '{name}' must be a table")
        defaults = cls()
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown field '{name}.{sorted(extra)[0]}'")
        values = {k: _coerce(v, getattr(defaults, k), f"{name}.{k}") for k, v in raw.items()}
        sections[name] = cls(**values)
    cfg = ExperimentConfig(**sections)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    e, s = cfg.experiment, cfg.scenario
    if e.trials < 1:
        raise ConfigError("field 'experiment.trials' must be at least 1")
    if e.workers < 1:
        raise ConfigError("field 'experiment.workers' must be at least 1")
    if not e.planners:
        raise ConfigError("field 'experiment.planners' must not be empty")
    for p in e.planners:
        if p not in PLANNERS:
            raise ConfigError(f"field 'experiment.planners' has unknown planner {p!r}; choose from {PLANNERS}")
    if cfg.map.units not in ("fraction", "percent"):
        raise ConfigError(f"field 'map.units' must be fraction or percent, got {cfg.map.units!r}")
    if s.kind not in ("gaussian", "split", "binary"):
        raise ConfigError(f"field 'scenario.kind' must be gaussian, split or binary, got {s.kind!r}")
    if len(cfg.sensor.bands) and not all(len(b) == 2 for b in cfg.sensor.bands):
        raise ConfigError("field 'sensor.bands' must hold [upper_altitude, scale] pairs")
    for name, n in (("planner.start", 3), ("planner.step_sizes", 3), ("planner.altitude_range", 2), ("scenario.cluster_radius", 2)):
        section, key = name.split(".")
        if len(getattr(getattr(cfg, section), key)) != n:
            raise ConfigError(f"field '{name}' must have {n} entries")
    # build the model objects once so bad values surface as config errors
    checks = {
        "scenario": cfg.geometry,
        "sensor": lambda: (cfg.camera(), _continuous_model(cfg), _classifier(cfg)),
        "map": lambda: MaternKernel(cfg.map.sigma_f2, cfg.map.length_scale, cfg.map.sigma_n2),
        "planner": cfg.planner_config,
    }
    for section, build in checks.items():
        try:
            build()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"section '{section}': {exc}") from None


def load_config(path) -> ExperimentConfig:
    """Read and validate a TOML experiment file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)


def _continuous_model(cfg: ExperimentConfig) -> ContinuousSensorModel:
    return ContinuousSensorModel(cfg.sensor.a, cfg.sensor.b, tuple(tuple(b) for b in cfg.sensor.bands))


def _classifier(cfg: ExperimentConfig) -> BinaryClassifierModel:
    s = cfg.sensor
    return BinaryClassifierModel(s.classifier_altitudes, s.true_positive, s.false_positive)


# ---------------------------------------------------------------------------
# trials


@functools.lru_cache(maxsize=4)
def _prior(geometry: GridGeometry, kernel: MaternKernel, prior_mean: float):
    return build_prior(geometry, kernel, prior_mean)


def make_truth(cfg: ExperimentConfig, trial: int):
    s = cfg.scenario
    g = cfg.geometry()
    seed = cfg.experiment.seed + trial
    if s.kind == "binary":
        return generate_binary_field(g, s.occupancy_fraction, seed=seed, cluster_radius_range=s.cluster_radius)
    if s.kind == "gaussian":
        truth = generate_gaussian_field(g, s.cluster_radius, seed=seed)
    else:
        truth = generate_split_field(g, s.split_threshold, seed=seed, cluster_radius_range=s.cluster_radius)
    return dataclasses.replace(truth, values=truth.values * cfg.value_scale())


def make_belief(cfg: ExperimentConfig):
    camera = cfg.camera()
    if cfg.scenario.kind == "binary":
        occ = OccupancyMap(cfg.geometry(), prior_probability=cfg.map.prior_probability)
        return DiscreteBelief(occ, camera, _classifier(cfg))
    m = cfg.map
    prior = _prior(cfg.geometry(), MaternKernel(m.sigma_f2, m.length_scale, m.sigma_n2), m.prior_mean * cfg.value_scale())
    return ContinuousBelief(prior.copy(), camera, _continuous_model(cfg))


def trial_entropy(cfg: ExperimentConfig, trial: int, planner: str) -> list[int]:
    """Seed-sequence entropy for one (trial, planner) pair."""
    return [cfg.experiment.seed, trial, zlib.crc32(planner.encode())]


def _replan_rows(result, cfg: ExperimentConfig) -> list[dict]:
    f = cfg.sensor.frequency
    rows = []
    traj_start = {id(tr): t0 for t0, tr in result.trajectories}
    for i, r in enumerate(result.replans):
        t = traj_start.get(id(r.trajectory), math.nan)

        def site_z(traj):
            times = measurement_times(traj.duration, f)
            return float(traj.position(times[1])[2]) if len(times) > 1 else math.nan

        rows.append(dict(
            replan=i, t=t, objective=r.objective, seed_objective=r.seed_objective, improved=int(r.improved),
            seed_waypoint_z=float(r.seed_trajectory.waypoints[1, 2]), waypoint_z=float(r.trajectory.waypoints[1, 2]),
            seed_site_z=site_z(r.seed_trajectory), site_z=site_z(r.trajectory), warning=r.warning or "",
        ))
    return rows


def run_trial(cfg: ExperimentConfig, trial: int, planner: str):
    """Run one mission; returns ``(records, replan_rows)``."""
    truth = make_truth(cfg, trial)
    belief = make_belief(cfg)
    noise_seq, plan_seq = np.random.SeedSequence(trial_entropy(cfg, trial, planner)).spawn(2)
    result = run_mission(
        truth, belief, cfg.planner_config(), np.random.default_rng(noise_seq), planner=planner,
        trial=trial, planner_rng=np.random.default_rng(plan_seq),
        lawnmower_altitude=cfg.benchmarks.lawnmower_altitude,
    )
    return result.records, _replan_rows(result, cfg)


def _job(args):
    cfg, trial, planner = args
    try:
        records, replans = run_trial(cfg, trial, planner)
        return records, replans, None
    except Exception as exc:  # noqa: BLE001 - a failed trial is recorded, not fatal
        return None, None, f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _write_rows(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def write_records(path, records) -> None:
    """Write metrics records with the fixed column order."""
    _write_rows(Path(path), MetricsRecord.columns(), [r.as_dict() for r in records])


def read_records(path) -> list[MetricsRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for f in dataclasses.fields(MetricsRecord):
                v = row[f.name]
                kw[f.name] = v if f.name == "planner" else int(v) if f.name in ("measurement", "trial") else float(v)
            out.append(MetricsRecord(**kw))
    return out


def _step_values(records, column: str, bins: np.ndarray) -> np.ndarray:
    """Value of `column` at each bin time, holding the latest measurement."""
    t = np.array([r.t for r in records])
    v = np.array([getattr(r, column) for r in records], dtype=float)
    idx = np.searchsorted(t, bins, side="right") - 1
    out = np.full(bins.shape, np.nan)
    ok = idx >= 0
    out[ok] = v[idx[ok]]
    return out


def aggregate(runs: dict, budget: float, bin_width: float = 1.0) -> list[dict]:
    """Mean and 95% t-interval across trials per planner, metric and time bin.

    Parameters
    ----------
    runs : dict
        ``{(planner, trial): [MetricsRecord, ...]}`` for successful trials.
    """
    bins = np.arange(0.0, budget + 1e-9, bin_width)
    rows = []
    planners = sorted({p for p, _ in runs})
    for planner in planners:
        trials = [runs[k] for k in sorted(runs) if k[0] == planner]
        for metric in METRIC_COLUMNS:
            values = np.array([_step_values(recs, metric, bins) for recs in trials])
            if np.all(np.isnan(values)):
                continue
            for j, t in enumerate(bins):
                col = values[:, j]
                col = col[~np.isnan(col)]
                n = col.size
                mean = float(col.mean()) if n else math.nan
                if n >= 2:
                    half = float(stats.t.ppf(0.975, n - 1) * col.std(ddof=1) / math.sqrt(n))
                else:
                    half = math.nan
                rows.append(dict(planner=planner, metric=metric, t=float(t), n=n, mean=mean,
                                 ci_low=mean - half, ci_high=mean + half))
    return rows


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: dict
    replans: dict
    failures: dict
    aggregate: list
    out_dir: Path | None


def run_experiment(config, out_dir=None, seed: int | None = None, workers: int | None = None, trials: int | None = None) -> ExperimentResult:
    """Run every (planner, trial) pair of `config` and write the outputs.

    Parameters
    ----------
    config : ExperimentConfig or path
    out_dir : path, optional
        Nothing is written when None.
    seed, workers, trials : int, optional
        Override the corresponding ``experiment`` fields.
    """
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    overrides = {k: v for k, v in (("seed", seed), ("workers", workers), ("trials", trials)) if v is not None}
    if overrides:
        cfg = dataclasses.replace(cfg, experiment=dataclasses.replace(cfg.experiment, **overrides))
        _validate(cfg)
    e = cfg.experiment
    jobs = [(cfg, trial, planner) for planner in e.planners for trial in range(e.trials)]
    if e.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=e.workers) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]

    runs, replans, failures = {}, {}, {}
    for (_, trial, planner), (records, rp, err) in zip(jobs, results):
        if err is None:
            runs[(planner, trial)] = records
            replans[(planner, trial)] = rp
        else:
            failures[(planner, trial)] = err
    agg = aggregate(runs, cfg.planner.budget)

    out = None
    if out_dir is not None:
        out = Path(out_dir)
        (out / "trials").mkdir(parents=True, exist_ok=True)
        for (planner, trial), records in runs.items():
            write_records(out / "trials" / f"{planner}_{trial:03d}.csv", records)
            if planner in ("cmaes", "lattice"):
                _write_rows(out / "trials" / f"{planner}_{trial:03d}_replans.csv", REPLAN_COLUMNS, replans[(planner, trial)])
        _write_rows(out / "aggregate.csv", ("planner", "metric", "t", "n", "mean", "ci_low", "ci_high"), agg)
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "config": _jsonable(cfg.as_dict()),
            "config_hash": cfg.digest(),
            "trials": [
                {
                    "planner": planner,
                    "trial": trial,
                    "field_seed": e.seed + trial,
                    "rng_entropy": trial_entropy(cfg, trial, planner),
                    "status": "ok" if (planner, trial) in runs else "failed",
                    "error": failures.get((planner, trial)),
                    "csv": f"trials/{planner}_{trial:03d}.csv" if (planner, trial) in runs else None,
                }
                for _, trial, planner in jobs
            ],
        }
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return ExperimentResult(cfg, runs, replans, failures, agg, out)
