"""Informative path planning for UAV terrain monitoring.

Occupancy-grid and Gaussian-process mapping with altitude-dependent sensors,
a greedy lattice search refined by CMA-ES, coverage baselines and a
multi-trial experiment harness.
"""

from .benchmarks import lawnmower, random_planner, spiral
from .cmaes import CmaConfig, CmaResult, maximize
from .experiment import ConfigError, ExperimentConfig, load_config, parse_config, run_experiment
from .field import (
    GridGeometry,
    GroundTruthField,
    generate_binary_field,
    generate_gaussian_field,
    generate_split_field,
    load_field_csv,
    save_field_csv,
)
from .gp_map import (
    GPFieldMap,
    MaternKernel,
    NumericalError,
    TraceGainEvaluator,
    build_prior,
    fuse,
    interesting_cells_continuous,
    predict_continuous_update,
    trace_uncertainty,
)
from .metrics import MetricsRecord, delta_sigma2, mll, rmse, wmll, wrmse
from .occupancy import OccupancyMap, entropy, interesting_cells_discrete, predict_discrete_update, update_discrete
from .planner import (
    ContinuousBelief,
    DiscreteBelief,
    Lattice,
    MissionState,
    PlannerConfig,
    Workspace,
    build_lattice,
    greedy_lattice_search,
    replan,
    run_mission,
    utility,
)
from .sensors import (
    BinaryClassifierModel,
    CameraConfig,
    ContinuousSensorModel,
    MeasurementPatch,
    footprint,
    noise_variance,
    simulate_binary_measurement,
    simulate_continuous_measurement,
)
from .trajectory import Trajectory, measurement_poses, plan_polynomial

__version__ = "0.1.0"
