# %% [markdown]
# # One mission per planner
#
# Fly each planner once over the same Gaussian field and compare how fast
# the map uncertainty drops. Trajectory samples are written next to this
# script so they can be plotted with any tool.

# %%
import dataclasses
from pathlib import Path

import numpy as np

from terrain_ipp.field import GridGeometry, generate_gaussian_field
from terrain_ipp.gp_map import MaternKernel, build_prior, trace_uncertainty
from terrain_ipp.planner import ContinuousBelief, PlannerConfig, run_mission
from terrain_ipp.sensors import CameraConfig, ContinuousSensorModel

out = Path(__file__).with_name("single_mission_out")
out.mkdir(exist_ok=True)

# %% [markdown]
# A 30 m square field mapped at 0.75 m, values scaled to [0, 1].

# %%
grid = GridGeometry(30.0, 30.0, 0.75)
truth = generate_gaussian_field(grid, cluster_radius_range=(1.0, 3.0), seed=1)
truth = dataclasses.replace(truth, values=truth.values / 100.0)
prior = build_prior(grid, MaternKernel(), prior_mean=0.5)
print(f"prior trace {trace_uncertainty(prior):.1f}")

# %% [markdown]
# The CMA-ES planner is the slow one (about a minute); set `planners` to a
# shorter list to skip it.

# %%
planners = ["cmaes", "lattice", "random", "lawnmower", "spiral"]
config = PlannerConfig()

for name in planners:
    belief = ContinuousBelief(prior.copy(), CameraConfig(), ContinuousSensorModel())
    result = run_mission(truth, belief, config, np.random.default_rng(0), planner=name)
    rec = result.records
    early = [r.trace for r in rec if r.t <= 50.0][-1]
    print(f"{name:>9}: {len(rec):2d} images, Tr(P) at 50 s {early:6.1f}, "
          f"final {rec[-1].trace:6.1f}, RMSE {rec[-1].rmse:.3f}")
    for i, (t0, traj) in enumerate(result.trajectories):
        traj.to_csv(out / f"{name}_{i:02d}.csv", dt=0.5)

# %% [markdown]
# The two lattice planners fly high first to shrink the global uncertainty,
# then drop to refine. The lawnmower spends its budget uniformly at one
# altitude, so its uncertainty falls slowly but steadily.
