"""
(mu/mu_w, lambda)-CMA-ES maximiser with box constraints.

Internal parameters follow Hansen's standard defaults. The search runs in
coordinates scaled by the per-coordinate initial step sizes, so the
distribution starts isotropic with unit step size. Candidates leaving the
box are evaluated at their clipped position and ranked with a quadratic
penalty on the clipping distance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

__all__ = ["CmaConfig", "CmaResult", "maximize", "default_population_size"]


def default_population_size(dim: int) -> int:
    return 4 + int(math.floor(3.0 * math.log(dim)))


@dataclass
class CmaConfig:
    """Settings for one CMA-ES run.

    Parameters
    ----------
    initial_step_sizes : array_like
        Per-coordinate standard deviations of the initial search distribution.
    lower, upper : array_like
        Box bounds per coordinate.
    max_iterations : int
        Number of generations.
    population_size : int, optional
        Offspring per generation; ``4 + floor(3 ln d)`` when None.
    seed : int
    penalty_factor : float
        Weight of the boundary penalty relative to the generation's median
        absolute objective value.
    """

    initial_step_sizes: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    max_iterations: int = 45
    population_size: int | None = None
    seed: int = 0
    penalty_factor: float = 1.0

    def __post_init__(self):
        self.initial_step_sizes = np.asarray(self.initial_step_sizes, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        d = self.initial_step_sizes.size
        if self.lower.shape != (d,) or self.upper.shape != (d,):
            raise ValueError("bounds and step sizes must have the same dimension")
        if np.any(self.initial_step_sizes <= 0):
            raise ValueError("initial step sizes must be positive")
        if np.any(self.lower >= self.upper):
            raise ValueError("each lower bound must be below its upper bound")
        if self.population_size is not None and self.population_size < 2:
            raise ValueError("population size must be at least 2")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")

    @property
    def dim(self) -> int:
        return self.initial_step_sizes.size


class CmaResult(NamedTuple):
    x: np.ndarray
    score: float
    evaluations: int


def _safe(objective, x) -> float:
    try:
        v = float(objective(x))
    except (ArithmeticError, ValueError):
        return -math.inf
    return v if math.isfinite(v) else -math.inf


def maximize(
    objective: Callable[[np.ndarray], float],
    x0,
    config: CmaConfig,
    trace: list | None = None,
    trace_csv=None,
) -> CmaResult:
    """Maximise `objective` starting from `x0`.

    Returns the best in-bounds point ever evaluated (``x0`` included), its
    objective value, and the number of candidate evaluations (``x0`` is not
    counted). When `trace` is a list, one ``(iteration, best, sigma)`` tuple
    is appended per generation; `trace_csv` writes the same rows to a file.
    """
    x0 = np.asarray(x0, dtype=float)
    n = config.dim
    if x0.shape != (n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({n},)")
    if np.any(x0 < config.lower) or np.any(x0 > config.upper):
        raise ValueError("x0 must lie within the bounds")

    best_x, best_f = x0.copy(), _safe(objective, x0)
    rows = [] if trace is None else trace
    if config.max_iterations == 0:
        return CmaResult(best_x, best_f, 0)

    rng = np.random.default_rng(config.seed)
    steps = config.initial_step_sizes
    lam = config.population_size or default_population_size(n)
    mu = lam // 2
    w = math.log((lam + 1) / 2.0) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mu_eff = 1.0 / np.sum(w**2)

    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n**2))

    lo = (config.lower - x0) / steps
    hi = (config.upper - x0) / steps
    m = np.zeros(n)
    sigma = 1.0
    C = np.eye(n)
    p_sigma = np.zeros(n)
    p_c = np.zeros(n)
    B, D = np.eye(n), np.ones(n)
    evaluations = 0

    for it in range(config.max_iterations):
        z = rng.standard_normal((lam, n))
        y = (z * D) @ B.T
        u = m + sigma * y
        u_feas = np.clip(u, lo, hi)
        xs = np.clip(x0 + u_feas * steps, config.lower, config.upper)
        f = np.array([_safe(objective, x) for x in xs])
        evaluations += lam

        i_best = int(np.argmax(f))
        if f[i_best] > best_f:
            best_f, best_x = float(f[i_best]), xs[i_best].copy()

        finite = f[np.isfinite(f)]
        scale = float(np.median(np.abs(finite))) if finite.size else 1.0
        penalty = config.penalty_factor * max(scale, 1e-12) * np.sum((u - u_feas) ** 2, axis=1)
        ranked = f - penalty
        order = np.argsort(-ranked, kind="stable")[:mu]

        y_sel = y[order]
        y_w = w @ y_sel
        m = m + sigma * y_w

        C_inv_sqrt = B @ np.diag(1.0 / D) @ B.T
        p_sigma = (1 - c_sigma) * p_sigma + math.sqrt(c_sigma * (2 - c_sigma) * mu_eff) * (C_inv_sqrt @ y_w)
        norm_ps = np.linalg.norm(p_sigma)
        h_sigma = norm_ps / math.sqrt(1 - (1 - c_sigma) ** (2 * (it + 1))) < (1.4 + 2.0 / (n + 1)) * chi_n
        p_c = (1 - c_c) * p_c + h_sigma * math.sqrt(c_c * (2 - c_c) * mu_eff) * y_w
        delta_h = (1 - h_sigma) * c_c * (2 - c_c)
        rank_mu = (y_sel.T * w) @ y_sel
        C = (1 - c_1 - c_mu) * C + c_1 * (np.outer(p_c, p_c) + delta_h * C) + c_mu * rank_mu
        sigma *= math.exp((c_sigma / d_sigma) * (norm_ps / chi_n - 1.0))

        C = 0.5 * (C + C.T)
        eigval, B = np.linalg.eigh(C)
        D = np.sqrt(np.clip(eigval, 1e-300, None))
        rows.append((it, best_f, sigma))

    if trace_csv is not None:
        with open(trace_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "best_score", "sigma"])
            writer.writerows(rows)
    return CmaResult(best_x, best_f, evaluations)
