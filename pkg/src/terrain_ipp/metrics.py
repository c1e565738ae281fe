"""
Map accuracy and uncertainty statistics against ground truth.

Weighted variants use ``w_i = truth_i / max(truth)`` renormalised to mean 1,
which emphasises errors in high-valued regions. An all-zero truth falls back
to uniform weights.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .field import GroundTruthField
from .gp_map import GPFieldMap, NumericalError
from .occupancy import OccupancyMap

__all__ = [
    "MetricsRecord",
    "value_weights",
    "rmse",
    "wrmse",
    "mll",
    "wmll",
    "delta_sigma2",
    "estimate_of",
]


@dataclass
class MetricsRecord:
    """Map statistics at one measurement time of one trial."""

    t: float
    measurement: int
    x: float
    y: float
    z: float
    trace: float = math.nan
    entropy: float = math.nan
    rmse: float = math.nan
    wrmse: float = math.nan
    mll: float = math.nan
    wmll: float = math.nan
    delta_sigma2: float = math.nan
    trace_interesting: float = math.nan
    trial: int = 0
    planner: str = ""

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


def estimate_of(m) -> np.ndarray:
    """Point estimate per cell: GP mean or occupancy probability."""
    if isinstance(m, GPFieldMap):
        return m.mean
    if isinstance(m, OccupancyMap):
        return m.probability(m.layers[0])
    return np.asarray(m, dtype=float).ravel()


def _truth_of(truth) -> np.ndarray:
    if isinstance(truth, GroundTruthField):
        return truth.flat
    return np.asarray(truth, dtype=float).ravel()


def _pair(estimate, truth):
    est, tru = estimate_of(estimate), _truth_of(truth)
    if est.shape != tru.shape:
        raise ValueError(f"map has {est.size} cells but truth has {tru.size}")
    return est, tru


def value_weights(truth) -> np.ndarray:
    tru = _truth_of(truth)
    top = tru.max()
    if top <= 0:
        return np.ones_like(tru)
    w = tru / top
    return w / w.mean()


def rmse(estimate, truth) -> float:
    est, tru = _pair(estimate, truth)
    return float(np.sqrt(np.mean((est - tru) ** 2)))


def wrmse(estimate, truth, weights=None) -> float:
    est, tru = _pair(estimate, truth)
    w = value_weights(tru) if weights is None else np.asarray(weights, dtype=float)
    return float(np.sqrt(np.mean(w * (est - tru) ** 2)))


def _nlpd(gmap: GPFieldMap, truth) -> np.ndarray:
    est, tru = _pair(gmap, truth)
    var = np.diag(gmap.cov) if isinstance(gmap, GPFieldMap) else None
    if var is None:
        raise TypeError("mean log loss needs a GPFieldMap")
    if np.any(var <= 0):
        raise NumericalError("non-positive predictive variance")
    return 0.5 * np.log(2.0 * math.pi * var) + (tru - est) ** 2 / (2.0 * var)


def mll(gmap: GPFieldMap, truth) -> float:
    """Mean negative log predictive density of the truth under each cell's Gaussian."""
    return float(np.mean(_nlpd(gmap, truth)))


def wmll(gmap: GPFieldMap, truth, weights=None) -> float:
    w = value_weights(truth) if weights is None else np.asarray(weights, dtype=float)
    return float(np.mean(w * _nlpd(gmap, truth)))


def delta_sigma2(variances, interesting) -> float:
    """Relative gap between mean variance outside and inside the interesting set.

    Returns NaN when either side of the partition is empty.
    """
    var = np.asarray(variances, dtype=float).ravel()
    mask = np.zeros(var.size, dtype=bool)
    mask[interesting] = True
    if mask.all() or not mask.any():
        return math.nan
    outside = var[~mask].mean()
    return float((outside - var[mask].mean()) / outside)
