"""
Multi-layer occupancy grid with log-odds Bayesian updates.
"""

from __future__ import annotations

import copy
from pathlib import Path

import numpy as np

from .field import GridGeometry
from .sensors import BinaryClassifierModel, CameraConfig, footprint

__all__ = [
    "OccupancyMap",
    "update_discrete",
    "entropy",
    "binary_entropy",
    "interesting_cells_discrete",
    "predict_discrete_update",
]


def binary_entropy(p) -> np.ndarray:
    """Per-cell Shannon entropy in bits; 0 at p in {0, 1}."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1.0 - p) * np.log2(1.0 - p))
    return np.nan_to_num(h, nan=0.0)


class OccupancyMap:
    """Independent-Bernoulli occupancy layers stored as natural-log odds.

    Parameters
    ----------
    geometry : GridGeometry
    layers : sequence of str
        Layer names; layers are not coupled (a cell may be likely in several).
    prior_probability : float
        Initial occupancy probability of every cell.
    clamp : float, optional
        If given, log-odds are clipped to ``[-clamp, clamp]`` after updates.
    """

    def __init__(self, geometry: GridGeometry, layers=("target",), prior_probability=0.5, clamp=None):
        if not 0.0 < prior_probability < 1.0:
            raise ValueError("prior probability must lie in (0, 1)")
        self.geometry = geometry
        self.prior_log_odds = float(np.log(prior_probability / (1.0 - prior_probability)))
        self.clamp = clamp
        self.log_odds = {name: np.full(geometry.n_cells, self.prior_log_odds) for name in layers}

    @property
    def layers(self):
        return list(self.log_odds)

    def layer(self, name: str) -> np.ndarray:
        try:
            return self.log_odds[name]
        except KeyError:
            raise ValueError(f"unknown layer {name!r}; have {self.layers}") from None

    def probability(self, layer: str = "target") -> np.ndarray:
        # logistic written with exp(-|L|) stays in (0, 1) without overflow
        L = self.layer(layer)
        e = np.exp(-np.abs(L))
        return np.where(L >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def copy(self) -> "OccupancyMap":
        return copy.deepcopy(self)

    def _apply(self, layer: str, cells, delta):
        L = self.layer(layer)
        np.add.at(L, np.asarray(cells, dtype=np.intp), delta)
        if self.clamp is not None:
            np.clip(L, -self.clamp, self.clamp, out=L)

    def to_csv(self, path, layer: str = "target") -> None:
        np.savetxt(Path(path), self.probability(layer).reshape(self.geometry.shape), delimiter=",", fmt="%.17g")


def update_discrete(occ: OccupancyMap, layer: str, cells, labels, h: float, model: BinaryClassifierModel) -> OccupancyMap:
    """Fuse observed labels for `cells` taken at altitude `h` (in place).

    Each cell gains ``ln[P(z | c=1, h) / P(z | c=0, h)]``; unobserved cells
    are left untouched. Returns `occ` for chaining.
    """
    occ.layer(layer)
    cells = np.asarray(cells, dtype=np.intp)
    if cells.size and (cells.min() < 0 or cells.max() >= occ.geometry.n_cells):
        raise ValueError("observed cells fall outside the map")
    occ._apply(layer, cells, model.log_likelihood_ratio(h, labels))
    return occ


def entropy(occ: OccupancyMap, layer: str = "target", subset=None) -> float:
    """Total entropy in bits over `subset` (flat indices or boolean mask; all cells if None)."""
    p = occ.probability(layer)
    if subset is not None:
        p = p[subset]
    return float(binary_entropy(p).sum())


def interesting_cells_discrete(occ: OccupancyMap, layer: str, p_th: float) -> np.ndarray:
    """Flat indices of cells with ``p > p_th``."""
    if not 0.0 <= p_th <= 1.0:
        raise ValueError("probability threshold must lie in [0, 1]")
    return np.flatnonzero(occ.probability(layer) > p_th)


def predict_discrete_update(
    occ: OccupancyMap,
    layer: str,
    pose,
    camera: CameraConfig,
    model: BinaryClassifierModel,
    inplace: bool = False,
) -> OccupancyMap:
    """Apply the expected update of a measurement from `pose`.

    Each footprint cell is assumed to re-observe its most likely state
    (occupied iff ``p >= 0.5``). No randomness is involved.
    """
    out = occ if inplace else occ.copy()
    cells = footprint(pose, camera, occ.geometry)
    if cells.size == 0:
        return out
    likely = (out.layer(layer)[cells] >= 0.0).astype(int)
    out._apply(layer, cells, model.log_likelihood_ratio(float(pose[2]), likely))
    return out
