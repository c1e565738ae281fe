"""
Gaussian-process terrain maps with sequential Kalman-filter fusion.

The map state is a mean vector and a dense covariance over every grid cell.
A Matérn 3/2 prior seeds the covariance; measurements (possibly averaging
blocks of cells) are fused with the standard linear-Gaussian update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.linalg.lapack import dpotri
from scipy.spatial.distance import cdist

from .field import GridGeometry
from .sensors import CameraConfig, ContinuousSensorModel, MeasurementPatch, measurement_layout

__all__ = [
    "MaternKernel",
    "GPFieldMap",
    "NumericalError",
    "matern32",
    "build_prior",
    "fuse",
    "observation_matrix",
    "trace_uncertainty",
    "interesting_cells_continuous",
    "predict_continuous_update",
    "TraceGainEvaluator",
]

_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class NumericalError(ArithmeticError):
    """A factorisation failed even after jitter escalation."""


@dataclass(frozen=True)
class MaternKernel:
    """Isotropic Matérn 3/2 kernel hyperparameters."""

    sigma_f2: float = 1.82
    length_scale: float = 3.67
    sigma_n2: float = 1.42

    def __post_init__(self):
        if not (self.sigma_f2 > 0 and self.length_scale > 0 and self.sigma_n2 > 0):
            raise ValueError(f"kernel hyperparameters must be positive: {self}")


def matern32(d, kernel: MaternKernel):
    """``sigma_f2 * (1 + sqrt(3) d / l) * exp(-sqrt(3) d / l)``."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distances must be non-negative")
    r = math.sqrt(3.0) * d / kernel.length_scale
    out = kernel.sigma_f2 * (1.0 + r) * np.exp(-r)
    return float(out) if out.ndim == 0 else out


def _cholesky(a: np.ndarray, context: str = "") -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter on failure."""
    scale = float(np.mean(np.diag(a))) if a.size else 1.0
    for jitter in _JITTERS:
        try:
            if jitter:
                return cholesky(a + jitter * scale * np.eye(len(a)), lower=True, check_finite=False)
            return cholesky(a, lower=True, check_finite=False)
        except LinAlgError:
            continue
    raise NumericalError(f"Cholesky factorisation failed after jitter {_JITTERS[-1]:g}{context}")


class GPFieldMap:
    """Gaussian belief over a gridded scalar field.

    Attributes
    ----------
    geometry : GridGeometry
    mean : (n,) ndarray
    cov : (n, n) ndarray
    """

    def __init__(self, geometry: GridGeometry, mean, cov):
        self.geometry = geometry
        self.mean = np.array(mean, dtype=float)
        self.cov = np.array(cov, dtype=float)
        n = geometry.n_cells
        if self.mean.shape != (n,) or self.cov.shape != (n, n):
            raise ValueError("mean/cov shapes do not match the grid")

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.cov).copy()

    def copy(self) -> "GPFieldMap":
        return GPFieldMap(self.geometry, self.mean, self.cov)

    def to_csv(self, path) -> None:
        """Write ``index, mean, variance`` rows."""
        data = np.column_stack([np.arange(self.geometry.n_cells), self.mean, self.variance])
        np.savetxt(Path(path), data, delimiter=",", fmt=["%d", "%.17g", "%.17g"], header="index,mean,variance", comments="")


def build_prior(geometry: GridGeometry, kernel: MaternKernel, prior_mean: float = 50.0) -> GPFieldMap:
    """Uniform-mean prior map with GP posterior covariance on the grid.

    The covariance is ``K - K (K + sigma_n2 I)^-1 K`` with ``K`` evaluated
    between all cell centres.
    """
    X = geometry.centers()
    K = matern32(cdist(X, X), kernel)
    A = K + kernel.sigma_n2 * np.eye(len(K))
    L = _cholesky(A, context=f" (kernel {kernel})")
    W = solve_triangular(L, K, lower=True, check_finite=False)
    P = K - W.T @ W
    P = 0.5 * (P + P.T)
    return GPFieldMap(geometry, np.full(geometry.n_cells, float(prior_mean)), P)


def observation_matrix(members: np.ndarray, n: int) -> np.ndarray:
    """Dense measurement matrix: row ``i`` averages the cells in ``members[i]``."""
    members = np.asarray(members)
    H = np.zeros((len(members), n))
    if len(members):
        np.put_along_axis(H, members, 1.0 / members.shape[1], axis=1)
    return H


def fuse(gmap: GPFieldMap, patch: MeasurementPatch, inplace: bool = False) -> GPFieldMap:
    """Kalman update of `gmap` with the measurements in `patch`."""
    out = gmap if inplace else gmap.copy()
    if len(patch) == 0:
        return out
    members = np.asarray(patch.members)
    R = np.asarray(patch.variances, dtype=float)
    if np.any(R <= 0):
        raise NumericalError("measurement variances must be positive")
    P = out.cov
    HP = P[members].mean(axis=1)  # (m, n)
    S = HP[:, members].mean(axis=2) + np.diag(R)
    L = _cholesky(S, context=" (innovation covariance)")
    W = solve_triangular(L, HP, lower=True, check_finite=False)
    innovation = np.asarray(patch.values, dtype=float) - out.mean[members].mean(axis=1)
    out.mean += W.T @ solve_triangular(L, innovation, lower=True, check_finite=False)
    P -= W.T @ W
    out.cov = 0.5 * (P + P.T)
    return out


def trace_uncertainty(gmap: GPFieldMap, subset=None) -> float:
    """Sum of cell variances over `subset` (flat indices or boolean mask)."""
    var = np.diag(gmap.cov)
    return float(var.sum() if subset is None else var[subset].sum())


def interesting_cells_continuous(gmap: GPFieldMap, mu_th: float, beta: float) -> np.ndarray:
    """Flat indices of cells with ``mean + beta * std >= mu_th``."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    std = np.sqrt(np.clip(np.diag(gmap.cov), 0.0, None))
    return np.flatnonzero(gmap.mean + beta * std >= mu_th)


def predict_continuous_update(
    gmap: GPFieldMap,
    pose,
    camera: CameraConfig,
    model: ContinuousSensorModel,
    inplace: bool = False,
) -> GPFieldMap:
    """Covariance-only update for a hypothetical measurement from `pose`.

    The predicted measurement equals the current mean, so the innovation is
    zero and the mean is unchanged.
    """
    members, var, scale = measurement_layout(pose, camera, model, gmap.geometry)
    patch = MeasurementPatch(
        values=gmap.mean[members].mean(axis=1) if len(members) else np.empty(0),
        members=members,
        variances=np.full(len(members), var),
        altitude=float(pose[2]),
        scale=scale,
    )
    out = gmap if inplace else gmap.copy()
    mean = out.mean.copy()
    fuse(out, patch, inplace=True)
    out.mean = mean
    return out


class TraceGainEvaluator:
    """Fast variance-reduction queries against a fixed map snapshot.

    Conditioning on a batch of measurements ``(H, R)`` lowers the summed
    variance over a cell subset ``I`` by ``tr(S^-1 H P D_I P H^T)`` with
    ``S = H P H^T + R``. ``P D_I P`` is formed once, so each query costs
    ``O(M^3)`` in the number ``M`` of distinct measurement rows. Rows that
    average the same cells are merged by adding their precisions, which is
    exact for Gaussian noise.

    Parameters
    ----------
    gmap : GPFieldMap
        Snapshot; its covariance is referenced, not copied.
    camera, model
        Sensor used to lay out the hypothetical measurements.
    subset : array of flat indices, optional
        Cells whose variance counts; all cells when None.
    """

    def __init__(self, gmap: GPFieldMap, camera: CameraConfig, model: ContinuousSensorModel, subset=None):
        self.gmap = gmap
        self.camera = camera
        self.model = model
        self.subset = None if subset is None else np.asarray(subset, dtype=np.intp)
        self._Q = None

    @property
    def Q(self) -> np.ndarray:
        if self._Q is None:
            P = self.gmap.cov
            if self.subset is None:
                self._Q = P @ P
            else:
                PI = P[:, self.subset]
                self._Q = PI @ PI.T
        return self._Q

    def _rows(self, poses):
        """Distinct measurement rows grouped by block size: ``{k: (members, precision)}``."""
        by_size: dict[int, tuple[list, list]] = {}
        for pose in poses:
            members, var, _ = measurement_layout(pose, self.camera, self.model, self.gmap.geometry)
            if len(members) == 0:
                continue
            mem, prec = by_size.setdefault(members.shape[1], ([], []))
            mem.append(members)
            prec.append(np.full(len(members), 1.0 / var))
        out = {}
        for k, (mem, prec) in by_size.items():
            members = np.concatenate(mem)
            precision = np.concatenate(prec)
            # a block is identified by its first (top-left) cell
            _, first, inverse = np.unique(members[:, 0], return_index=True, return_inverse=True)
            out[k] = (members[first], np.bincount(inverse.ravel(), weights=precision))
        return out

    def gain(self, poses) -> float:
        """Variance reduction over the subset from measuring at every pose in `poses`."""
        if self.subset is not None and self.subset.size == 0:
            return 0.0
        groups = self._rows(poses)
        if not groups:
            return 0.0
        n = self.gmap.geometry.n_cells
        blocks = [
            sp.csr_matrix(
                (np.full(members.size, 1.0 / k), members.ravel(), np.arange(0, members.size + 1, k)),
                shape=(len(members), n),
            )
            for k, (members, _) in groups.items()
        ]
        H = sp.vstack(blocks, format="csr") if len(blocks) > 1 else blocks[0]
        R = 1.0 / np.concatenate([precision for _, precision in groups.values()])
        S = (H @ (H @ self.gmap.cov).T).T + np.diag(R)
        G = (H @ (H @ self.Q).T).T
        L = _cholesky(0.5 * (S + S.T), context=" (batch innovation covariance)")
        # tr(S^-1 G) from the lower triangle of S^-1 (both matrices symmetric)
        S_inv, info = dpotri(L, lower=1)
        if info != 0:
            raise NumericalError(f"dpotri failed with info={info}")
        lower = np.tril(S_inv) * G
        return float(2.0 * lower.sum() - np.trace(lower))
