"""
Camera geometry and altitude-dependent sensor models.

Two probabilistic sensors are modelled: a binary classifier whose true- and
false-positive rates degrade towards 0.5 with altitude, and a Gaussian sensor
whose noise variance grows as ``a * (1 - exp(-b * h))`` and whose resolution
drops in discrete altitude bands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import GridGeometry, GroundTruthField

__all__ = [
    "CameraConfig",
    "BinaryClassifierModel",
    "ContinuousSensorModel",
    "MeasurementPatch",
    "footprint",
    "footprint_window",
    "noise_variance",
    "classifier_likelihood",
    "resolution_scale",
    "measurement_layout",
    "simulate_continuous_measurement",
    "simulate_binary_measurement",
]

_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class CameraConfig:
    """Nadir-pointing camera with a rectangular field of view.

    `fov_x` and `fov_y` are full opening angles in degrees.
    """

    fov_x: float = 60.0
    fov_y: float = 60.0
    frequency: float = 0.15
    nadir: bool = True

    def __post_init__(self):
        for fov in (self.fov_x, self.fov_y):
            if not 0.0 < fov < 180.0:
                raise ValueError(f"field of view must be in (0, 180) degrees, got {fov}")
        if not self.frequency > 0:
            raise ValueError("measurement frequency must be positive")
        if not self.nadir:
            raise ValueError("only nadir-pointing cameras are supported")

    def half_widths(self, altitude: float) -> tuple[float, float]:
        return (
            altitude * math.tan(math.radians(self.fov_x) / 2.0),
            altitude * math.tan(math.radians(self.fov_y) / 2.0),
        )

    def footprint_width(self, altitude: float) -> float:
        """Larger of the two footprint side lengths at `altitude`."""
        return 2.0 * max(self.half_widths(altitude))


@dataclass(frozen=True)
class BinaryClassifierModel:
    """Altitude-dependent classifier curves given as knot tables.

    ``tp`` is ``P(z=1 | cell=1, h)`` and ``fp`` is ``P(z=1 | cell=0, h)``,
    both linearly interpolated between knots at `altitudes`.
    """

    altitudes: tuple = (0.0, 10.0, 20.0, 30.0)
    tp: tuple = (0.95, 0.85, 0.70, 0.50)
    fp: tuple = (0.05, 0.15, 0.30, 0.50)

    def __post_init__(self):
        alt = np.asarray(self.altitudes, dtype=float)
        tp = np.asarray(self.tp, dtype=float)
        fp = np.asarray(self.fp, dtype=float)
        if not (alt.shape == tp.shape == fp.shape) or alt.size < 1:
            raise ValueError("knot tables must have matching, non-empty lengths")
        if np.any(np.diff(alt) <= 0):
            raise ValueError("knot altitudes must be strictly increasing")
        if np.any((tp <= 0) | (tp >= 1) | (fp <= 0) | (fp >= 1)):
            raise ValueError("classifier probabilities must lie in (0, 1)")
        if np.any(tp < fp):
            raise ValueError("true-positive curve must not fall below false-positive curve")
        for name, arr in (("altitudes", alt), ("tp", tp), ("fp", fp)):
            object.__setattr__(self, name, tuple(float(v) for v in arr))

    @property
    def altitude_validity(self) -> tuple[float, float]:
        return self.altitudes[0], self.altitudes[-1]

    def _check(self, h):
        lo, hi = self.altitude_validity
        if np.any(np.asarray(h) < lo - _EDGE_TOL) or np.any(np.asarray(h) > hi + _EDGE_TOL):
            raise ValueError(f"altitude {h} outside classifier validity [{lo}, {hi}]")

    def tp_at(self, h):
        self._check(h)
        return np.interp(h, self.altitudes, self.tp)

    def fp_at(self, h):
        self._check(h)
        return np.interp(h, self.altitudes, self.fp)

    def log_likelihood_ratio(self, h: float, label):
        """``ln P(z | c=1, h) - ln P(z | c=0, h)`` for observed label(s) `label`."""
        tp, fp = self.tp_at(h), self.fp_at(h)
        label = np.asarray(label)
        return np.where(label == 1, math.log(tp / fp), math.log((1.0 - tp) / (1.0 - fp)))


@dataclass(frozen=True)
class ContinuousSensorModel:
    """Gaussian sensor with altitude-dependent noise and resolution bands.

    Parameters
    ----------
    a, b : float
        Noise coefficients; the variance at altitude ``h`` is
        ``a * (1 - exp(-b * h))``.
    bands : sequence of (float, float)
        ``(upper_altitude, scale)`` pairs ordered by altitude. A band covers
        ``[previous_upper, upper)``, so a threshold altitude belongs to the
        band above it. The lowest band must have scale 1 and every ``1/scale``
        must be an integer.
    """

    a: float = 0.2
    b: float = 0.05
    bands: tuple = ((10.0, 1.0), (math.inf, 0.5))

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("noise coefficients a and b must be positive")
        bands = tuple((float(t), float(s)) for t, s in self.bands)
        if not bands:
            raise ValueError("at least one resolution band is required")
        if bands[0][1] != 1.0:
            raise ValueError("lowest resolution band must have scale 1")
        thresholds = [t for t, _ in bands]
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("band thresholds must be strictly increasing")
        for _, s in bands:
            inv = 1.0 / s if s > 0 else math.inf
            if not (0 < s <= 1 and abs(inv - round(inv)) < 1e-9):
                raise ValueError(f"scale {s} must be in (0, 1] with integer inverse")
        if bands[-1][0] != math.inf:
            bands = bands + ((math.inf, bands[-1][1]),)
        object.__setattr__(self, "bands", bands)


@dataclass
class MeasurementPatch:
    """A set of (possibly block-averaged) scalar measurements from one pose.

    ``members[i]`` lists the flat cell indices averaged by measurement ``i``;
    every row has ``block_size**2`` entries, with ``block_size = 1/scale``.
    """

    values: np.ndarray
    members: np.ndarray
    variances: np.ndarray
    altitude: float
    scale: float

    @property
    def block_size(self) -> int:
        return int(round(1.0 / self.scale))

    def __len__(self):
        return len(self.values)


def footprint_window(pose, camera: CameraConfig, geometry: GridGeometry):
    """Row/column ranges ``(r0, r1, c0, c1)`` (half-open) of cells seen from `pose`.

    A cell is inside when its centre lies in the ground-projected FoV
    rectangle; the window is clipped to the map and may be empty.
    """
    x, y, h = (float(v) for v in pose)
    if not h > 0:
        raise ValueError(f"pose altitude must be positive, got {h}")
    hx, hy = camera.half_widths(h)
    res = geometry.resolution
    ox, oy = geometry.origin
    c0 = math.ceil((x - hx - ox) / res - 0.5 - _EDGE_TOL)
    c1 = math.floor((x + hx - ox) / res - 0.5 + _EDGE_TOL) + 1
    r0 = math.ceil((y - hy - oy) / res - 0.5 - _EDGE_TOL)
    r1 = math.floor((y + hy - oy) / res - 0.5 + _EDGE_TOL) + 1
    c0, c1 = max(c0, 0), min(c1, geometry.cols)
    r0, r1 = max(r0, 0), min(r1, geometry.rows)
    if c1 <= c0 or r1 <= r0:
        return 0, 0, 0, 0
    return r0, r1, c0, c1


def footprint(pose, camera: CameraConfig, geometry: GridGeometry) -> np.ndarray:
    """Sorted flat indices of the cells observed from `pose`."""
    r0, r1, c0, c1 = footprint_window(pose, camera, geometry)
    rr, cc = np.meshgrid(np.arange(r0, r1), np.arange(c0, c1), indexing="ij")
    return (rr * geometry.cols + cc).ravel()


def noise_variance(h, model: ContinuousSensorModel):
    """Measurement noise variance ``a * (1 - exp(-b h))`` at altitude `h`."""
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr < 0):
        raise ValueError(f"altitude must be non-negative, got {h}")
    out = model.a * -np.expm1(-model.b * h_arr)
    return float(out) if out.ndim == 0 else out


def classifier_likelihood(h: float, cell_state: int, observed_label: int, model: BinaryClassifierModel) -> float:
    """``P(z = observed_label | cell = cell_state, h)``."""
    if cell_state not in (0, 1) or observed_label not in (0, 1):
        raise ValueError("cell state and label must be 0 or 1")
    p_one = model.tp_at(h) if cell_state == 1 else model.fp_at(h)
    return float(p_one if observed_label == 1 else 1.0 - p_one)


def resolution_scale(h: float, model: ContinuousSensorModel) -> float:
    """Resolution scale factor of the band containing altitude `h`."""
    for upper, scale in model.bands:
        if h < upper:
            return scale
    return model.bands[-1][1]


def _block_members(window, block: int, cols: int) -> np.ndarray:
    r0, r1, c0, c1 = window
    br = np.arange(-(-r0 // block), r1 // block)
    bc = np.arange(-(-c0 // block), c1 // block)
    if br.size == 0 or bc.size == 0:
        return np.empty((0, block * block), dtype=np.intp)
    offs = np.arange(block)
    rows = (br[:, None] * block + offs[None, :])  # (nbr, block)
    cols_ = (bc[:, None] * block + offs[None, :])  # (nbc, block)
    members = rows[:, None, :, None] * cols + cols_[None, :, None, :]
    return members.reshape(br.size * bc.size, block * block)


def measurement_layout(pose, camera: CameraConfig, model: ContinuousSensorModel, geometry: GridGeometry):
    """Structure of the measurement taken from `pose` without its values.

    Blocks of ``1/scale`` cells per side are aligned to the global grid
    (block rows start at multiples of the block size); blocks only partly
    inside the footprint are dropped.

    Returns
    -------
    members : (m, k) int ndarray
    variance : float
    scale : float
    """
    h = float(pose[2])
    window = footprint_window(pose, camera, geometry)
    scale = resolution_scale(h, model)
    block = int(round(1.0 / scale))
    members = _block_members(window, block, geometry.cols)
    return members, noise_variance(h, model), scale


def simulate_continuous_measurement(
    pose,
    camera: CameraConfig,
    model: ContinuousSensorModel,
    truth: GroundTruthField,
    rng: np.random.Generator,
) -> MeasurementPatch:
    """Draw a noisy, possibly low-resolution image of `truth` from `pose`."""
    members, var, scale = measurement_layout(pose, camera, model, truth.geometry)
    means = truth.flat[members].mean(axis=1)
    values = means + rng.normal(0.0, math.sqrt(var), size=len(means)) if var > 0 else means.copy()
    return MeasurementPatch(
        values=values,
        members=members,
        variances=np.full(len(values), var),
        altitude=float(pose[2]),
        scale=scale,
    )


def simulate_binary_measurement(
    pose,
    camera: CameraConfig,
    model: BinaryClassifierModel,
    truth: GroundTruthField,
    rng: np.random.Generator,
):
    """Sample classifier labels for every footprint cell.

    Returns
    -------
    cells : ndarray of flat indices
    labels : ndarray of {0, 1}
    """
    h = float(pose[2])
    cells = footprint(pose, camera, truth.geometry)
    state = truth.flat[cells]
    p_one = np.where(state == 1, model.tp_at(h), model.fp_at(h))
    labels = (rng.random(len(cells)) < p_one).astype(int)
    return cells, labels
