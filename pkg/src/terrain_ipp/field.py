"""
Synthetic ground-truth terrains on a fixed 2-D grid.

Grid convention
---------------
Cells are indexed row-major from the origin corner. Cell ``(r, c)`` has its
centre at ``origin + ((c + 0.5) * res, (r + 0.5) * res)``, so columns run
along x and rows along y. The flat index of ``(r, c)`` is ``r * cols + c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "GridGeometry",
    "GroundTruthField",
    "generate_gaussian_field",
    "generate_split_field",
    "generate_binary_field",
    "save_field_csv",
    "load_field_csv",
]


@dataclass(frozen=True)
class GridGeometry:
    """Uniform 2-D grid covering a rectangular area.

    Parameters
    ----------
    width, height : float
        Extent of the area in metres (x and y respectively).
    resolution : float
        Cell edge length in metres.
    origin : tuple of float
        Metric position of the grid corner.
    """

    width: float
    height: float
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("width and height must be positive")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid must contain at least one cell per axis")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def rows(self) -> int:
        return int(round(self.height / self.resolution))

    @property
    def cols(self) -> int:
        return int(round(self.width / self.resolution))

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def flat_index(self, row, col):
        return np.asarray(row) * self.cols + np.asarray(col)

    def row_col(self, index):
        return np.divmod(np.asarray(index), self.cols)

    def cell_center(self, row, col) -> np.ndarray:
        x = self.origin[0] + (np.asarray(col) + 0.5) * self.resolution
        y = self.origin[1] + (np.asarray(row) + 0.5) * self.resolution
        return np.stack([x, y], axis=-1)

    def cell_of(self, x, y):
        """Return the (row, col) of the cell containing metric point ``(x, y)``."""
        col = np.floor((np.asarray(x) - self.origin[0]) / self.resolution).astype(int)
        row = np.floor((np.asarray(y) - self.origin[1]) / self.resolution).astype(int)
        return row, col

    def centers(self) -> np.ndarray:
        """All cell centres as an ``(n_cells, 2)`` array in flat-index order."""
        rr, cc = np.meshgrid(np.arange(self.rows), np.arange(self.cols), indexing="ij")
        return self.cell_center(rr.ravel(), cc.ravel())


@dataclass(frozen=True)
class GroundTruthField:
    """Dense raster of the latent terrain variable.

    ``values`` has shape ``geometry.shape``; continuous targets are in percent
    ([0, 100]) and discrete targets are in {0, 1}.
    """

    geometry: GridGeometry
    values: np.ndarray
    seed: int | None = None
    kind: str = "continuous"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.geometry.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {self.geometry.shape}")
        if self.kind == "binary":
            if not np.all((values == 0) | (values == 1)):
                raise ValueError("binary field values must be 0 or 1")
        elif self.kind == "continuous":
            if values.min() < 0 or values.max() > 100:
                raise ValueError("continuous field values must lie in [0, 100]")
        else:
            raise ValueError(f"unknown field kind {self.kind!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()


def _bump_field(geometry: GridGeometry, radius_range, rng: np.random.Generator) -> np.ndarray:
    """Sum of randomly placed isotropic Gaussian bumps, unscaled."""
    lo, hi = radius_range
    base = geometry.n_cells / 50.0
    n_bumps = max(1, int(round(base * rng.uniform(0.5, 1.5))))
    cx = geometry.origin[0] + rng.uniform(0.0, geometry.width, n_bumps)
    cy = geometry.origin[1] + rng.uniform(0.0, geometry.height, n_bumps)
    radii = rng.uniform(lo, hi, n_bumps)
    amps = rng.uniform(0.0, 1.0, n_bumps)
    pts = geometry.centers()
    out = np.zeros(geometry.n_cells)
    for x, y, r, a in zip(cx, cy, radii, amps):
        d2 = (pts[:, 0] - x) ** 2 + (pts[:, 1] - y) ** 2
        out += a * np.exp(-0.5 * d2 / r**2)
    return out.reshape(geometry.shape)


def _rescale(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    vmin, vmax = values.min(), values.max()
    if vmax - vmin <= 0 or hi == lo:
        return np.full_like(values, lo, dtype=float)
    out = lo + (values - vmin) / (vmax - vmin) * (hi - lo)
    # pin the extremes exactly; the affine map can be off by one ulp
    out[values == vmin] = lo
    out[values == vmax] = hi
    return out


def generate_gaussian_field(
    geometry: GridGeometry,
    cluster_radius_range=(1.0, 3.0),
    value_range=(0.0, 100.0),
    seed: int = 0,
) -> GroundTruthField:
    """Smooth random terrain built from Gaussian clusters.

    The number of clusters is drawn around ``n_cells / 50`` (+-50 %), each with
    a radius from `cluster_radius_range`. The sum is rescaled so its minimum
    and maximum equal the bounds of `value_range` exactly.
    """
    r_lo, r_hi = cluster_radius_range
    if not (r_lo > 0 and r_hi >= r_lo):
        raise ValueError(f"invalid cluster radius range {cluster_radius_range}")
    v_lo, v_hi = value_range
    if not (0.0 <= v_lo <= v_hi <= 100.0):
        raise ValueError(f"value range {value_range} must lie within [0, 100]")
    rng = np.random.default_rng(seed)
    raw = _bump_field(geometry, (r_lo, r_hi), rng)
    return GroundTruthField(geometry, _rescale(raw, v_lo, v_hi), seed=seed)


def generate_split_field(
    geometry: GridGeometry,
    threshold: float = 40.0,
    seed: int = 0,
    cluster_radius_range=(1.0, 3.0),
) -> GroundTruthField:
    """Field split along x into an uninteresting and an interesting half.

    Columns ``[0, cols // 2)`` hold values below `threshold` (rescaled into
    ``[0, 0.999 * threshold]``); the remaining columns, which receive the extra
    column when ``cols`` is odd, hold values in ``[threshold, 100]``. With
    ``threshold <= 0`` the low half collapses to 0, which still satisfies
    ``value >= threshold``.
    """
    if not 0.0 <= threshold <= 100.0:
        raise ValueError(f"threshold must lie in [0, 100], got {threshold}")
    rng = np.random.default_rng(seed)
    raw = _bump_field(geometry, cluster_radius_range, rng)
    split = geometry.cols // 2
    values = np.empty(geometry.shape)
    values[:, :split] = _rescale(raw[:, :split], 0.0, 0.999 * threshold) if split else 0.0
    values[:, split:] = _rescale(raw[:, split:], threshold, 100.0)
    return GroundTruthField(geometry, values, seed=seed, meta={"split_column": split})


def generate_binary_field(
    geometry: GridGeometry,
    occupancy_fraction: float = 0.3,
    seed: int = 0,
    cluster_radius_range=(1.0, 3.0),
) -> GroundTruthField:
    """Blob-shaped occupancy raster with a prescribed occupied share.

    A smooth random field is thresholded at its ``1 - occupancy_fraction``
    quantile, so occupied cells form connected blobs.
    """
    if not 0.0 <= occupancy_fraction <= 1.0:
        raise ValueError(f"occupancy fraction must lie in [0, 1], got {occupancy_fraction}")
    n = geometry.n_cells
    n_occ = int(round(occupancy_fraction * n))
    values = np.zeros(n)
    if n_occ > 0:
        rng = np.random.default_rng(seed)
        raw = _bump_field(geometry, cluster_radius_range, rng).ravel()
        # stable ranking keeps ties deterministic
        order = np.argsort(-raw, kind="stable")
        values[order[:n_occ]] = 1.0
    return GroundTruthField(geometry, values.reshape(geometry.shape), seed=seed, kind="binary")


def save_field_csv(truth: GroundTruthField, path) -> None:
    """Write one CSV row per grid row, with the geometry in a comment header."""
    g = truth.geometry
    header = (
        f"width={g.width!r},height={g.height!r},resolution={g.resolution!r},"
        f"origin_x={g.origin[0]!r},origin_y={g.origin[1]!r},"
        f"seed={truth.seed},kind={truth.kind}"
    )
    np.savetxt(Path(path), truth.values, delimiter=",", fmt="%.17g", header=header)


def load_field_csv(path) -> GroundTruthField:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise ValueError(f"{path}: missing geometry header")
    meta = dict(item.split("=", 1) for item in first[1:].strip().split(","))
    geometry = GridGeometry(
        width=float(meta["width"]),
        height=float(meta["height"]),
        resolution=float(meta["resolution"]),
        origin=(float(meta["origin_x"]), float(meta["origin_y"])),
    )
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    seed = None if meta.get("seed", "None") == "None" else int(meta["seed"])
    return GroundTruthField(geometry, values, seed=seed, kind=meta.get("kind", "continuous"))
