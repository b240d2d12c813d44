"""2.5D occupancy height map over the shelf board.

Each cell of the top-down grid holds an occupancy log-odds value, the
maximum height ever measured in that cell, and an observed flag.  Cells are
classified by probability p:

    occupied   p > 0.5 + unknown_margin
    free       p < 0.5 - unknown_margin
    unknown    otherwise (including never-observed cells at p = 0.5)

Evidence accumulation is additive in log-odds space and clamped.  Points
above the occupied-height threshold add hit evidence, returns at board
level add free evidence.  There is no free-space carving along rays: a
plain 2.5D grid cannot represent "free above, unknown below", so only
actual board returns count as free evidence.  Within one ``integrate`` call
per-cell evidence is summed before clamping, which makes the result
invariant to the ordering of the input points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .scene import ShelfSpec
from .sensor import CameraIntrinsics, CameraPose


class CellState(IntEnum):
    UNKNOWN = 0
    OCCUPIED = 1
    FREE = 2


@dataclass(frozen=True)
class MapParams:
    cell_size: float = 0.01
    unknown_margin: float = 0.2           # probability band around 0.5 kept "unknown"
    log_odds_hit: float = 0.85            # p ~ 0.70 per hit
    log_odds_miss: float = -0.4           # p ~ 0.40 per board return
    log_odds_clamp: float = 3.5
    occupied_height: float = 0.015        # heights above board below this count as board returns

    def __post_init__(self):
        if not 0.0 < self.unknown_margin < 0.5:
            raise ValueError("unknown_margin must lie in (0, 0.5)")
        if self.log_odds_clamp <= 0.0:
            raise ValueError("log_odds_clamp must be positive (bounds are symmetric)")

    @property
    def occupied_log_odds(self) -> float:
        p = 0.5 + self.unknown_margin
        return math.log(p / (1.0 - p))

    @property
    def free_log_odds(self) -> float:
        return -self.occupied_log_odds


DEFAULT_MAP_PARAMS = MapParams()

_INSET = 1e-6  # strips returns lying exactly on wall/ceiling faces


@dataclass
class HeightMap:
    """Grid over the shelf footprint; rows follow depth (x), columns width (y)."""

    nx: int
    ny: int
    cell_size: float
    board_z: float
    interior_height: float
    params: MapParams = field(default_factory=MapParams)
    log_odds: np.ndarray = None
    height: np.ndarray = None
    observed: np.ndarray = None

    def __post_init__(self):
        if self.log_odds is None:
            self.log_odds = np.zeros((self.nx, self.ny))
        if self.height is None:
            self.height = np.zeros((self.nx, self.ny))
        if self.observed is None:
            self.observed = np.zeros((self.nx, self.ny), dtype=bool)

    @staticmethod
    def for_shelf(shelf: ShelfSpec, params: MapParams = DEFAULT_MAP_PARAMS) -> "HeightMap":
        nx = round(shelf.depth_m / params.cell_size)
        ny = round(shelf.width_m / params.cell_size)
        if abs(nx * params.cell_size - shelf.depth_m) > 1e-9 or abs(ny * params.cell_size - shelf.width_m) > 1e-9:
            raise ValueError("cell size must divide the shelf extents")
        return HeightMap(
            nx=nx,
            ny=ny,
            cell_size=params.cell_size,
            board_z=shelf.board_z_m,
            interior_height=shelf.height_m,
            params=params,
        )

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def copy(self) -> "HeightMap":
        return HeightMap(
            nx=self.nx,
            ny=self.ny,
            cell_size=self.cell_size,
            board_z=self.board_z,
            interior_height=self.interior_height,
            params=self.params,
            log_odds=self.log_odds.copy(),
            height=self.height.copy(),
            observed=self.observed.copy(),
        )

    def probabilities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.log_odds))

    def states(self) -> np.ndarray:
        out = np.full((self.nx, self.ny), CellState.UNKNOWN, dtype=np.int8)
        out[self.log_odds > self.params.occupied_log_odds] = CellState.OCCUPIED
        out[self.log_odds < self.params.free_log_odds] = CellState.FREE
        return out

    def unknown_count(self) -> int:
        occ = int((self.log_odds > self.params.occupied_log_odds).sum())
        free = int((self.log_odds < self.params.free_log_odds).sum())
        return self.n_cells - occ - free

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = (np.arange(self.nx) + 0.5) * self.cell_size
        ys = (np.arange(self.ny) + 0.5) * self.cell_size
        return xs, ys


def classify_probability(p: float, params: MapParams = DEFAULT_MAP_PARAMS) -> CellState:
    """Classify one occupancy probability; inequalities are strict."""
    if p > 0.5 + params.unknown_margin:
        return CellState.OCCUPIED
    if p < 0.5 - params.unknown_margin:
        return CellState.FREE
    return CellState.UNKNOWN


def integrate(
    hmap: HeightMap,
    cloud: np.ndarray,
    pose: CameraPose | None = None,
    intr: CameraIntrinsics | None = None,
    params: MapParams | None = None,
) -> HeightMap:
    """Fold a point cloud into the map (in place) and return the map.

    Points landing on wall, back-panel or ceiling faces, or outside the
    board footprint, are discarded.  Remaining points update their (x, y)
    cell: hit evidence above the occupied-height threshold, free evidence at
    board level.  The height channel keeps the per-cell maximum.  ``pose``
    and ``intr`` identify the observation for interface symmetry with the
    renderer; the update itself only needs the points.
    """
    del pose, intr
    p = params or hmap.params
    pts = np.asarray(cloud)
    if pts.size == 0:
        return hmap
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    rel_z = z - hmap.board_z
    depth = hmap.nx * hmap.cell_size
    width = hmap.ny * hmap.cell_size
    keep = (
        (x >= _INSET)
        & (x <= depth - _INSET)
        & (y >= _INSET)
        & (y <= width - _INSET)
        & (rel_z >= -_INSET)
        & (rel_z <= hmap.interior_height - _INSET)
    )
    if not keep.any():
        return hmap
    x, y, rel_z = x[keep], y[keep], rel_z[keep]
    ix = np.minimum((x / hmap.cell_size).astype(np.intp), hmap.nx - 1)
    iy = np.minimum((y / hmap.cell_size).astype(np.intp), hmap.ny - 1)
    flat = ix * hmap.ny + iy

    hits = rel_z > p.occupied_height
    n = hmap.n_cells
    delta = np.bincount(flat[hits], minlength=n) * p.log_odds_hit
    delta += np.bincount(flat[~hits], minlength=n) * p.log_odds_miss

    lo = hmap.log_odds.ravel()
    lo += delta
    np.clip(lo, -p.log_odds_clamp, p.log_odds_clamp, out=lo)

    np.maximum.at(hmap.height.ravel(), flat, rel_z)
    hmap.observed.ravel()[flat] = True
    return hmap


def entropy(hmap: HeightMap, params: MapParams | None = None) -> float:
    """Fraction of unknown cells, in [0, 1]."""
    if params is not None and params is not hmap.params:
        occ = int((hmap.log_odds > params.occupied_log_odds).sum())
        free = int((hmap.log_odds < params.free_log_odds).sum())
        return (hmap.n_cells - occ - free) / hmap.n_cells
    return hmap.unknown_count() / hmap.n_cells


def information_gain(unknown_prev: int, unknown_now: int) -> float:
    """Fractional decrease of unknown cells between two map states.

    Zero by convention when there was nothing unknown before; clamped at -1
    when the unknown count grows (possible after a push invalidates old
    evidence).
    """
    if unknown_prev < 0:
        raise ValueError("unknown_prev must be >= 0")
    if unknown_prev == 0:
        return 0.0
    return max((unknown_prev - unknown_now) / unknown_prev, -1.0)


def motion_cost(p_prev: CameraPose, p_now: CameraPose) -> float:
    """Euclidean distance between viewpoint positions; angles do not count."""
    return math.hypot(p_now.x - p_prev.x, p_now.y - p_prev.y, p_now.z - p_prev.z)


def largest_unknown_center(hmap: HeightMap) -> tuple[np.ndarray, int]:
    """Centroid of the largest 4-connected unknown region plus its cell count.

    Ties go to the component first encountered in row-major order.  The z
    coordinate is mid-height of the shelf interior.  With no unknown cells
    the map center is returned with area 0.
    """
    from scipy import ndimage

    z = hmap.board_z + hmap.interior_height / 2.0
    unknown = hmap.states() == CellState.UNKNOWN
    if not unknown.any():
        center = np.array([hmap.nx * hmap.cell_size / 2.0, hmap.ny * hmap.cell_size / 2.0, z])
        return center, 0
    labels, n_labels = ndimage.label(unknown)
    sizes = np.bincount(labels.ravel())[1:]
    best = int(np.argmax(sizes)) + 1  # argmax takes the first maximum: lowest label wins ties
    ii, jj = np.nonzero(labels == best)
    cx = (ii.mean() + 0.5) * hmap.cell_size
    cy = (jj.mean() + 0.5) * hmap.cell_size
    return np.array([cx, cy, z]), int(sizes[best - 1])


N_POOLED_FEATURES = 32
_POOL_BLOCKS = (4, 8)


def pooled_features(hmap: HeightMap) -> np.ndarray:
    """Occupancy probability averaged over a fixed 4 x 8 block partition.

    This is the compact 32-value map summary used in observations; blocks
    are laid out row-major (depth-major).
    """
    probs = hmap.probabilities()
    bx, by = _POOL_BLOCKS
    rows = np.array_split(probs, bx, axis=0)
    out = np.empty((bx, by))
    for i, row in enumerate(rows):
        for j, block in enumerate(np.array_split(row, by, axis=1)):
            out[i, j] = block.mean()
    return out.reshape(-1)


def write_map_snapshots(hmap: HeightMap, prefix) -> list[str]:
    """Export occupancy and height channels, each as 8-bit PGM and CSV."""
    from .pgmio import write_pgm

    written = []
    probs = hmap.probabilities()
    heights = np.where(hmap.observed, hmap.height, 0.0)
    h_scale = hmap.interior_height if hmap.interior_height > 0 else 1.0
    for name, data, scale in (("occupancy", probs, 1.0), ("height", heights, h_scale)):
        img = np.clip(np.round(data / scale * 255.0), 0, 255).astype(np.uint8)
        pgm_path = f"{prefix}_{name}.pgm"
        csv_path = f"{prefix}_{name}.csv"
        write_pgm(pgm_path, img)
        np.savetxt(csv_path, data, fmt="%.6f", delimiter=",")
        written += [pgm_path, csv_path]
    return written
