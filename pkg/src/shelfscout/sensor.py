"""Synthetic pinhole depth camera.

A viewpoint is a 5D pose (x, y, z, pitch, yaw) in the shelf frame; roll is
fixed at zero.  At pitch = yaw = 0 the optical axis points along +x (into
the shelf), +y is to the camera's left and +z is up.  Positive pitch looks
up, positive yaw turns toward +y.

Depth images store the Euclidean range along each pixel ray (not the z
coordinate); pixels with no surface inside [min_range, max_range] hold the
``inf`` sentinel.  Rendering intersects every pixel ray against the shelf
slabs (board, back panel, side walls, top) and all object primitives in
closed form, so it is exact and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .scene import SceneState, Shape, ShelfSpec

NO_RETURN = math.inf


class InvalidPoseError(ValueError):
    """Requested camera pose lies outside the reachable workspace."""


@dataclass(frozen=True)
class CameraPose:
    x: float
    y: float
    z: float
    pitch: float
    yaw: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.pitch, self.yaw])

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class CameraIntrinsics:
    """Close-range depth camera model (D405-like stand-in).

    The default 160x120 resolution keeps single-view returns on the board
    denser than the 1 cm map cells even at grazing angles; coarser images
    leave far board rows under-sampled and stall the free-space evidence.
    """

    width: int = 160
    height: int = 120
    vertical_fov: float = math.radians(58.0)
    min_range: float = 0.07
    max_range: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.vertical_fov < math.pi:
            raise ValueError("vertical_fov must be in (0, pi)")
        if not 0.0 <= self.min_range < self.max_range:
            raise ValueError("need 0 <= min_range < max_range")

    @property
    def focal_px(self) -> float:
        return (self.height / 2.0) / math.tan(self.vertical_fov / 2.0)

    @property
    def horizontal_fov(self) -> float:
        return 2.0 * math.atan((self.width / 2.0) / self.focal_px)


DEFAULT_INTRINSICS = CameraIntrinsics()


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned reachable box in front of the shelf plus angle limits.

    Bounds are closed: poses exactly on a face are valid.
    """

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    z_range: tuple[float, float]
    pitch_range: tuple[float, float] = (math.radians(-45.0), math.radians(30.0))
    yaw_range: tuple[float, float] = (math.radians(-60.0), math.radians(60.0))

    @staticmethod
    def for_shelf(
        shelf: ShelfSpec,
        standoff: float = 0.45,
        inside_overlap: float = 0.05,
        side_margin: float = 0.10,
        top_margin: float = 0.10,
    ) -> "Workspace":
        return Workspace(
            x_range=(shelf.front_x - standoff, shelf.front_x + inside_overlap),
            y_range=(-side_margin, shelf.width_m + side_margin),
            z_range=(shelf.board_z_m, shelf.top_z + top_margin),
        )

    def center_pose(self) -> CameraPose:
        return CameraPose(
            x=(self.x_range[0] + self.x_range[1]) / 2,
            y=(self.y_range[0] + self.y_range[1]) / 2,
            z=(self.z_range[0] + self.z_range[1]) / 2,
            pitch=0.0,
            yaw=0.0,
        )

    def sample_pose(self, rng: np.random.Generator) -> CameraPose:
        return CameraPose(
            x=rng.uniform(*self.x_range),
            y=rng.uniform(*self.y_range),
            z=rng.uniform(*self.z_range),
            pitch=rng.uniform(*self.pitch_range),
            yaw=rng.uniform(*self.yaw_range),
        )


def pose_valid(pose: CameraPose, ws: Workspace) -> bool:
    return (
        ws.x_range[0] <= pose.x <= ws.x_range[1]
        and ws.y_range[0] <= pose.y <= ws.y_range[1]
        and ws.z_range[0] <= pose.z <= ws.z_range[1]
        and ws.pitch_range[0] <= pose.pitch <= ws.pitch_range[1]
        and ws.yaw_range[0] <= pose.yaw <= ws.yaw_range[1]
    )


def camera_rotation(pose: CameraPose) -> np.ndarray:
    """Camera-to-shelf rotation; columns are (right, down, forward)."""
    cp, sp = math.cos(pose.pitch), math.sin(pose.pitch)
    cy, sy = math.cos(pose.yaw), math.sin(pose.yaw)
    forward = np.array([cp * cy, cp * sy, sp])
    right = np.array([sy, -cy, 0.0])
    down = np.cross(forward, right)
    return np.column_stack([right, down, forward])


@lru_cache(maxsize=8)
def _ray_grid(width: int, height: int, vertical_fov: float) -> np.ndarray:
    """Unit ray directions in the camera frame, row-major (H*W, 3)."""
    f = (height / 2.0) / math.tan(vertical_fov / 2.0)
    u = (np.arange(width) + 0.5) - width / 2.0
    v = (np.arange(height) + 0.5) - height / 2.0
    uu, vv = np.meshgrid(u, v)
    dirs = np.stack([uu / f, vv / f, np.ones_like(uu)], axis=-1).reshape(-1, 3)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs.setflags(write=False)
    return dirs


@dataclass(frozen=True)
class DepthImage:
    """Range image in meters; ``inf`` marks pixels with no usable return."""

    values: np.ndarray
    intrinsics: CameraIntrinsics

    @property
    def finite_mask(self) -> np.ndarray:
        return np.isfinite(self.values)


def shelf_slabs(shelf: ShelfSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Solid axis-aligned slabs of the shelf (board, back, sides, top)."""
    t = shelf.wall_thickness_m
    d, w = shelf.depth_m, shelf.width_m
    z0, z1 = shelf.board_z_m, shelf.top_z
    boxes = [
        ((0.0, -t, z0 - t), (d + t, w + t, z0)),          # board
        ((d, -t, z0 - t), (d + t, w + t, z1 + t)),        # back panel
        ((0.0, -t, z0 - t), (d + t, 0.0, z1 + t)),        # left wall
        ((0.0, w, z0 - t), (d + t, w + t, z1 + t)),       # right wall
        ((0.0, -t, z1), (d + t, w + t, z1 + t)),          # top board
    ]
    return [(np.array(lo), np.array(hi)) for lo, hi in boxes]


def _ray_aabb_batch(origin: np.ndarray, dirs: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """First-hit distances of N rays against K axis-aligned boxes -> (N,).

    ``lo``/``hi`` are (K, 3).  Rays starting inside a box hit at t = 0.
    """
    n = dirs.shape[0]
    per_box_near = np.full((n, lo.shape[0]), -np.inf)
    per_box_far = np.full((n, lo.shape[0]), np.inf)
    for k in range(3):
        d = dirs[:, k : k + 1]
        o = origin[k]
        inv = np.where(d != 0.0, 1.0 / np.where(d != 0.0, d, 1.0), np.inf)
        t1 = (lo[None, :, k] - o) * inv
        t2 = (hi[None, :, k] - o) * inv
        lo_k = np.minimum(t1, t2)
        hi_k = np.maximum(t1, t2)
        parallel = d == 0.0
        if parallel.any():
            inside_axis = (lo[None, :, k] <= o) & (o <= hi[None, :, k])
            lo_k = np.where(parallel, np.where(inside_axis, -np.inf, np.inf), lo_k)
            hi_k = np.where(parallel, np.where(inside_axis, np.inf, -np.inf), hi_k)
        per_box_near = np.maximum(per_box_near, lo_k)
        per_box_far = np.minimum(per_box_far, hi_k)
    # Strict comparison drops zero-chord grazes along edges and corners.
    hit = (per_box_near < per_box_far) & (per_box_far > 0.0)
    t = np.where(hit, np.maximum(per_box_near, 0.0), np.inf)
    return t.min(axis=1)


def _ray_boxes(origin, dirs, boxes, board_z) -> np.ndarray:
    """First hits against yawed boxes: per-object local frame, then slab test."""
    n = dirs.shape[0]
    best = np.full(n, np.inf)
    for obj in boxes:
        dx, dy, dz = obj.dims
        c, s = math.cos(obj.yaw), math.sin(obj.yaw)
        ox = c * (origin[0] - obj.x) + s * (origin[1] - obj.y)
        oy = -s * (origin[0] - obj.x) + c * (origin[1] - obj.y)
        dlx = c * dirs[:, 0] + s * dirs[:, 1]
        dly = -s * dirs[:, 0] + c * dirs[:, 1]
        t_near = np.full(n, -np.inf)
        t_far = np.full(n, np.inf)
        for o, d, lo_v, hi_v in (
            (ox, dlx, -dx / 2, dx / 2),
            (oy, dly, -dy / 2, dy / 2),
            (origin[2], dirs[:, 2], board_z, board_z + dz),
        ):
            with np.errstate(divide="ignore"):
                inv = np.where(d != 0.0, 1.0 / np.where(d != 0.0, d, 1.0), np.inf)
            t1 = (lo_v - o) * inv
            t2 = (hi_v - o) * inv
            lo_k = np.minimum(t1, t2)
            hi_k = np.maximum(t1, t2)
            parallel = d == 0.0
            if parallel.any():
                inside_axis = (lo_v <= o) & (o <= hi_v)
                lo_k = np.where(parallel, np.where(inside_axis, -np.inf, np.inf), lo_k)
                hi_k = np.where(parallel, np.where(inside_axis, np.inf, -np.inf), hi_k)
            t_near = np.maximum(t_near, lo_k)
            t_far = np.minimum(t_far, hi_k)
        hit = (t_near < t_far) & (t_far > 0.0)
        best = np.minimum(best, np.where(hit, np.maximum(t_near, 0.0), np.inf))
    return best


def _ray_cylinders(origin, dirs, cyls, board_z) -> np.ndarray:
    """First hits against all upright cylinders -> (N,).

    The quadratic is solved only on the few rays whose infinite-cylinder
    discriminant is nonnegative; only the near lateral root matters for
    cameras outside the solid, and the caps handle rays entering through
    the top or bottom disc.
    """
    n = dirs.shape[0]
    best = np.full(n, np.inf)
    dx_all, dy_all, dz_all = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    a_all = dx_all * dx_all + dy_all * dy_all
    for obj in cyls:
        r, h = obj.dims
        ox, oy = origin[0] - obj.x, origin[1] - obj.y
        oz = origin[2]
        z0, z1 = board_z, board_z + h
        b = ox * dx_all + oy * dy_all
        c = ox * ox + oy * oy - r * r
        disc = b * b - a_all * c
        # Approaching laterally (b < 0) or already over the disc (c < 0);
        # receding rays that start outside can only intersect at t < 0, and
        # zero-discriminant grazes have zero chord.
        cand = np.flatnonzero((disc > 0.0) & ((b < 0.0) | (c < 0.0)))
        if cand.size == 0:
            continue
        a = a_all[cand]
        good = a > 0.0
        t = np.full(cand.size, np.inf)
        t[good] = (-b[cand][good] - np.sqrt(disc[cand][good])) / a[good]
        z = oz + t * dz_all[cand]
        t_side = np.where((t >= 0.0) & (z >= z0) & (z <= z1), t, np.inf)
        t_cyl = t_side
        dz = dz_all[cand]
        for z_cap in (z0, z1):
            with np.errstate(divide="ignore"):
                tc = np.where(dz != 0.0, (z_cap - oz) / np.where(dz != 0.0, dz, 1.0), np.inf)
            px = ox + tc * dx_all[cand]
            py = oy + tc * dy_all[cand]
            inside = (tc >= 0.0) & np.isfinite(tc) & (px * px + py * py <= r * r)
            t_cyl = np.minimum(t_cyl, np.where(inside, tc, np.inf))
        best[cand] = np.minimum(best[cand], t_cyl)
    return best


_SLAB_CACHE: dict[tuple, np.ndarray] = {}
_SLAB_CACHE_MAX = 64


def _static_shelf_depth(shelf, pose, intr, origin, dirs) -> np.ndarray:
    """Slab-only first hits, cached: candidate scoring and the survey views
    re-render the same poses over and over with only the objects moving."""
    key = (shelf, pose, intr.width, intr.height, intr.vertical_fov)
    cached = _SLAB_CACHE.get(key)
    if cached is None:
        slabs = shelf_slabs(shelf)
        lo = np.array([s[0] for s in slabs])
        hi = np.array([s[1] for s in slabs])
        cached = _ray_aabb_batch(origin, dirs, lo, hi)
        cached.setflags(write=False)
        if len(_SLAB_CACHE) >= _SLAB_CACHE_MAX:
            _SLAB_CACHE.pop(next(iter(_SLAB_CACHE)))
        _SLAB_CACHE[key] = cached
    return cached


def render_depth(
    scene: SceneState,
    pose: CameraPose,
    intr: CameraIntrinsics = DEFAULT_INTRINSICS,
    ws: Workspace | None = None,
) -> DepthImage:
    """Ray-cast the scene from a camera pose into a range image.

    ``ws`` defaults to the standard workspace derived from the scene's
    shelf; an out-of-workspace pose raises ``InvalidPoseError``.
    """
    if ws is None:
        ws = Workspace.for_shelf(scene.shelf)
    if not pose_valid(pose, ws):
        raise InvalidPoseError(f"pose {pose} outside workspace")
    origin = pose.position
    dirs = _ray_grid(intr.width, intr.height, intr.vertical_fov) @ camera_rotation(pose).T
    t = _static_shelf_depth(scene.shelf, pose, intr, origin, dirs).copy()
    boxes = [o for o in scene.objects if o.shape is Shape.BOX]
    cyls = [o for o in scene.objects if o.shape is Shape.CYLINDER]
    if boxes:
        t = np.minimum(t, _ray_boxes(origin, dirs, boxes, scene.shelf.board_z_m))
    if cyls:
        t = np.minimum(t, _ray_cylinders(origin, dirs, cyls, scene.shelf.board_z_m))
    t = np.where((t >= intr.min_range) & (t <= intr.max_range), t, np.inf)
    return DepthImage(values=t.reshape(intr.height, intr.width), intrinsics=intr)


def depth_to_pointcloud(
    img: DepthImage,
    pose: CameraPose,
    intr: CameraIntrinsics | None = None,
) -> np.ndarray:
    """Back-project finite pixels into shelf-frame 3D points (N, 3).

    Points come out in row-major pixel order, one per finite pixel.
    """
    intr = intr or img.intrinsics
    if (intr.width, intr.height) != (img.intrinsics.width, img.intrinsics.height):
        raise ValueError("intrinsics do not match the rendered image")
    ranges = img.values.reshape(-1)
    finite = np.isfinite(ranges)
    if not finite.any():
        return np.empty((0, 3))
    dirs = _ray_grid(intr.width, intr.height, intr.vertical_fov) @ camera_rotation(pose).T
    return pose.position + dirs[finite] * ranges[finite, None]


def survey_poses(shelf: ShelfSpec, ws: Workspace | None = None) -> list[CameraPose]:
    """The three fixed initial viewpoints used to seed every episode.

    One pose looks down onto the board from high mid-front, and one pose
    sits just outside each front corner above the opening, looking
    diagonally toward the opposite back corner.  The steep angles keep the
    board returns denser than the map cells, which coverage needs because
    free classification takes several returns per cell.  Returned order:
    [center, left, right].
    """
    ws = ws or Workspace.for_shelf(shelf)
    d, w = shelf.depth_m, shelf.width_m
    zb = shelf.board_z_m

    cx = max(shelf.front_x - 0.30, ws.x_range[0])
    cz = min(zb + 1.175 * shelf.height_m, ws.z_range[1] - 0.03)
    center = CameraPose(cx, w / 2, cz, pitch=math.atan2(zb - cz, d / 2 - cx), yaw=0.0)

    corner_x = shelf.front_x - 0.05
    corner_z = min(shelf.top_z + 0.03, ws.z_range[1])
    corner_pitch = math.radians(-42.0)
    left_yaw = min(math.atan2(w - 0.0, d - corner_x), ws.yaw_range[1])
    right_yaw = -left_yaw
    left = CameraPose(corner_x, 0.0, corner_z, corner_pitch, left_yaw)
    right = CameraPose(corner_x, w, corner_z, corner_pitch, right_yaw)

    def clamp(p: CameraPose) -> CameraPose:
        return CameraPose(
            x=min(max(p.x, ws.x_range[0]), ws.x_range[1]),
            y=min(max(p.y, ws.y_range[0]), ws.y_range[1]),
            z=min(max(p.z, ws.z_range[0]), ws.z_range[1]),
            pitch=min(max(p.pitch, ws.pitch_range[0]), ws.pitch_range[1]),
            yaw=min(max(p.yaw, ws.yaw_range[0]), ws.yaw_range[1]),
        )

    return [clamp(center), clamp(left), clamp(right)]


def write_depth_pgm(img: DepthImage, path) -> None:
    """Export a depth image as 16-bit PGM in millimeters (0 = no return)."""
    from .pgmio import write_pgm

    mm = np.where(np.isfinite(img.values), np.round(img.values * 1000.0), 0.0)
    write_pgm(path, np.clip(mm, 0, 65535).astype(np.uint16))


def write_pointcloud_xyz(points: np.ndarray, path) -> None:
    """Export a point cloud as ASCII XYZ, one point per line."""
    lines = [f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f}" for p in np.asarray(points)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
