"""Non-prehensile push machinery.

Candidates come from ray casting across the believed occupancy grid: three
origins in front of the shelf each sweep a fan of rays toward the back, and
the first occupied cell along every ray becomes a contact point.  Each
contact spawns one candidate per push angle (8 directions at 45 degree
spacing) with a configured push length.

Execution is quasi-static and translation-only: the contacted object moves
along the push direction, objects in its way are carried along by exactly
the residual overlap (recursively), side and back walls stop the chain, and
an object whose center leaves the open front edge drops out of the scene.
All contact arithmetic is closed-form, so outcomes are exact and
deterministic.

Scoring replaces a learned push-quality predictor with a rollout oracle: it
executes the push on clones, re-observes from the fixed front-center survey
view, and trades revealed cells against displacement and drops.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .geometry import directional_contact, distance_to, overlap, wall_travel
from .mapping import CellState, HeightMap, entropy, integrate
from .scene import SceneState, Shape, ShelfSpec
from .sensor import (
    DEFAULT_INTRINSICS,
    CameraIntrinsics,
    CameraPose,
    _ray_boxes,
    _ray_cylinders,
    _ray_grid,
    _static_shelf_depth,
    camera_rotation,
    render_depth,
    survey_poses,
)

N_PUSH_ANGLES = 8
PUSH_ANGLES = tuple(k * math.pi / 4.0 for k in range(N_PUSH_ANGLES))
SUPPORTED_PUSH_LENGTHS = (0.02, 0.05, 0.07, 0.10)


@dataclass(frozen=True)
class PushCandidate:
    """A push: 3D start point, one of 8 directions, and a length."""

    start: tuple[float, float, float]
    direction_index: int
    length: float = 0.05
    source_cell: tuple[int, int] | None = None

    def __post_init__(self):
        if not 0 <= self.direction_index < N_PUSH_ANGLES:
            raise ValueError("direction_index must be in [0, 8)")
        if self.length <= 0:
            raise ValueError("push length must be positive")

    @property
    def angle(self) -> float:
        return PUSH_ANGLES[self.direction_index]

    @property
    def direction(self) -> tuple[float, float]:
        return (math.cos(self.angle), math.sin(self.angle))


@dataclass(frozen=True)
class PushSamplingConfig:
    """Ray-cast geometry for candidate generation.

    Origins sit ``origin_standoff`` in front of the open face at board
    height, at three width fractions; each casts ``rays_per_origin`` rays
    to evenly spaced targets across the shelf back.
    """

    origin_standoff: float = 0.15
    origin_width_fractions: tuple[float, float, float] = (0.1, 0.5, 0.9)
    rays_per_origin: int = 25
    max_contact_z: float = 0.10          # gripper reach cap for the contact height
    max_candidates: int | None = 128     # evenly thinned when exceeded


DEFAULT_SAMPLING = PushSamplingConfig()


@dataclass
class PushMap:
    """Height-map crop recentered on the push start, push direction along +x.

    Out-of-bounds source cells are filled as unknown (p = 0.5, height 0,
    known 0).  ``known`` holds the bilinearly resampled observed mask.
    """

    probability: np.ndarray
    height: np.ndarray
    known: np.ndarray
    cell_size: float
    candidate: PushCandidate


@dataclass
class PushOutcome:
    displacements: dict[int, float]
    drops: tuple[int, ...]
    wall_contact: bool
    contacted_id: int | None
    scene_after: SceneState
    delta_entropy: float | None = None

    @property
    def total_displacement(self) -> float:
        return sum(self.displacements.values())


def _grid_first_occupied(occupied: np.ndarray, cell: float, origin, target):
    """2D DDA from origin to target; returns the first occupied cell or None."""
    nx, ny = occupied.shape
    ox, oy = origin
    tx, ty = target
    dx, dy = tx - ox, ty - oy
    # Clip the segment to the grid bounds (Liang-Barsky).
    t0, t1 = 0.0, 1.0
    for delta, lo_gap, hi_gap in ((dx, -ox, nx * cell - ox), (dy, -oy, ny * cell - oy)):
        if abs(delta) < 1e-15:
            if lo_gap > 0 or hi_gap < 0:
                return None
            continue
        ta, tb = lo_gap / delta, hi_gap / delta
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return None
    px, py = ox + t0 * dx, oy + t0 * dy
    ix = min(max(int(px / cell), 0), nx - 1)
    iy = min(max(int(py / cell), 0), ny - 1)
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    t_max_x = ((ix + (step_x > 0)) * cell - px) / dx if dx != 0 else math.inf
    t_max_y = ((iy + (step_y > 0)) * cell - py) / dy if dy != 0 else math.inf
    t_delta_x = abs(cell / dx) if dx != 0 else math.inf
    t_delta_y = abs(cell / dy) if dy != 0 else math.inf
    remaining = t1 - t0
    t_acc = 0.0
    while 0 <= ix < nx and 0 <= iy < ny and t_acc <= remaining:
        if occupied[ix, iy]:
            return (ix, iy)
        if t_max_x < t_max_y:
            t_acc = t_max_x
            t_max_x += t_delta_x
            ix += step_x
        else:
            t_acc = t_max_y
            t_max_y += t_delta_y
            iy += step_y
    return None


def sample_candidates(
    hmap: HeightMap,
    shelf: ShelfSpec,
    config: PushSamplingConfig = DEFAULT_SAMPLING,
    length: float = 0.05,
) -> list[PushCandidate]:
    """Generate push candidates from the current believed map.

    Duplicate contact cells are merged; each distinct contact yields one
    candidate per push angle, in deterministic (origin, ray, angle) order.
    """
    occupied = hmap.states() == CellState.OCCUPIED
    if not occupied.any():
        return []
    cell = hmap.cell_size
    depth, width = shelf.depth_m, shelf.width_m
    contacts: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    targets_y = np.linspace(0.0, width, config.rays_per_origin)
    for frac in config.origin_width_fractions:
        origin = (-config.origin_standoff, frac * width)
        for ty in targets_y:
            hit = _grid_first_occupied(occupied, cell, origin, (depth, ty))
            if hit is not None and hit not in seen:
                seen.add(hit)
                contacts.append(hit)
    candidates: list[PushCandidate] = []
    for ix, iy in contacts:
        cx = (ix + 0.5) * cell
        cy = (iy + 0.5) * cell
        contact_z = hmap.board_z + min(hmap.height[ix, iy] / 2.0, config.max_contact_z)
        for k in range(N_PUSH_ANGLES):
            candidates.append(PushCandidate((cx, cy, contact_z), k, length, source_cell=(ix, iy)))
    if config.max_candidates is not None and len(candidates) > config.max_candidates:
        stride = len(candidates) / config.max_candidates
        candidates = [candidates[int(i * stride)] for i in range(config.max_candidates)]
    return candidates


def make_push_map(hmap: HeightMap, cand: PushCandidate, size: int = 64) -> PushMap:
    """Resample the map so the push start sits at the center, direction on +x.

    Bilinear interpolation on the probability, height and observed channels;
    cells sampled outside the source grid read as unknown.
    """
    sx, sy = cand.start[0], cand.start[1]
    depth = hmap.nx * hmap.cell_size
    width = hmap.ny * hmap.cell_size
    if not (0.0 <= sx <= depth and 0.0 <= sy <= width):
        raise ValueError("push start outside the map bounds")
    cell = hmap.cell_size
    half = size // 2
    offsets = (np.arange(size) - half) * cell
    ox, oy = np.meshgrid(offsets, offsets, indexing="ij")
    ca, sa = math.cos(cand.angle), math.sin(cand.angle)
    src_x = sx + ca * ox - sa * oy
    src_y = sy + sa * ox + ca * oy

    gx = src_x / cell - 0.5
    gy = src_y / cell - 0.5
    i0 = np.floor(gx).astype(np.intp)
    j0 = np.floor(gy).astype(np.intp)
    fx = gx - i0
    fy = gy - j0

    prob_src = hmap.probabilities()
    height_src = np.where(hmap.observed, hmap.height, 0.0)
    known_src = hmap.observed.astype(float)

    def bilinear(channel: np.ndarray, fill: float) -> np.ndarray:
        out = np.zeros_like(gx)
        for di, dj, wgt in (
            (0, 0, (1 - fx) * (1 - fy)),
            (1, 0, fx * (1 - fy)),
            (0, 1, (1 - fx) * fy),
            (1, 1, fx * fy),
        ):
            ii = i0 + di
            jj = j0 + dj
            valid = (ii >= 0) & (ii < hmap.nx) & (jj >= 0) & (jj < hmap.ny)
            vals = np.where(valid, channel[np.clip(ii, 0, hmap.nx - 1), np.clip(jj, 0, hmap.ny - 1)], fill)
            out += wgt * vals
        return out

    return PushMap(
        probability=bilinear(prob_src, 0.5),
        height=bilinear(height_src, 0.0),
        known=bilinear(known_src, 0.0),
        cell_size=cell,
        candidate=cand,
    )


def _resolve_chain(scene: SceneState, primary_idx: int, dx: float, dy: float, length: float):
    """Exact displacement of every object in the contact chain.

    ``capacity(i)`` is how far object i can travel along the push direction
    before something definitively blocks it: its own wall clearance, or a
    neighbor's contact distance plus that neighbor's capacity.  The pushed
    object moves min(length, capacity); followers move by the residual
    overlap, resolved by fixed-point relaxation (the relation is a DAG, so
    this converges and is order-independent).
    """
    objs = scene.objects
    fps = [o.footprint() for o in objs]
    n = len(objs)
    shelf = scene.shelf
    contact = {}

    def contact_dist(i: int, j: int) -> float:
        key = (i, j)
        if key not in contact:
            g = directional_contact(fps[i], fps[j], dx, dy)
            if g <= 1e-9:
                # Already touching: it only counts as pushing if moving
                # forward would actually penetrate (not slide along/away).
                probe = 1e-5
                g = 0.0 if overlap(fps[i].translated(dx * probe, dy * probe), fps[j]) else math.inf
            contact[key] = g
        return contact[key]

    wall_caps = [wall_travel(fp, dx, dy, shelf.depth_m, shelf.width_m) for fp in fps]
    capacity: dict[int, float] = {}

    def cap(i: int) -> float:
        if i in capacity:
            return capacity[i]
        capacity[i] = wall_caps[i]  # placeholder guards against cycles (cannot occur for separated convex shapes)
        c = wall_caps[i]
        for j in range(n):
            if j == i:
                continue
            g = contact_dist(i, j)
            if math.isfinite(g):
                c = min(c, g + cap(j))
        capacity[i] = c
        return c

    deltas = [0.0] * n
    deltas[primary_idx] = min(length, cap(primary_idx))
    blocked = deltas[primary_idx] < length
    for _ in range(n):
        changed = False
        for i in range(n):
            if deltas[i] <= 0.0:
                continue
            for j in range(n):
                if j == i:
                    continue
                g = contact_dist(i, j)
                if math.isfinite(g) and deltas[i] - g > deltas[j]:
                    deltas[j] = min(deltas[i] - g, cap(j))
                    changed = True
        if not changed:
            break
    touching_wall = any(
        deltas[i] > 0.0 and math.isfinite(wall_caps[i]) and deltas[i] >= wall_caps[i] - 1e-12 for i in range(n)
    )
    return deltas, blocked or touching_wall


def execute_push(scene: SceneState, cand: PushCandidate, snap_tolerance: float = 0.02) -> PushOutcome:
    """Apply a push to the ground-truth scene and return the consequence.

    The contacted object is the one whose footprint contains the start
    point, else the nearest footprint within ``snap_tolerance`` (the start
    comes from a map cell center, so it can sit just off the true surface).
    A candidate that touches nothing is reported as a no-op, not an error:
    the map the candidate came from may be stale.
    """
    sx, sy = cand.start[0], cand.start[1]
    fps = [o.footprint() for o in scene.objects]
    primary_idx = None
    best_dist = math.inf
    for i, fp in enumerate(fps):
        d = distance_to(fp, sx, sy)
        if d < best_dist:
            best_dist = d
            primary_idx = i
    if primary_idx is None or best_dist > snap_tolerance:
        return PushOutcome(
            displacements={o.id: 0.0 for o in scene.objects},
            drops=(),
            wall_contact=False,
            contacted_id=None,
            scene_after=scene,
        )
    dx, dy = cand.direction
    deltas, wall_contact = _resolve_chain(scene, primary_idx, dx, dy, cand.length)

    moved = []
    drops = []
    displacements = {}
    for obj, delta in zip(scene.objects, deltas):
        displacements[obj.id] = delta
        new_obj = obj.moved(delta * dx, delta * dy) if delta > 0.0 else obj
        if new_obj.x < scene.shelf.front_x:
            drops.append(obj.id)
        else:
            moved.append(new_obj)
    return PushOutcome(
        displacements=displacements,
        drops=tuple(drops),
        wall_contact=wall_contact,
        contacted_id=scene.objects[primary_idx].id,
        scene_after=scene.with_objects(moved),
    )


class _RolloutRenderer:
    """Range images of pushed variants of one scene from one fixed pose.

    The shelf and every unmoved object contribute identical first-hit
    distances across all candidates of a scoring pass, so those are
    computed once; per candidate only the moved objects are re-intersected.
    Results are bit-identical to ``render_depth`` (min over primitives is
    order-free).
    """

    def __init__(self, scene: SceneState, pose: CameraPose, intr: CameraIntrinsics):
        self.scene = scene
        self.pose = pose
        self.intr = intr
        self.origin = pose.position
        self.dirs = _ray_grid(intr.width, intr.height, intr.vertical_fov) @ camera_rotation(pose).T
        self.t_shelf = _static_shelf_depth(scene.shelf, pose, intr, self.origin, self.dirs)
        board = scene.shelf.board_z_m
        self.per_object = {}
        for obj in scene.objects:
            if obj.shape is Shape.BOX:
                self.per_object[obj.id] = _ray_boxes(self.origin, self.dirs, [obj], board)
            else:
                self.per_object[obj.id] = _ray_cylinders(self.origin, self.dirs, [obj], board)

    def ranges(self, scene_after: SceneState, moved_ids: set[int]) -> np.ndarray:
        board = self.scene.shelf.board_z_m
        t = self.t_shelf.copy()
        for obj in scene_after.objects:
            if obj.id in moved_ids:
                if obj.shape is Shape.BOX:
                    t = np.minimum(t, _ray_boxes(self.origin, self.dirs, [obj], board))
                else:
                    t = np.minimum(t, _ray_cylinders(self.origin, self.dirs, [obj], board))
            else:
                t = np.minimum(t, self.per_object[obj.id])
        return np.where((t >= self.intr.min_range) & (t <= self.intr.max_range), t, np.inf)

    def pointcloud(self, ranges: np.ndarray) -> np.ndarray:
        finite = np.isfinite(ranges)
        if not finite.any():
            return np.empty((0, 3))
        return self.origin + self.dirs[finite] * ranges[finite, None]


def score_push(
    scene: SceneState,
    hmap: HeightMap,
    cand: PushCandidate,
    displacement_weight: float = 0.5,
    drop_penalty: float = 1.0,
    view_pose: CameraPose | None = None,
    intr: CameraIntrinsics = DEFAULT_INTRINSICS,
) -> float:
    """Rollout score of a candidate; higher is better. Inputs stay untouched.

    The push runs on clones, the front-center survey view is re-rendered
    and integrated, and the score is the fraction of newly classified cells
    minus ``displacement_weight`` times the summed displacement (meters)
    minus ``drop_penalty`` per dropped object.
    """
    score, _ = _score_push_detail(scene, hmap, cand, displacement_weight, drop_penalty, view_pose, intr)
    return score


def _score_push_detail(scene, hmap, cand, displacement_weight, drop_penalty, view_pose, intr, renderer=None):
    result = execute_push(scene, cand)
    trial_map = hmap.copy()
    unknown_before = trial_map.unknown_count()
    pose = view_pose or survey_poses(scene.shelf)[0]
    if renderer is None:
        renderer = _RolloutRenderer(scene, pose, intr)
    moved = {oid for oid, d in result.displacements.items() if d > 0.0}
    ranges = renderer.ranges(result.scene_after, moved)
    integrate(trial_map, renderer.pointcloud(ranges), pose, intr)
    unknown_after = trial_map.unknown_count()
    result.delta_entropy = (unknown_before - unknown_after) / trial_map.n_cells
    score = result.delta_entropy - displacement_weight * result.total_displacement - drop_penalty * len(result.drops)
    return score, result


def select_best_push(
    scene: SceneState,
    hmap: HeightMap,
    candidates: list[PushCandidate],
    displacement_weight: float = 0.5,
    drop_penalty: float = 1.0,
    view_pose: CameraPose | None = None,
    intr: CameraIntrinsics = DEFAULT_INTRINSICS,
) -> PushCandidate | None:
    """Argmax of score_push; ties break toward the lowest candidate index."""
    if not candidates:
        return None
    pose = view_pose or survey_poses(scene.shelf)[0]
    renderer = _RolloutRenderer(scene, pose, intr)
    best, best_score = None, -math.inf
    for cand in candidates:
        s, _ = _score_push_detail(scene, hmap, cand, displacement_weight, drop_penalty, pose, intr, renderer)
        if s > best_score:
            best, best_score = cand, s
    return best


def export_pushmaps(
    scene: SceneState,
    hmap: HeightMap,
    out_dir,
    config: PushSamplingConfig = DEFAULT_SAMPLING,
    length: float = 0.05,
    size: int = 64,
    displacement_weight: float = 0.5,
    intr: CameraIntrinsics = DEFAULT_INTRINSICS,
) -> int:
    """Write a machine-labeled push-map dataset directory.

    For every candidate: probability and height push maps as 8-bit PGM plus
    one JSON line of metadata and simulated labels (entropy change, total
    displacement, drop flag, score).  Returns the number of candidates.
    """
    from .pgmio import write_pgm

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    candidates = sample_candidates(hmap, scene.shelf, config, length)
    view_pose = survey_poses(scene.shelf)[0]
    renderer = _RolloutRenderer(scene, view_pose, intr)
    lines = []
    for idx, cand in enumerate(candidates):
        pm = make_push_map(hmap, cand, size)
        write_pgm(out / f"pushmap_{idx:04d}_prob.pgm", np.clip(np.round(pm.probability * 255), 0, 255).astype(np.uint8))
        h_scale = hmap.interior_height if hmap.interior_height > 0 else 1.0
        write_pgm(
            out / f"pushmap_{idx:04d}_height.pgm",
            np.clip(np.round(pm.height / h_scale * 255), 0, 255).astype(np.uint8),
        )
        score, result = _score_push_detail(scene, hmap, cand, displacement_weight, 1.0, view_pose, intr, renderer)
        lines.append(
            json.dumps(
                {
                    "index": idx,
                    "start": list(cand.start),
                    "direction_index": cand.direction_index,
                    "angle": cand.angle,
                    "length": cand.length,
                    "delta_entropy": result.delta_entropy,
                    "total_displacement": result.total_displacement,
                    "drop": bool(result.drops),
                    "score": score,
                }
            )
        )
    (out / "labels.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""))
    return len(candidates)
