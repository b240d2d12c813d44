"""Scripted viewpoint planners.

These stand in for a learned policy and for the sampling planners they are
benchmarked against; the greedy and global planners are analogs of
published sampling approaches, not reimplementations.

All sampling planners rank poses by a predicted view value computed on the
believed map: the number of currently-unknown cells whose column would be
visible from the pose.  The prediction is optimistic by construction,
treating unknown space as transparent and blocking rays only on
believed-occupied columns (at their observed heights) and on the shelf
structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .episode import RewardParams
from .mapping import CellState, HeightMap, motion_cost
from .scene import ShelfSpec
from .sensor import (
    DEFAULT_INTRINSICS,
    CameraIntrinsics,
    CameraPose,
    Workspace,
    camera_rotation,
)


class PlannerKind(str, Enum):
    FIXED3P = "fixed3p"
    RANDOM = "random"
    GREEDY = "greedy"
    GLOBAL = "global"


def visible_unknown_cells(
    hmap: HeightMap,
    pose: CameraPose,
    shelf: ShelfSpec,
    intr: CameraIntrinsics = DEFAULT_INTRINSICS,
    n_samples: int = 128,
) -> np.ndarray:
    """Flat indices of unknown cells whose board surface the pose would see.

    A cell counts as visible when its center (at board height) lies inside
    the camera frustum and range window, and the sight line clears every
    believed-occupied column and the shelf walls.  Unknown columns do not
    occlude (optimistic).
    """
    states = hmap.states()
    unknown_flat = np.flatnonzero(states.ravel() == CellState.UNKNOWN)
    if unknown_flat.size == 0:
        return unknown_flat
    cell = hmap.cell_size
    ii, jj = np.unravel_index(unknown_flat, (hmap.nx, hmap.ny))
    targets = np.column_stack(
        [(ii + 0.5) * cell, (jj + 0.5) * cell, np.full(ii.shape, hmap.board_z)]
    )
    cam = pose.position
    vec = targets - cam
    rng = np.linalg.norm(vec, axis=1)

    rot = camera_rotation(pose)
    right, down, forward = rot[:, 0], rot[:, 1], rot[:, 2]
    zc = vec @ forward
    xc = vec @ right
    yc = vec @ down
    tan_h = math.tan(intr.horizontal_fov / 2.0)
    tan_v = math.tan(intr.vertical_fov / 2.0)
    ok = (
        (zc > 0.0)
        & (np.abs(xc) <= zc * tan_h)
        & (np.abs(yc) <= zc * tan_v)
        & (rng >= intr.min_range)
        & (rng <= intr.max_range)
    )
    if not ok.any():
        return unknown_flat[ok]

    idx = np.flatnonzero(ok)
    vec_ok = vec[idx]
    # Sample along each sight line, stopping a bit short of the target cell.
    fracs = (np.arange(n_samples) + 0.5) / n_samples
    shrink = np.maximum(1.0 - cell / np.maximum(rng[idx], cell), 0.0)
    pts = cam + vec_ok[:, None, :] * (fracs[None, :, None] * shrink[:, None, None])

    px, py, pz = pts[..., 0], pts[..., 1], pts[..., 2]
    rel_z = pz - hmap.board_z
    t = shelf.wall_thickness_m
    d, w = shelf.depth_m, shelf.width_m
    in_depth = (px >= 0.0) & (px <= d + t)
    blocked = in_depth & (py <= 0.0) & (py >= -t)                      # left wall
    blocked |= in_depth & (py >= w) & (py <= w + t)                    # right wall
    blocked |= (px >= d) & (px <= d + t)                               # back panel
    blocked |= in_depth & (rel_z >= shelf.height_m)                    # top board

    inside = (px >= 0.0) & (px < d) & (py >= 0.0) & (py < w)
    gi = np.clip((px / cell).astype(np.intp), 0, hmap.nx - 1)
    gj = np.clip((py / cell).astype(np.intp), 0, hmap.ny - 1)
    occupied = states == CellState.OCCUPIED
    col_occ = occupied[gi, gj] & inside
    col_height = hmap.height[gi, gj]
    blocked |= col_occ & (rel_z < col_height)

    clear = ~blocked.any(axis=1)
    return unknown_flat[idx[clear]]


@dataclass
class _PlannerBase:
    ws: Workspace
    shelf: ShelfSpec
    intr: CameraIntrinsics
    rng: np.random.Generator

    def reset(self, hmap: HeightMap, last_pose: CameraPose) -> None:
        pass


class RandomPlanner(_PlannerBase):
    """Uniform valid pose from the workspace."""

    def plan(self, hmap: HeightMap, last_pose: CameraPose) -> CameraPose:
        return self.ws.sample_pose(self.rng)


class GreedyPlanner(_PlannerBase):
    """Best of n sampled poses by predicted visible-unknown count minus cost."""

    def __init__(self, ws, shelf, intr, rng, n_candidates: int = 64, cost_weight: float = RewardParams().cost_weight):
        super().__init__(ws, shelf, intr, rng)
        self.n_candidates = n_candidates
        self.cost_weight = cost_weight

    def plan(self, hmap: HeightMap, last_pose: CameraPose) -> CameraPose:
        if self.n_candidates < 1:
            raise ValueError("need at least one candidate pose")
        best_pose, best_score = None, -math.inf
        for _ in range(self.n_candidates):
            pose = self.ws.sample_pose(self.rng)
            gain = visible_unknown_cells(hmap, pose, self.shelf, self.intr).size
            score = gain - self.cost_weight * motion_cost(last_pose, pose)
            if score > best_score:
                best_pose, best_score = pose, score
        return best_pose


class GlobalPlanner(_PlannerBase):
    """Episode-level pose pool ordered greedily for maximum joint coverage.

    The pool is sampled once per episode; a maximum-coverage sequence over
    the predicted visible-unknown sets is built up front and then emitted
    one pose per step.  When the sequence is exhausted the last pose
    repeats, which lets the entropy-window termination fire.
    """

    def __init__(self, ws, shelf, intr, rng, pool_size: int = 64):
        super().__init__(ws, shelf, intr, rng)
        self.pool_size = pool_size
        self._sequence: list[CameraPose] = []
        self._cursor = 0

    def reset(self, hmap: HeightMap, last_pose: CameraPose) -> None:
        if self.pool_size < 1:
            raise ValueError("pool must contain at least one pose")
        pool = [self.ws.sample_pose(self.rng) for _ in range(self.pool_size)]
        sets = [set(visible_unknown_cells(hmap, p, self.shelf, self.intr).tolist()) for p in pool]
        covered: set[int] = set()
        remaining = list(range(len(pool)))
        self._sequence = []
        while remaining:
            gains = [len(sets[i] - covered) for i in remaining]
            best = max(range(len(remaining)), key=lambda k: gains[k])
            if gains[best] == 0 and self._sequence:
                break
            pick = remaining.pop(best)
            covered |= sets[pick]
            self._sequence.append(pool[pick])
        self._cursor = 0

    def plan(self, hmap: HeightMap, last_pose: CameraPose) -> CameraPose:
        if not self._sequence:
            raise RuntimeError("global planner used before reset")
        pose = self._sequence[min(self._cursor, len(self._sequence) - 1)]
        self._cursor += 1
        return pose


def make_planner(
    kind: PlannerKind,
    ws: Workspace,
    shelf: ShelfSpec,
    intr: CameraIntrinsics = DEFAULT_INTRINSICS,
    rng: np.random.Generator | None = None,
    n_candidates: int = 64,
):
    rng = rng if rng is not None else np.random.default_rng(0)
    kind = PlannerKind(kind)
    if kind is PlannerKind.RANDOM:
        return RandomPlanner(ws, shelf, intr, rng)
    if kind is PlannerKind.GREEDY:
        return GreedyPlanner(ws, shelf, intr, rng, n_candidates=n_candidates)
    if kind is PlannerKind.GLOBAL:
        return GlobalPlanner(ws, shelf, intr, rng, pool_size=n_candidates)
    raise ValueError(f"{kind} does not plan views")


def plan_next_view(
    kind: PlannerKind,
    hmap: HeightMap,
    ws: Workspace,
    n_candidates: int = 64,
    *,
    shelf: ShelfSpec,
    last_pose: CameraPose,
    intr: CameraIntrinsics = DEFAULT_INTRINSICS,
    rng: np.random.Generator | None = None,
    planner=None,
) -> CameraPose:
    """One-shot planner dispatch.

    The global planner is stateful (its pool lives for a whole episode), so
    callers either pass a prepared ``planner`` or get a fresh one whose pool
    is built from the current map.
    """
    if planner is None:
        planner = make_planner(kind, ws, shelf, intr, rng, n_candidates)
        planner.reset(hmap, last_pose)
    return planner.plan(hmap, last_pose)
