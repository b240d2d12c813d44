"""Ground-truth shelf world: geometry, object primitives, scenario sampling.

The shelf frame has its origin at the front-left corner of the board
surface: x runs into the shelf (depth), y runs along the board (width) and
z is height above the board.  The front face (x = 0 plane) is open, all
other sides are solid.

Scenes are immutable; pushes produce new ``SceneState`` values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .geometry import Circle, Footprint, Rect, overlap


class SceneSamplingError(RuntimeError):
    """Rejection sampling could not place all objects (shelf too crowded)."""


class Shape(str, Enum):
    BOX = "box"
    CYLINDER = "cylinder"


class MassClass(str, Enum):
    LIGHT = "light"
    HEAVY = "heavy"


@dataclass(frozen=True)
class ShelfSpec:
    """Shelf compartment dimensions in meters."""

    depth_m: float = 0.40
    width_m: float = 0.80
    height_m: float = 0.40
    wall_thickness_m: float = 0.02
    board_z_m: float = 0.0

    def __post_init__(self):
        if min(self.depth_m, self.width_m, self.height_m, self.wall_thickness_m) <= 0:
            raise ValueError("shelf extents and wall thickness must be positive")

    @property
    def front_x(self) -> float:
        return 0.0

    @property
    def top_z(self) -> float:
        return self.board_z_m + self.height_m


@dataclass(frozen=True)
class ObjectPrimitive:
    """An upright rigid primitive resting on the shelf board.

    Boxes carry (dx, dy, dz) edge lengths, cylinders (radius, height).
    Pose is the 2D board position of the footprint center plus yaw; objects
    never tilt.  ``mass`` is an annotation only: the quasi-static push model
    treats all objects alike.
    """

    id: int
    shape: Shape
    dims: tuple[float, ...]
    x: float
    y: float
    yaw: float = 0.0
    mass: MassClass = MassClass.LIGHT

    @property
    def height(self) -> float:
        return self.dims[2] if self.shape is Shape.BOX else self.dims[1]

    def footprint(self) -> Footprint:
        if self.shape is Shape.BOX:
            return Rect(self.x, self.y, self.dims[0] / 2, self.dims[1] / 2, self.yaw)
        return Circle(self.x, self.y, self.dims[0])

    def moved(self, dx: float, dy: float) -> "ObjectPrimitive":
        return replace(self, x=self.x + dx, y=self.y + dy)


@dataclass(frozen=True, eq=False)
class SceneState:
    shelf: ShelfSpec
    objects: tuple[ObjectPrimitive, ...]
    seed: int

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise ValueError("object ids must be unique")

    def object_by_id(self, oid: int) -> ObjectPrimitive:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def with_objects(self, objects) -> "SceneState":
        return replace(self, objects=tuple(objects))

    def to_json(self) -> str:
        payload = {
            "seed": self.seed,
            "shelf": {
                "depth_m": self.shelf.depth_m,
                "width_m": self.shelf.width_m,
                "height_m": self.shelf.height_m,
                "wall_thickness_m": self.shelf.wall_thickness_m,
                "board_z_m": self.shelf.board_z_m,
            },
            "objects": [
                {
                    "id": o.id,
                    "shape": o.shape.value,
                    "dims": list(o.dims),
                    "x": o.x,
                    "y": o.y,
                    "yaw": o.yaw,
                    "mass": o.mass.value,
                }
                for o in self.objects
            ],
        }
        return json.dumps(payload, indent=2)

    @staticmethod
    def from_json(text: str) -> "SceneState":
        payload = json.loads(text)
        shelf = ShelfSpec(**payload["shelf"])
        objects = tuple(
            ObjectPrimitive(
                id=o["id"],
                shape=Shape(o["shape"]),
                dims=tuple(o["dims"]),
                x=o["x"],
                y=o["y"],
                yaw=o["yaw"],
                mass=MassClass(o["mass"]),
            )
            for o in payload["objects"]
        )
        return SceneState(shelf=shelf, objects=objects, seed=payload["seed"])

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @staticmethod
    def load(path) -> "SceneState":
        return SceneState.from_json(Path(path).read_text())


@dataclass(frozen=True)
class ObjectDimConfig:
    """Sampling ranges for procedural objects.

    The defaults are sized so that 8-10 objects on a 40 x 80 cm board
    occlude each other without exhausting the rejection sampler.
    """

    box_edge: tuple[float, float] = (0.04, 0.15)
    box_height: tuple[float, float] = (0.04, 0.25)
    cylinder_radius: tuple[float, float] = (0.02, 0.05)
    cylinder_height: tuple[float, float] = (0.08, 0.25)
    box_fraction: float = 0.5
    clearance: float = 0.005
    wall_clearance: float = 0.005


DEFAULT_SHELF = ShelfSpec()
DEFAULT_DIMS = ObjectDimConfig()

_MAX_ATTEMPTS_PER_OBJECT = 10_000


def _inflated(fp: Footprint, margin: float) -> Footprint:
    if isinstance(fp, Circle):
        return Circle(fp.cx, fp.cy, fp.r + margin)
    return Rect(fp.cx, fp.cy, fp.hx + margin, fp.hy + margin, fp.yaw)


def sample_scene(
    seed: int,
    n_objects: int,
    shelf: ShelfSpec = DEFAULT_SHELF,
    dims: ObjectDimConfig = DEFAULT_DIMS,
) -> SceneState:
    """Sample a collision-free scene. Pure function of its arguments.

    Placement is rejection sampling: each object draws shape, dimensions,
    yaw and position until its footprint (inflated by half the clearance)
    stays inside the board and clear of everything placed so far.
    """
    if n_objects < 1:
        raise ValueError("n_objects must be >= 1")
    rng = np.random.default_rng(seed)
    placed: list[ObjectPrimitive] = []
    footprints: list[Footprint] = []
    margin = dims.clearance / 2
    for oid in range(n_objects):
        for attempt in range(_MAX_ATTEMPTS_PER_OBJECT):
            if rng.random() < dims.box_fraction:
                dx = rng.uniform(*dims.box_edge)
                dy = rng.uniform(*dims.box_edge)
                dz = rng.uniform(*dims.box_height)
                yaw = rng.uniform(0.0, 2.0 * math.pi)
                half_diag_x = abs(math.cos(yaw)) * dx / 2 + abs(math.sin(yaw)) * dy / 2
                half_diag_y = abs(math.sin(yaw)) * dx / 2 + abs(math.cos(yaw)) * dy / 2
                obj = ObjectPrimitive(oid, Shape.BOX, (dx, dy, min(dz, shelf.height_m)), 0.0, 0.0, yaw)
                ext_x, ext_y = half_diag_x, half_diag_y
            else:
                r = rng.uniform(*dims.cylinder_radius)
                h = rng.uniform(*dims.cylinder_height)
                obj = ObjectPrimitive(oid, Shape.CYLINDER, (r, min(h, shelf.height_m)), 0.0, 0.0, 0.0)
                ext_x = ext_y = r
            lo_x = ext_x + dims.wall_clearance
            hi_x = shelf.depth_m - ext_x - dims.wall_clearance
            lo_y = ext_y + dims.wall_clearance
            hi_y = shelf.width_m - ext_y - dims.wall_clearance
            if lo_x >= hi_x or lo_y >= hi_y:
                continue
            x = rng.uniform(lo_x, hi_x)
            y = rng.uniform(lo_y, hi_y)
            obj = replace(obj, x=x, y=y, mass=MassClass.HEAVY if rng.random() < 0.5 else MassClass.LIGHT)
            fp = _inflated(obj.footprint(), margin)
            if any(overlap(fp, other, eps=0.0) for other in footprints):
                continue
            placed.append(obj)
            footprints.append(fp)
            break
        else:
            raise SceneSamplingError(
                f"could not place object {oid} after {_MAX_ATTEMPTS_PER_OBJECT} attempts "
                f"(n_objects={n_objects} too crowded for this shelf)"
            )
    return SceneState(shelf=shelf, objects=tuple(placed), seed=seed)


@dataclass(frozen=True)
class DisplacementReport:
    per_object: dict[int, float]
    mean: float
    dropped: tuple[int, ...]


def displacement(before: SceneState, after: SceneState) -> DisplacementReport:
    """Per-object Euclidean displacement of footprint centers.

    Objects present in ``before`` but missing from ``after`` were dropped;
    they are excluded from the mean and reported separately.  ``after`` may
    not contain ids unknown to ``before``.
    """
    ids_before = {o.id for o in before.objects}
    ids_after = {o.id for o in after.objects}
    unknown = ids_after - ids_before
    if unknown:
        raise ValueError(f"objects {sorted(unknown)} not present in the reference scene")
    per_object: dict[int, float] = {}
    for obj in before.objects:
        if obj.id not in ids_after:
            continue
        other = after.object_by_id(obj.id)
        per_object[obj.id] = math.hypot(other.x - obj.x, other.y - obj.y)
    mean = sum(per_object.values()) / len(per_object) if per_object else 0.0
    dropped = tuple(o.id for o in before.objects if o.id not in ids_after)
    return DisplacementReport(per_object=per_object, mean=mean, dropped=dropped)
