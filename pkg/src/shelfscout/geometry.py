"""2D footprint geometry.

Objects on the shelf board are upright prisms and cylinders, so every
footprint is a convex shape in the board plane: a rectangle with yaw, or a
circle.  Push mechanics reduce to translating footprints along a fixed unit
direction, which needs exactly two primitives:

  * an overlap predicate (positive-area intersection), and
  * the directional contact distance: how far shape A can translate along a
    direction before it first touches shape B (inf if it never does).

Contact distances are computed in closed form (swept separating-axis test
for rectangle pairs, rounded-box ray cast for circle/rectangle, quadratic
for circle pairs) so push outcomes are exact and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

_EPS = 1e-12


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float

    def translated(self, dx: float, dy: float) -> "Circle":
        return replace(self, cx=self.cx + dx, cy=self.cy + dy)

    def aabb(self):
        return (self.cx - self.r, self.cy - self.r, self.cx + self.r, self.cy + self.r)

    def contains(self, x: float, y: float) -> bool:
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 <= self.r**2


@dataclass(frozen=True)
class Rect:
    """Rectangle footprint: center, half extents, yaw (radians)."""

    cx: float
    cy: float
    hx: float
    hy: float
    yaw: float = 0.0

    def translated(self, dx: float, dy: float) -> "Rect":
        return replace(self, cx=self.cx + dx, cy=self.cy + dy)

    def corners(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        ux, uy = c * self.hx, s * self.hx
        vx, vy = -s * self.hy, c * self.hy
        return np.array(
            [
                [self.cx + ux + vx, self.cy + uy + vy],
                [self.cx + ux - vx, self.cy + uy - vy],
                [self.cx - ux - vx, self.cy - uy - vy],
                [self.cx - ux + vx, self.cy - uy + vy],
            ]
        )

    def axes(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, s], [-s, c]])

    def aabb(self):
        cs = self.corners()
        return (cs[:, 0].min(), cs[:, 1].min(), cs[:, 0].max(), cs[:, 1].max())

    def contains(self, x: float, y: float) -> bool:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        dx, dy = x - self.cx, y - self.cy
        lx = c * dx + s * dy
        ly = -s * dx + c * dy
        return abs(lx) <= self.hx and abs(ly) <= self.hy


Footprint = Circle | Rect


def _to_local(rect: Rect, x: float, y: float):
    c, s = math.cos(rect.yaw), math.sin(rect.yaw)
    dx, dy = x - rect.cx, y - rect.cy
    return c * dx + s * dy, -s * dx + c * dy


def distance_to(fp: Footprint, x: float, y: float) -> float:
    """Distance from a point to the footprint boundary (0 inside)."""
    if isinstance(fp, Circle):
        return max(0.0, math.hypot(x - fp.cx, y - fp.cy) - fp.r)
    lx, ly = _to_local(fp, x, y)
    ox = max(abs(lx) - fp.hx, 0.0)
    oy = max(abs(ly) - fp.hy, 0.0)
    return math.hypot(ox, oy)


def overlap(a: Footprint, b: Footprint, eps: float = 1e-9) -> bool:
    """True when the footprints intersect with positive penetration.

    Touching contacts (separation exactly 0) do not count, which lets chained
    push results end flush against each other without violating the
    no-overlap invariant.
    """
    if isinstance(a, Circle) and isinstance(b, Circle):
        rsum = a.r + b.r
        return (a.cx - b.cx) ** 2 + (a.cy - b.cy) ** 2 < (rsum - eps) ** 2
    if isinstance(a, Circle):
        return _overlap_circle_rect(a, b, eps)
    if isinstance(b, Circle):
        return _overlap_circle_rect(b, a, eps)
    return _overlap_rect_rect(a, b, eps)


def _overlap_circle_rect(c: Circle, r: Rect, eps: float) -> bool:
    lx, ly = _to_local(r, c.cx, c.cy)
    ox = max(abs(lx) - r.hx, 0.0)
    oy = max(abs(ly) - r.hy, 0.0)
    return math.hypot(ox, oy) < c.r - eps


def _overlap_rect_rect(a: Rect, b: Rect, eps: float) -> bool:
    ca, cb = a.corners(), b.corners()
    for n in np.vstack([a.axes(), b.axes()]):
        pa = ca @ n
        pb = cb @ n
        if pa.min() >= pb.max() - eps or pb.min() >= pa.max() - eps:
            return False
    return True


def directional_contact(a: Footprint, b: Footprint, dx: float, dy: float) -> float:
    """Smallest t >= 0 so that a translated by t*(dx, dy) touches b.

    Returns inf when a never reaches b along that direction.  (dx, dy) must
    be a unit vector.  Shapes already in contact return 0.
    """
    if isinstance(a, Circle) and isinstance(b, Circle):
        return _contact_circle_circle(a, b, dx, dy)
    if isinstance(a, Circle) and isinstance(b, Rect):
        return _contact_circle_rect(a, b, dx, dy)
    if isinstance(a, Rect) and isinstance(b, Circle):
        # Moving a rect toward a circle equals moving the circle the other way.
        return _contact_circle_rect(b, a, -dx, -dy)
    return _contact_rect_rect(a, b, dx, dy)


def _contact_circle_circle(a: Circle, b: Circle, dx: float, dy: float) -> float:
    cx, cy = b.cx - a.cx, b.cy - a.cy
    rsum = a.r + b.r
    proj = cx * dx + cy * dy
    d2 = cx * cx + cy * cy
    if d2 <= rsum * rsum:
        return 0.0
    disc = proj * proj - (d2 - rsum * rsum)
    if disc < 0.0:
        return math.inf
    t = proj - math.sqrt(disc)
    return t if t >= 0.0 else math.inf


def _contact_rect_rect(a: Rect, b: Rect, dx: float, dy: float) -> float:
    """Swept separating-axis test: intersect per-axis contact intervals."""
    ca, cb = a.corners(), b.corners()
    d = np.array([dx, dy])
    t_enter, t_exit = -math.inf, math.inf
    for n in np.vstack([a.axes(), b.axes()]):
        pa = ca @ n
        pb = cb @ n
        amin, amax = pa.min(), pa.max()
        bmin, bmax = pb.min(), pb.max()
        v = float(d @ n)
        if abs(v) < _EPS:
            if amax < bmin or bmax < amin:
                return math.inf
            continue
        lo = (bmin - amax) / v
        hi = (bmax - amin) / v
        if v < 0.0:
            lo, hi = hi, lo
        t_enter = max(t_enter, lo)
        t_exit = min(t_exit, hi)
        if t_enter > t_exit:
            return math.inf
    if t_exit < 0.0:
        return math.inf
    return max(t_enter, 0.0)


def _contact_circle_rect(c: Circle, r: Rect, dx: float, dy: float) -> float:
    """Ray cast a moving circle center against the rect dilated by its radius."""
    ox, oy = _to_local(r, c.cx, c.cy)
    co, si = math.cos(r.yaw), math.sin(r.yaw)
    vx = co * dx + si * dy
    vy = -si * dx + co * dy
    hx, hy, rad = r.hx, r.hy, c.r

    # Already inside the dilated box (overlapping or touching)?
    qx = max(abs(ox) - hx, 0.0)
    qy = max(abs(oy) - hy, 0.0)
    if math.hypot(qx, qy) <= rad:
        return 0.0

    best = math.inf
    # Flat faces of the rounded box.
    if abs(vx) > _EPS:
        for face_x in (hx + rad, -(hx + rad)):
            t = (face_x - ox) / vx
            if 0.0 <= t < best and abs(oy + t * vy) <= hy:
                best = t
    if abs(vy) > _EPS:
        for face_y in (hy + rad, -(hy + rad)):
            t = (face_y - oy) / vy
            if 0.0 <= t < best and abs(ox + t * vx) <= hx:
                best = t
    # Corner arcs.
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            px, py = ox - sx * hx, oy - sy * hy
            proj = -(px * vx + py * vy)
            disc = proj * proj - (px * px + py * py - rad * rad)
            if disc < 0.0:
                continue
            t = proj - math.sqrt(disc)
            if 0.0 <= t < best:
                best = t
    return best


def max_along(fp: Footprint, nx: float, ny: float) -> float:
    """Support value: maximum of (nx, ny) . p over the footprint."""
    if isinstance(fp, Circle):
        return fp.cx * nx + fp.cy * ny + fp.r
    return float((fp.corners() @ np.array([nx, ny])).max())


def wall_travel(fp: Footprint, dx: float, dy: float, depth: float, width: float) -> float:
    """Translation along (dx, dy) until the footprint touches a shelf wall.

    Walls are the back panel (x = depth) and the two sides (y = 0, y = width);
    the front edge is open so motion toward negative x is unbounded.
    """
    t = math.inf
    if dx > _EPS:
        t = min(t, (depth - max_along(fp, 1.0, 0.0)) / dx)
    if dy > _EPS:
        t = min(t, (width - max_along(fp, 0.0, 1.0)) / dy)
    if dy < -_EPS:
        min_y = -max_along(fp, 0.0, -1.0)
        t = min(t, (min_y - 0.0) / (-dy))
    return max(t, 0.0)
