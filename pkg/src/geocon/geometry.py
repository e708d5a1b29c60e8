"""Points, shapes, closed containment and shape-shape overlap in 2-D and 3-D.

Shapes are immutable values.  Box-like shapes (squares and cubes) are
described by an anchor corner, a side length and a rotation; balls (circles
and spheres) by a center and a diameter.  Every region is closed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

EPS_GEOM = 1e-9

AXIS_SQUARE = "axis-square"
ORIENTED_SQUARE = "oriented-square"
CIRCLE = "circle"
AXIS_CUBE = "axis-cube"
ORIENTED_CUBE = "oriented-cube"
SPHERE = "sphere"

KINDS = (AXIS_SQUARE, ORIENTED_SQUARE, CIRCLE, AXIS_CUBE, ORIENTED_CUBE, SPHERE)
BOX_KINDS = frozenset({AXIS_SQUARE, ORIENTED_SQUARE, AXIS_CUBE, ORIENTED_CUBE})
BALL_KINDS = frozenset({CIRCLE, SPHERE})
KIND_DIM = {
    AXIS_SQUARE: 2,
    ORIENTED_SQUARE: 2,
    CIRCLE: 2,
    AXIS_CUBE: 3,
    ORIENTED_CUBE: 3,
    SPHERE: 3,
}

Point = tuple  # tuple[float, ...] of length 2 or 3


class GeometryError(ValueError):
    pass


def as_point(coords: Iterable[float]) -> Point:
    p = tuple(float(c) for c in coords)
    if len(p) not in (2, 3):
        raise GeometryError(f"points must have 2 or 3 coordinates, got {len(p)}")
    if not all(math.isfinite(c) for c in p):
        raise GeometryError(f"non-finite coordinate in {p}")
    return p


class PointSet:
    """Ordered, duplicate-free collection of equal-dimension points.

    Process ids are the indices into this collection.
    """

    def __init__(self, points: Iterable[Iterable[float]]):
        pts = [as_point(p) for p in points]
        if not pts:
            raise GeometryError("a PointSet needs at least one point")
        dim = len(pts[0])
        if any(len(p) != dim for p in pts):
            raise GeometryError("all points must have the same dimension")
        if len(set(pts)) != len(pts):
            raise GeometryError("process coordinates must be pairwise distinct")
        self.points: tuple[Point, ...] = tuple(pts)
        self.dim = dim
        self.array = np.array(pts, dtype=float)
        self.array.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i: int) -> Point:
        return self.points[i]

    def __iter__(self):
        return iter(self.points)

    def __eq__(self, other) -> bool:
        return isinstance(other, PointSet) and self.points == other.points

    def __hash__(self) -> int:
        return hash(self.points)

    def __repr__(self) -> str:
        return f"PointSet(n={len(self)}, dim={self.dim})"

    def subset(self, indices: Iterable[int]) -> "PointSet":
        return PointSet(self.points[i] for i in indices)

    def to_list(self) -> list[list[float]]:
        return [list(p) for p in self.points]


@dataclass(frozen=True)
class Shape:
    """A fault or cover area.

    ``size`` is the side for squares/cubes and the diameter for circles and
    spheres.  ``anchor`` is the bottom-left(-near) corner of a box, before
    rotation, or the center of a ball.  ``rotation`` is an angle in radians
    for oriented squares and a unit quaternion ``(w, x, y, z)`` for oriented
    cubes; it is ignored otherwise.
    """

    kind: str
    size: float
    anchor: Point
    rotation: float | tuple[float, ...] = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeometryError(f"unknown shape kind {self.kind!r}")
        if not (self.size > 0 and math.isfinite(self.size)):
            raise GeometryError(f"shape size must be positive, got {self.size}")
        anchor = as_point(self.anchor)
        if len(anchor) != KIND_DIM[self.kind]:
            raise GeometryError(f"{self.kind} needs a {KIND_DIM[self.kind]}-D anchor")
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "size", float(self.size))
        if self.kind == ORIENTED_SQUARE:
            rot = float(self.rotation) % (math.pi / 2)
            object.__setattr__(self, "rotation", rot)
        elif self.kind == ORIENTED_CUBE:
            q = np.asarray(self.rotation, dtype=float)
            if q.shape != (4,) or not np.all(np.isfinite(q)) or np.linalg.norm(q) == 0:
                raise GeometryError("oriented-cube rotation must be a quaternion (w, x, y, z)")
            norm = np.linalg.norm(q)
            if abs(norm - 1) > 1e-12:
                q = q / norm
            if q[0] < 0:
                q = -q
            object.__setattr__(self, "rotation", tuple(float(v) for v in q))
        else:
            object.__setattr__(self, "rotation", 0.0)

    @property
    def dim(self) -> int:
        return KIND_DIM[self.kind]

    @property
    def is_box(self) -> bool:
        return self.kind in BOX_KINDS

    @property
    def is_ball(self) -> bool:
        return self.kind in BALL_KINDS

    def frame(self) -> tuple[np.ndarray, np.ndarray]:
        """Origin and column-orthonormal axes of a box shape."""
        origin = np.array(self.anchor)
        if self.kind == ORIENTED_SQUARE:
            return origin, rotation_2d(self.rotation)
        if self.kind == ORIENTED_CUBE:
            return origin, quaternion_matrix(self.rotation)
        return origin, np.eye(self.dim)

    def center(self) -> np.ndarray:
        if self.is_ball:
            return np.array(self.anchor)
        origin, axes = self.frame()
        return origin + axes @ np.full(self.dim, self.size / 2)

    def vertices(self) -> np.ndarray:
        if not self.is_box:
            raise GeometryError("only boxes have vertices")
        origin, axes = self.frame()
        if self.dim == 2:
            unit = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        else:
            unit = np.array(
                [[i, j, k] for k in (0, 1) for j in (0, 1) for i in (0, 1)], dtype=float
            )
        return origin + (unit * self.size) @ axes.T

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "size": self.size, "anchor": list(self.anchor)}
        if self.kind == ORIENTED_SQUARE:
            d["rotation"] = self.rotation
        elif self.kind == ORIENTED_CUBE:
            d["rotation"] = list(self.rotation)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Shape":
        rot = d.get("rotation", 0.0)
        if isinstance(rot, list):
            rot = tuple(rot)
        return cls(d["kind"], d["size"], tuple(d["anchor"]), rot)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned box given by its lower and upper corners."""

    lo: Point
    hi: Point

    def __post_init__(self):
        lo, hi = as_point(self.lo), as_point(self.hi)
        if len(lo) != len(hi):
            raise GeometryError("rect corners differ in dimension")
        if any(a > b for a, b in zip(lo, hi)):
            raise GeometryError(f"rect lo {lo} exceeds hi {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def extent(self, axis: int) -> float:
        return self.hi[axis] - self.lo[axis]

    def contains(self, p: Sequence[float]) -> bool:
        return all(a <= c <= b for a, c, b in zip(self.lo, p, self.hi))

    def overlaps(self, other: "Rect") -> bool:
        return all(
            a_lo <= b_hi and b_lo <= a_hi
            for a_lo, a_hi, b_lo, b_hi in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}


def rotation_2d(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def quaternion_matrix(q: Sequence[float]) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def axis_angle_quaternion(axis: Sequence[float], angle: float) -> tuple[float, ...]:
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    s = math.sin(angle / 2)
    return (math.cos(angle / 2), a[0] * s, a[1] * s, a[2] * s)


def distance(p: Sequence[float], q: Sequence[float]) -> float:
    if len(p) != len(q):
        raise GeometryError(f"dimension mismatch: {len(p)} vs {len(q)}")
    return math.dist(p, q)


def shape_diameter(s: Shape) -> float:
    if s.is_ball:
        return s.size
    return math.sqrt(s.dim) * s.size


def contains_many(s: Shape, pts: np.ndarray) -> np.ndarray:
    """Boolean mask of the rows of ``pts`` lying in the closed region ``s``."""
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != s.dim:
        raise GeometryError(f"{s.kind} is {s.dim}-D, points are {pts.shape[1]}-D")
    if s.is_ball:
        r = s.size / 2
        d2 = np.sum((pts - np.array(s.anchor)) ** 2, axis=1)
        return d2 <= (r + EPS_GEOM) ** 2
    if s.kind in (AXIS_SQUARE, AXIS_CUBE):
        lo = np.array(s.anchor)
        return np.all((pts >= lo) & (pts <= lo + s.size), axis=1)
    origin, axes = s.frame()
    local = (pts - origin) @ axes
    return np.all((local >= -EPS_GEOM) & (local <= s.size + EPS_GEOM), axis=1)


def contains(s: Shape, p: Sequence[float]) -> bool:
    if len(p) != s.dim:
        raise GeometryError(f"{s.kind} is {s.dim}-D, point is {len(p)}-D")
    return bool(contains_many(s, np.array([p], dtype=float))[0])


def covered_indices(s: Shape, ps: PointSet) -> list[int]:
    return [int(i) for i in np.flatnonzero(contains_many(s, ps.array))]


def _box_ball_overlap(box: Shape, ball: Shape) -> bool:
    origin, axes = box.frame()
    local = (np.array(ball.anchor) - origin) @ axes
    nearest = np.clip(local, 0.0, box.size)
    return float(np.linalg.norm(local - nearest)) <= ball.size / 2 + EPS_GEOM


def _separating_axes(a_axes: np.ndarray, b_axes: np.ndarray) -> list[np.ndarray]:
    cand = [a_axes[:, i] for i in range(a_axes.shape[1])]
    cand += [b_axes[:, i] for i in range(b_axes.shape[1])]
    if a_axes.shape[0] == 3:
        for i in range(3):
            for j in range(3):
                c = np.cross(a_axes[:, i], b_axes[:, j])
                n = np.linalg.norm(c)
                if n > 1e-12:
                    cand.append(c / n)
    return cand


def _box_box_overlap(a: Shape, b: Shape) -> bool:
    if a.kind in (AXIS_SQUARE, AXIS_CUBE) and b.kind in (AXIS_SQUARE, AXIS_CUBE):
        return all(
            lo_a <= lo_b + b.size and lo_b <= lo_a + a.size
            for lo_a, lo_b in zip(a.anchor, b.anchor)
        )
    _, a_axes = a.frame()
    _, b_axes = b.frame()
    va, vb = a.vertices(), b.vertices()
    for axis in _separating_axes(a_axes, b_axes):
        pa, pb = va @ axis, vb @ axis
        if pa.max() < pb.min() - EPS_GEOM or pb.max() < pa.min() - EPS_GEOM:
            return False
    return True


def shapes_overlap(a: Shape, b: Shape) -> bool:
    """Whether the closed regions of ``a`` and ``b`` intersect."""
    if a.dim != b.dim:
        raise GeometryError(f"cannot intersect {a.kind} with {b.kind}")
    if a.is_ball and b.is_ball:
        gap = distance(a.anchor, b.anchor)
        return gap <= (a.size + b.size) / 2 + EPS_GEOM
    if a.is_box and b.is_box:
        return _box_box_overlap(a, b)
    if a.is_box:
        return _box_ball_overlap(a, b)
    return _box_ball_overlap(b, a)


def enclosing_rect(ps: PointSet | Sequence[Sequence[float]]) -> Rect:
    arr = ps.array if isinstance(ps, PointSet) else np.asarray(ps, dtype=float)
    if arr.size == 0:
        raise GeometryError("cannot enclose an empty point set")
    return Rect(tuple(arr.min(axis=0)), tuple(arr.max(axis=0)))


def boundary_samples(s: Shape, n: int = 64, rng: np.random.Generator | None = None) -> np.ndarray:
    """Points on the boundary of ``s`` (vertices included for boxes)."""
    rng = rng or np.random.default_rng(0)
    if s.is_ball:
        v = rng.normal(size=(n, s.dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return np.array(s.anchor) + v * (s.size / 2)
    origin, axes = s.frame()
    local = rng.uniform(0, s.size, size=(n, s.dim))
    face = rng.integers(0, s.dim, size=n)
    side = rng.integers(0, 2, size=n) * s.size
    local[np.arange(n), face] = side
    pts = origin + local @ axes.T
    return np.vstack([s.vertices(), pts])
