"""Greedy slab covers, an exhaustive optimal-cover oracle and overlap counting.

The greedy covers follow the slab construction: the enclosing rectangle is cut
into height-``ell`` slabs, each anchored at the lowest point not yet inside a
slab, and every slab is swept left to right with ``ell``-squares whose left
side passes through a point.  In 3-D the cut happens twice (depth layers, then
height rows) before the sweep.  Circle and sphere covers are derived from the
square and cube covers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from itertools import combinations, product
from typing import NamedTuple

import numpy as np

from .geometry import (
    AXIS_CUBE,
    AXIS_SQUARE,
    CIRCLE,
    EPS_GEOM,
    ORIENTED_CUBE,
    ORIENTED_SQUARE,
    SPHERE,
    GeometryError,
    PointSet,
    Rect,
    Shape,
    contains_many,
    enclosing_rect,
    shapes_overlap,
)

ORACLE_MAX_POINTS = 12


@dataclass
class CoverSet:
    """Cover areas of one kind and size, plus the slab decomposition behind them.

    ``area_slab[j]`` is the index in ``slabs`` of the cell that produced area
    ``j``; ``members[j]`` lists the point indices area ``j`` covers.  For circle
    and sphere covers ``parent[j]`` is the index of the square or cube the area
    was derived from.
    """

    kind: str
    size: float
    areas: list[Shape]
    slabs: list[Rect]
    area_slab: list[int]
    members: list[list[int]]
    parent: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.areas)

    def slab_counts(self) -> list[int]:
        counts = [0] * len(self.slabs)
        for s in self.area_slab:
            counts[s] += 1
        return counts

    def slab_members(self, ps: PointSet) -> list[list[int]]:
        out = []
        for slab in self.slabs:
            out.append([i for i, p in enumerate(ps) if slab.contains(p)])
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "size": self.size,
            "areas": [a.to_dict() for a in self.areas],
            "members": self.members,
            "slabs": [s.to_dict() for s in self.slabs],
            "area_slab": self.area_slab,
        }


def _check_dim(ps: PointSet, dim: int, ell: float, name: str) -> None:
    if ps.dim != dim:
        raise GeometryError(f"{name} needs {dim}-D points, got {ps.dim}-D")
    if not ell > 0:
        raise GeometryError(f"{name} needs ell > 0, got {ell}")


def _cells(arr, members, split_axes, ell, bases=()):
    """Yield (bases, members) for every finest-level slab cell.

    Cells are cut along ``split_axes`` in order; each cut starts at the lowest
    remaining coordinate on that axis.  Ties are broken by the remaining axes,
    so the order is total.
    """
    if not split_axes:
        yield bases, members
        return
    ax = split_axes[0]
    key_axes = list(split_axes) + [a for a in range(arr.shape[1]) if a not in split_axes]
    order = sorted(members, key=lambda i: tuple(arr[i, a] for a in key_axes))
    while order:
        base = arr[order[0], ax]
        top = base + ell
        inside = [i for i in order if arr[i, ax] <= top]
        order = [i for i in order if arr[i, ax] > top]
        yield from _cells(arr, inside, split_axes[1:], ell, bases + ((ax, base),))


def _greedy_boxes(ps: PointSet, ell: float, kind: str) -> CoverSet:
    arr = ps.array
    dim = ps.dim
    box = enclosing_rect(ps)
    split_axes = tuple(range(dim - 1, 0, -1))  # (y,) in 2-D, (z, y) in 3-D
    areas, slabs, area_slab, members = [], [], [], []
    for bases, cell in _cells(arr, list(range(len(ps))), split_axes, ell):
        base_of = dict(bases)
        lo = [box.lo[0]] + [base_of[a] for a in range(1, dim)]
        hi = [box.hi[0]] + [min(base_of[a] + ell, box.hi[a]) for a in range(1, dim)]
        slab_idx = len(slabs)
        slabs.append(Rect(tuple(lo), tuple(hi)))
        row = sorted(cell, key=lambda i: tuple(arr[i]))
        while row:
            left = arr[row[0], 0]
            anchor = (left,) + tuple(base_of[a] for a in range(1, dim))
            right = left + ell
            got = [i for i in row if arr[i, 0] <= right]
            row = [i for i in row if arr[i, 0] > right]
            areas.append(Shape(kind, ell, anchor))
            area_slab.append(slab_idx)
            members.append(sorted(got))
    return CoverSet(kind, ell, areas, slabs, area_slab, members)


def gsquare(ps: PointSet, ell: float) -> CoverSet:
    """Greedy axis-aligned ``ell``-square cover (at most twice the optimum)."""
    _check_dim(ps, 2, ell, "gsquare")
    return _greedy_boxes(ps, ell, AXIS_SQUARE)


def gcube(ps: PointSet, ell: float) -> CoverSet:
    """Greedy axis-aligned ``ell``-cube cover (at most four times the optimum)."""
    _check_dim(ps, 3, ell, "gcube")
    return _greedy_boxes(ps, ell, AXIS_CUBE)


def square_circles(square: Shape) -> list[Shape]:
    """The four diameter-``ell`` circles centered on the side midpoints.

    Order: bottom, left, right, top.
    """
    x, y = square.anchor
    h = square.size / 2
    centers = [(x + h, y), (x, y + h), (x + 2 * h, y + h), (x + h, y + 2 * h)]
    return [Shape(CIRCLE, square.size, c) for c in centers]


def cube_spheres(cube: Shape) -> list[Shape]:
    """Eight diameter-``ell`` spheres centered on the octant sub-cube centers."""
    q = cube.size / 4
    x, y, z = cube.anchor
    out = []
    for dz, dy, dx in product((1, 3), repeat=3):
        out.append(Shape(SPHERE, cube.size, (x + dx * q, y + dy * q, z + dz * q)))
    return out


def _derive_balls(ps: PointSet, boxes: CoverSet, split, kind: str) -> CoverSet:
    areas, area_slab, members, parent = [], [], [], []
    for j, box in enumerate(boxes.areas):
        for ball in split(box):
            got = np.flatnonzero(contains_many(ball, ps.array))
            if got.size == 0:
                continue
            areas.append(ball)
            area_slab.append(boxes.area_slab[j])
            members.append([int(k) for k in got])
            parent.append(j)
    return CoverSet(kind, boxes.size, areas, list(boxes.slabs), area_slab, members, parent)


def gcircle(ps: PointSet, ell: float) -> CoverSet:
    """Circle cover from ``gsquare``: four midpoint circles per square, empties dropped."""
    return _derive_balls(ps, gsquare(ps, ell), square_circles, CIRCLE)


def gsphere(ps: PointSet, ell: float) -> CoverSet:
    """Sphere cover from ``gcube``: eight octant spheres per cube, empties dropped."""
    return _derive_balls(ps, gcube(ps, ell), cube_spheres, SPHERE)


GREEDY = {AXIS_SQUARE: gsquare, CIRCLE: gcircle, AXIS_CUBE: gcube, SPHERE: gsphere}


def greedy_cover(ps: PointSet, kind: str, ell: float) -> CoverSet:
    try:
        return GREEDY[kind](ps, ell)
    except KeyError:
        raise GeometryError(f"no greedy cover for kind {kind!r}") from None


# -- exhaustive oracle -------------------------------------------------------


def _circle_centers(arr: np.ndarray, r: float) -> list[tuple[float, float]]:
    centers = [tuple(p) for p in arr]
    for a, b in combinations(range(len(arr)), 2):
        p, q = arr[a], arr[b]
        d = float(np.linalg.norm(q - p))
        if d > 2 * r + EPS_GEOM:
            continue
        mid = (p + q) / 2
        centers.append(tuple(mid))
        h = math.sqrt(max(r * r - (d / 2) ** 2, 0.0))
        if d > 0 and h > 0:
            perp = np.array([-(q - p)[1], (q - p)[0]]) / d
            centers.append(tuple(mid + h * perp))
            centers.append(tuple(mid - h * perp))
    for a, b, c in combinations(range(len(arr)), 3):
        cc = _circumcenter(arr[a], arr[b], arr[c])
        if cc is not None and np.linalg.norm(arr[a] - cc) <= r + EPS_GEOM:
            centers.append(tuple(cc))
    return centers


def _circumcenter(a, b, c):
    d = 2 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if abs(d) < 1e-15:
        return None
    sa, sb, sc = a @ a, b @ b, c @ c
    ux = (sa * (b[1] - c[1]) + sb * (c[1] - a[1]) + sc * (a[1] - b[1])) / d
    uy = (sa * (c[0] - b[0]) + sb * (a[0] - c[0]) + sc * (b[0] - a[0])) / d
    return np.array([ux, uy])


def candidate_areas(ps: PointSet, kind: str, ell: float) -> list[Shape]:
    """Canonical placements sufficient for an exact minimum cover.

    Boxes: every corner drawn from the point coordinates (a cover can always be
    slid up/right until points touch its lower faces).  Circles: circles pinned
    by one, two or three points.
    """
    arr = ps.array
    if kind in (AXIS_SQUARE, AXIS_CUBE):
        per_axis = [sorted(set(arr[:, a])) for a in range(ps.dim)]
        return [Shape(kind, ell, anchor) for anchor in product(*per_axis)]
    if kind == CIRCLE:
        return [Shape(CIRCLE, ell, c) for c in _circle_centers(arr, ell / 2)]
    raise GeometryError(f"oracle does not support kind {kind!r}")


def _maximal_masks(masks: set[int]) -> list[int]:
    ordered = sorted(masks, key=lambda m: -bin(m).count("1"))
    keep: list[int] = []
    for m in ordered:
        if not any(m | k == k for k in keep):
            keep.append(m)
    return keep


def optimal_cover_oracle(ps: PointSet, kind: str, ell: float, cap: int | None = None) -> int | None:
    """Minimum number of ``kind`` areas of size ``ell`` covering ``ps``.

    Returns ``None`` when the optimum exceeds ``cap``.  Exhaustive, so only
    instances of at most 12 points are accepted.
    """
    n = len(ps)
    if n > ORACLE_MAX_POINTS:
        raise ValueError(f"oracle is limited to {ORACLE_MAX_POINTS} points, got {n}")
    expected_dim = 3 if kind == AXIS_CUBE else 2
    if ps.dim != expected_dim:
        raise GeometryError(f"{kind} oracle needs {expected_dim}-D points")
    masks = set()
    for shape in candidate_areas(ps, kind, ell):
        m = 0
        for i in np.flatnonzero(contains_many(shape, ps.array)):
            m |= 1 << int(i)
        if m:
            masks.add(m)
    cands = _maximal_masks(masks)
    by_point = [[m for m in cands if m >> i & 1] for i in range(n)]
    full = (1 << n) - 1

    @lru_cache(maxsize=None)
    def best(uncovered: int) -> int:
        if not uncovered:
            return 0
        low = (uncovered & -uncovered).bit_length() - 1
        return 1 + min(best(uncovered & ~m) for m in by_point[low])

    k = best(full)
    if cap is not None and k > cap:
        return None
    return k


class CoverageNumber(NamedTuple):
    value: int
    exact: bool


def coverage_number(ps: PointSet, f_kind: str, ell: float) -> CoverageNumber:
    """Fewest fault-sized areas covering every process.

    Exact (via the oracle) for axis squares, circles and axis cubes on at most
    12 points.  Otherwise the greedy cover size is returned as an upper bound
    with ``exact=False``; oriented kinds use their axis-aligned counterpart,
    which is one admissible orientation.
    """
    kind = {ORIENTED_SQUARE: AXIS_SQUARE, ORIENTED_CUBE: AXIS_CUBE}.get(f_kind, f_kind)
    exact_kind = kind == f_kind
    if kind in (AXIS_SQUARE, CIRCLE, AXIS_CUBE) and len(ps) <= ORACLE_MAX_POINTS:
        return CoverageNumber(optimal_cover_oracle(ps, kind, ell), exact_kind)
    return CoverageNumber(len(greedy_cover(ps, kind, ell)), False)


# -- overlap -------------------------------------------------------------------


def overlap_count(cs: CoverSet, f: Shape) -> int:
    return sum(1 for a in cs.areas if shapes_overlap(a, f))


class OverlapKey(Enum):
    """Fault shape and size relative to the cover size, orientation, cover kind."""

    SQUARE_ANY = ("square", 1.0, "any", "square")
    SQUARE_AXIS = ("square", 1.0, "axis", "square")
    HALF_DIAG_SQUARE_COVER = ("square|circle", 1 / math.sqrt(2), "any", "square")
    CIRCLE_CIRCLE = ("circle", 1.0, "any", "circle")
    HALF_DIAG_CIRCLE_CIRCLE = ("circle", 1 / math.sqrt(2), "any", "circle")
    DIAG_CIRCLE_SQUARE_COVER = ("circle", math.sqrt(2), "any", "square")
    DIAG_CIRCLE_CIRCLE = ("circle", math.sqrt(2), "any", "circle")
    CUBE_ANY = ("cube", 1.0, "any", "cube")
    CUBE_AXIS = ("cube", 1.0, "axis", "cube")
    SPHERE_SPHERE = ("sphere", 1.0, "any", "sphere")

    @property
    def fault_shapes(self) -> tuple[str, ...]:
        return tuple(self.value[0].split("|"))

    @property
    def ratio(self) -> float:
        return self.value[1]

    @property
    def alignment(self) -> str:
        return self.value[2]

    @property
    def cover_shape(self) -> str:
        return self.value[3]


_PUBLISHED_BOUNDS = {
    OverlapKey.SQUARE_ANY: 7,
    OverlapKey.SQUARE_AXIS: 4,
    OverlapKey.HALF_DIAG_SQUARE_COVER: 4,
    OverlapKey.CIRCLE_CIRCLE: 28,
    OverlapKey.HALF_DIAG_CIRCLE_CIRCLE: 16,
    OverlapKey.DIAG_CIRCLE_SQUARE_COVER: 8,
    OverlapKey.DIAG_CIRCLE_CIRCLE: 32,
    OverlapKey.CUBE_ANY: 27,
    OverlapKey.CUBE_AXIS: 8,
    OverlapKey.SPHERE_SPHERE: 108,
}

# gsphere splits each cube into 8 octant spheres instead of 4.  A sphere of
# diameter ell reaches spheres of at most 3 x 3 x 3 cubes, hence 27 * 8.
_IMPLEMENTED_BOUNDS = dict(_PUBLISHED_BOUNDS)
_IMPLEMENTED_BOUNDS[OverlapKey.SPHERE_SPHERE] = 216

BOUND_TABLES = {"published": _PUBLISHED_BOUNDS, "implemented": _IMPLEMENTED_BOUNDS}


def overlap_bound(key: OverlapKey | str, table: str = "published") -> int:
    """Maximum number of cover areas one fault area can overlap."""
    if isinstance(key, str):
        try:
            key = OverlapKey[key]
        except KeyError:
            raise KeyError(f"unknown overlap key {key!r}") from None
    try:
        return BOUND_TABLES[table][key]
    except KeyError:
        raise KeyError(f"unknown overlap table {table!r} or key {key!r}") from None


def resolve_key(shape: str, ratio: float, alignment: str, cover: str) -> OverlapKey:
    """Table row for a fault template; an axis-aligned box falls back to the any-orientation row."""
    matches = [
        key
        for key in OverlapKey
        if shape in key.fault_shapes
        and key.cover_shape == cover
        and math.isclose(ratio, key.ratio, rel_tol=1e-9)
    ]
    for want in (alignment, "any"):
        for key in matches:
            if key.alignment == want:
                return key
    raise KeyError(f"no overlap bound for {shape} ratio={ratio:g} {alignment} over {cover} covers")


# -- batched overlap counts for Monte-Carlo ----------------------------------


def _box_axes_batch(kind: str, rotations: np.ndarray, n: int) -> np.ndarray:
    """(n, d, d) column-axis matrices for a batch of fault boxes."""
    if kind == ORIENTED_SQUARE:
        c, s = np.cos(rotations), np.sin(rotations)
        return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    if kind == ORIENTED_CUBE:
        w, x, y, z = (rotations[:, k] for k in range(4))
        return np.stack(
            [
                np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], -1),
                np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], -1),
                np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], -1),
            ],
            -2,
        )
    dim = 2 if kind == AXIS_SQUARE else 3
    return np.broadcast_to(np.eye(dim), (n, dim, dim))


def overlap_counts_batch(
    cs: CoverSet,
    f_kind: str,
    f_size: float,
    anchors: np.ndarray,
    rotations: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorized ``overlap_count`` for many placements of one fault template.

    ``anchors`` is (n, d); ``rotations`` is (n,) angles for oriented squares
    or (n, 4) quaternions for oriented cubes.
    """
    anchors = np.asarray(anchors, dtype=float)
    n, dim = anchors.shape
    cover_lo = np.array([a.anchor for a in cs.areas], dtype=float)  # (k, d)
    ell = cs.size
    f_is_ball = f_kind in (CIRCLE, SPHERE)
    cover_is_ball = cs.kind in (CIRCLE, SPHERE)

    if f_is_ball and cover_is_ball:
        d2 = np.sum((anchors[:, None, :] - cover_lo[None, :, :]) ** 2, axis=-1)
        return np.sum(d2 <= ((f_size + ell) / 2 + EPS_GEOM) ** 2, axis=1)

    if f_is_ball:
        # cover boxes are axis-aligned
        nearest = np.clip(anchors[:, None, :], cover_lo[None], cover_lo[None] + ell)
        d2 = np.sum((anchors[:, None, :] - nearest) ** 2, axis=-1)
        return np.sum(d2 <= (f_size / 2 + EPS_GEOM) ** 2, axis=1)

    axes = _box_axes_batch(f_kind, rotations, n)  # (n, d, d), columns are axes

    if cover_is_ball:
        local = np.einsum("nkd,nde->nke", cover_lo[None] - anchors[:, None, :], axes)
        nearest = np.clip(local, 0.0, f_size)
        d2 = np.sum((local - nearest) ** 2, axis=-1)
        return np.sum(d2 <= (ell / 2 + EPS_GEOM) ** 2, axis=1)

    # box-box separating-axis test; cover boxes are axis-aligned
    f_center = anchors + np.einsum("nde,e->nd", axes, np.full(dim, f_size / 2))
    c_center = cover_lo + ell / 2
    cand = [np.broadcast_to(np.eye(dim)[i], (n, dim)) for i in range(dim)]
    cand += [axes[:, :, i] for i in range(dim)]
    if dim == 3:
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1.0
            for j in range(3):
                c = np.cross(np.broadcast_to(e, (n, 3)), axes[:, :, j])
                norm = np.linalg.norm(c, axis=1, keepdims=True)
                cand.append(np.where(norm > 1e-12, c / np.maximum(norm, 1e-300), 0.0))
    overlap = np.ones((n, len(cs.areas)), dtype=bool)
    for u in cand:  # u: (n, d)
        r_cover = (ell / 2) * np.sum(np.abs(u), axis=1)  # (n,)
        r_fault = (f_size / 2) * np.sum(np.abs(np.einsum("nd,nde->ne", u, axes)), axis=1)
        gap = np.abs(np.sum(u[:, None, :] * (f_center[:, None, :] - c_center[None]), axis=-1))
        overlap &= gap <= (r_cover + r_fault)[:, None] + EPS_GEOM
    return np.sum(overlap, axis=1)
