"""Axis-aligned 3D primitives and exact l1 kernels.

All coordinates are Python ints, so every comparison here is exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class GeometryError(ValueError):
    pass


class Point3(NamedTuple):
    x: int
    y: int
    z: int


def as_point(p: Sequence[int]) -> Point3:
    if len(p) != 3:
        raise GeometryError(f"expected 3 coordinates, got {p!r}")
    return Point3(*(_exact(c) for c in p))


def _exact(c) -> int:
    if isinstance(c, bool):
        raise GeometryError(f"non-numeric coordinate {c!r}")
    if isinstance(c, int):
        return c
    if isinstance(c, float) and c.is_integer():
        return int(c)
    raise GeometryError(f"coordinate {c!r} is not an integer")


def differing_axes(p: Sequence[int], q: Sequence[int]) -> list[int]:
    return [i for i in range(3) if p[i] != q[i]]


@dataclass(frozen=True)
class Segment3:
    a: Point3
    b: Point3

    def __post_init__(self):
        if len(differing_axes(self.a, self.b)) != 1:
            raise GeometryError(f"segment {self.a}-{self.b} is not axis-aligned")

    @property
    def length(self) -> int:
        return l1_point_distance(self.a, self.b)

    def extent(self) -> tuple[Point3, Point3]:
        return _extent(self.a, self.b)


@dataclass(frozen=True)
class Box3:
    min: Point3
    max: Point3

    def __post_init__(self):
        if any(self.min[i] > self.max[i] for i in range(3)):
            raise GeometryError(f"box min {self.min} exceeds max {self.max}")

    @classmethod
    def of(cls, lo: Sequence[int], hi: Sequence[int]) -> "Box3":
        return cls(as_point(lo), as_point(hi))

    @classmethod
    def point(cls, p: Sequence[int]) -> "Box3":
        p = as_point(p)
        return cls(p, p)

    def contains(self, p: Sequence[int]) -> bool:
        return all(self.min[i] <= p[i] <= self.max[i] for i in range(3))

    def contains_box(self, other: "Box3") -> bool:
        return self.contains(other.min) and self.contains(other.max)

    def strictly_contains(self, p: Sequence[int]) -> bool:
        return all(self.min[i] < p[i] < self.max[i] for i in range(3))

    def intersects(self, other: "Box3") -> bool:
        return all(self.min[i] <= other.max[i] and other.min[i] <= self.max[i] for i in range(3))

    def inflate(self, c: int) -> "Box3":
        return Box3(Point3(*(v - c for v in self.min)), Point3(*(v + c for v in self.max)))

    def corners_per_axis(self) -> list[set[int]]:
        return [{self.min[i], self.max[i]} for i in range(3)]


SOLID_BOX = "solid_box"
WALL_WITH_OPENINGS = "wall_with_openings"


@dataclass(frozen=True)
class Obstacle:
    """A solid box, or a slab with rectangular through-openings.

    ``clearance`` inflates the solid part (l-infinity) and shrinks the
    openings by the same amount.
    """

    kind: str
    box: Box3
    openings: tuple[Box3, ...] = field(default=())
    clearance: int = 0

    def __post_init__(self):
        if self.kind not in (SOLID_BOX, WALL_WITH_OPENINGS):
            raise GeometryError(f"unknown obstacle kind {self.kind!r}")
        if self.clearance < 0:
            raise GeometryError("obstacle clearance must be >= 0")
        if self.kind == SOLID_BOX and self.openings:
            raise GeometryError("solid_box obstacles cannot have openings")
        for i, o in enumerate(self.openings):
            if not self.box.contains_box(o):
                raise GeometryError(f"opening {i} lies outside its slab")
            for o2 in self.openings[i + 1:]:
                if o.intersects(o2):
                    raise GeometryError("wall openings must be pairwise disjoint")

    @classmethod
    def solid(cls, lo, hi, clearance: int = 0) -> "Obstacle":
        return cls(SOLID_BOX, Box3.of(lo, hi), (), clearance)

    @classmethod
    def wall(cls, lo, hi, openings: Iterable[tuple], clearance: int = 0) -> "Obstacle":
        return cls(WALL_WITH_OPENINGS, Box3.of(lo, hi),
                   tuple(Box3.of(a, b) for a, b in openings), clearance)


def _extent(a: Sequence[int], b: Sequence[int]) -> tuple[Point3, Point3]:
    return (Point3(min(a[0], b[0]), min(a[1], b[1]), min(a[2], b[2])),
            Point3(max(a[0], b[0]), max(a[1], b[1]), max(a[2], b[2])))


def interval_gap(lo1: int, hi1: int, lo2: int, hi2: int) -> int:
    return max(0, max(lo1, lo2) - min(hi1, hi2))


def l1_point_distance(p: Sequence[int], q: Sequence[int]) -> int:
    return abs(p[0] - q[0]) + abs(p[1] - q[1]) + abs(p[2] - q[2])


def box_gap(lo1, hi1, lo2, hi2) -> int:
    """l1 distance between two closed axis-aligned boxes given by extents."""
    return (interval_gap(lo1[0], hi1[0], lo2[0], hi2[0])
            + interval_gap(lo1[1], hi1[1], lo2[1], hi2[1])
            + interval_gap(lo1[2], hi1[2], lo2[2], hi2[2]))


def _check_aligned(a, b):
    if len(differing_axes(a, b)) > 1:
        raise GeometryError(f"segment {tuple(a)}-{tuple(b)} is not axis-aligned")


def raw_segment_distance(a1, b1, a2, b2) -> int:
    """l1 distance between segments given by endpoints; points are allowed."""
    _check_aligned(a1, b1)
    _check_aligned(a2, b2)
    lo1, hi1 = _extent(a1, b1)
    lo2, hi2 = _extent(a2, b2)
    return box_gap(lo1, hi1, lo2, hi2)


def l1_segment_distance(s: Segment3, t: Segment3) -> int:
    # Separable: the l1 minimum over a product of intervals is the sum of
    # per-axis interval gaps.
    return raw_segment_distance(s.a, s.b, t.a, t.b)


def l1_segment_polyline_distance(s: Segment3 | tuple, polyline: Sequence[Sequence[int]]) -> int:
    if len(polyline) < 2:
        raise GeometryError("polyline needs at least 2 points")
    a, b = (s.a, s.b) if isinstance(s, Segment3) else s
    return min(raw_segment_distance(a, b, polyline[i], polyline[i + 1])
               for i in range(len(polyline) - 1))


def point_polyline_distance(p: Sequence[int], polyline: Sequence[Sequence[int]]) -> int:
    return l1_segment_polyline_distance((p, p), polyline)


def point_on_polyline(p: Sequence[int], polyline: Sequence[Sequence[int]]) -> bool:
    return point_polyline_distance(p, polyline) == 0


def _hits(lo: Point3, hi: Point3, o: Obstacle) -> bool:
    c = o.clearance
    slab = o.box.inflate(c)
    if not slab.intersects(Box3(lo, hi)):
        return False
    if o.kind == SOLID_BOX:
        return True
    # Clip the query to the slab; it is clear only if one opening (open set,
    # shrunk by the clearance) contains the whole clipped piece. Openings are
    # disjoint, so two of them can never jointly cover a connected set.
    # Along an axis where the opening spans the full slab it is a tunnel and
    # imposes nothing.
    clo = [max(lo[i], slab.min[i]) for i in range(3)]
    chi = [min(hi[i], slab.max[i]) for i in range(3)]
    for op in o.openings:
        if all(_through(op, o.box, i) or (op.min[i] + c < clo[i] and chi[i] < op.max[i] - c)
               for i in range(3)):
            return False
    return True


def _through(op: Box3, slab: Box3, axis: int) -> bool:
    return op.min[axis] <= slab.min[axis] and op.max[axis] >= slab.max[axis]


def segment_hits_obstacle(s: Segment3 | tuple, o: Obstacle) -> bool:
    a, b = (s.a, s.b) if isinstance(s, Segment3) else s
    _check_aligned(a, b)
    lo, hi = _extent(a, b)
    return _hits(lo, hi, o)


def point_hits_obstacle(p: Sequence[int], o: Obstacle) -> bool:
    p = Point3(*p)
    return _hits(p, p, o)


def gap_sum_to_many(lo: np.ndarray, hi: np.ndarray, los: np.ndarray, his: np.ndarray) -> np.ndarray:
    """Vectorised box_gap of one extent (shape (3,)) against many (shape (n, 3))."""
    g = np.maximum(lo, los) - np.minimum(hi, his)
    return np.maximum(g, 0).sum(axis=1)
