"""Convex cells in one and two dimensions.

A polytope is an interval ``[a, b]`` (d=1) or a strictly convex polygon with
counter-clockwise vertices (d=2). Hyperplanes are written ``{x : <x, u> = r}``
with ``u`` the unit NORMAL in the upper half-circle, so ``theta = pi/2`` gives
``u = (0, 1)`` and therefore horizontal lines.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np

TOL_GEOM = 1e-12
TOL_SPLIT = 1e-10
# sin of the turning angle below which a polygon vertex is treated as collinear
TOL_TURN = 1e-10
TOL_TOUCH = 1e-9

Point = tuple[float, ...]


class GeometryError(ValueError):
    pass


class NotHitting(GeometryError):
    pass


class DegenerateChild(GeometryError):
    pass


@dataclass(frozen=True)
class Polytope:
    vertices: tuple[Point, ...]

    def __post_init__(self) -> None:
        _check_vertices(self.vertices)

    @classmethod
    def interval(cls, a: float, b: float) -> Polytope:
        return cls(((float(a),), (float(b),)))

    @classmethod
    def polygon(cls, points: Iterable[Sequence[float]]) -> Polytope:
        ring = [(float(p[0]), float(p[1])) for p in points]
        if _signed_area(ring) < 0:
            ring.reverse()
        return cls(tuple(_canonical_ring(ring)))

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float]) -> Polytope:
        if len(lo) == 1:
            return cls.interval(lo[0], hi[0])
        (x0, y0), (x1, y1) = lo, hi
        return cls.polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])

    @classmethod
    def cube(
        cls, dimension: int, side: float, centre: Optional[Sequence[float]] = None
    ) -> Polytope:
        c = tuple(centre) if centre is not None else (0.0,) * dimension
        half = side / 2.0
        return cls.box([x - half for x in c], [x + half for x in c])

    @property
    def dimension(self) -> int:
        return len(self.vertices[0])

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @cached_property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.array.min(axis=0), self.array.max(axis=0)

    def translate(self, x: Sequence[float]) -> Polytope:
        shift = tuple(float(v) for v in x)
        return Polytope(tuple(tuple(a + b for a, b in zip(v, shift)) for v in self.vertices))


def _check_vertices(vertices: tuple[Point, ...]) -> None:
    if not vertices:
        raise GeometryError("polytope needs vertices")
    d = len(vertices[0])
    if d not in (1, 2) or any(len(v) != d for v in vertices):
        raise GeometryError("only dimensions 1 and 2 are supported")
    if not all(math.isfinite(c) for v in vertices for c in v):
        raise GeometryError("non-finite vertex coordinate")
    if d == 1:
        if len(vertices) != 2:
            raise GeometryError("an interval has exactly two endpoints")
        if vertices[1][0] - vertices[0][0] <= TOL_GEOM:
            raise GeometryError("interval must satisfy b - a > tol_geom")
        return
    n = len(vertices)
    if n < 3:
        raise GeometryError("a polygon needs at least three vertices")
    for i in range(n):
        (ax, ay), (bx, by), (cx, cy) = vertices[i - 1], vertices[i], vertices[(i + 1) % n]
        if math.hypot(bx - ax, by - ay) <= TOL_GEOM:
            raise GeometryError("consecutive vertices closer than tol_geom")
        if (bx - ax) * (cy - by) - (by - ay) * (cx - bx) <= 0.0:
            raise GeometryError("polygon must be strictly convex and counter-clockwise")
    if _signed_area(vertices) <= TOL_GEOM:
        raise GeometryError("polygon area must exceed tol_geom")


def _signed_area(ring: Sequence[Sequence[float]]) -> float:
    n = len(ring)
    if n < 3:
        return 0.0
    x0, y0 = ring[0]
    total = 0.0
    for i in range(1, n - 1):
        ax, ay = ring[i][0] - x0, ring[i][1] - y0
        bx, by = ring[i + 1][0] - x0, ring[i + 1][1] - y0
        total += ax * by - ay * bx
    return 0.5 * total


def _canonical_ring(ring: list[Point]) -> list[Point]:
    """Collapse vertices closer than tol_geom and drop collinear ones."""
    pts = list(ring)
    changed = True
    while changed and len(pts) >= 3:
        changed = False
        out: list[Point] = []
        for p in pts:
            if out and math.dist(out[-1], p) <= TOL_GEOM:
                changed = True
                continue
            out.append(p)
        if len(out) > 1 and math.dist(out[0], out[-1]) <= TOL_GEOM:
            out.pop()
            changed = True
        pts = out
        n = len(pts)
        if n < 3:
            break
        for i in range(n):
            (ax, ay), (bx, by), (cx, cy) = pts[i - 1], pts[i], pts[(i + 1) % n]
            e1x, e1y, e2x, e2y = bx - ax, by - ay, cx - bx, cy - by
            cross = e1x * e2y - e1y * e2x
            if cross <= TOL_TURN * math.hypot(e1x, e1y) * math.hypot(e2x, e2y):
                del pts[i]
                changed = True
                break
    return pts


class _Shape:
    """Marker base for anything exposing a ``polytope``."""

    polytope: Polytope


PolytopeLike = Union[Polytope, _Shape]


def _poly(p: PolytopeLike) -> Polytope:
    return p if isinstance(p, Polytope) else p.polytope


@dataclass(frozen=True)
class SpatialHyperplane:
    normal: tuple[float, ...]
    offset: float

    def __post_init__(self) -> None:
        norm = math.hypot(*self.normal)
        if abs(norm - 1.0) > 1e-9:
            raise GeometryError("hyperplane normal must be a unit vector")
        if len(self.normal) == 2:
            ux, uy = self.normal
            if uy < -TOL_GEOM or (abs(uy) <= TOL_GEOM and ux < 0):
                raise GeometryError("hyperplane normal must lie in the upper half-circle")
        elif self.normal != (1.0,):
            raise GeometryError("the only direction in d=1 is u=1")

    @classmethod
    def from_angle(cls, theta: float, offset: float) -> SpatialHyperplane:
        theta = math.fmod(theta, 2.0 * math.pi)
        if theta < 0:
            theta += 2.0 * math.pi
        if theta >= math.pi:
            theta -= math.pi
            offset = -offset
        if theta >= math.pi:
            theta = 0.0
        return cls((math.cos(theta), math.sin(theta)), float(offset))

    @classmethod
    def point(cls, offset: float) -> SpatialHyperplane:
        return cls((1.0,), float(offset))

    @property
    def dimension(self) -> int:
        return len(self.normal)

    @property
    def theta(self) -> float:
        if len(self.normal) == 1:
            return 0.0
        return math.atan2(self.normal[1], self.normal[0])

    def translate(self, x: Sequence[float]) -> SpatialHyperplane:
        return SpatialHyperplane(self.normal, self.offset + float(np.dot(self.normal, x)))


@dataclass(frozen=True)
class Cell(_Shape):
    polytope: Polytope
    colour: int = 0
    birth_time: float = 0.0
    cell_id: int = -1

    def __post_init__(self) -> None:
        if not 0.0 <= self.birth_time <= 1.0:
            raise GeometryError("birth_time must lie in [0, 1]")
        if self.colour < 0:
            raise GeometryError("colour labels are non-negative indices")

    def translate(self, x: Sequence[float]) -> Cell:
        return Cell(self.polytope.translate(x), self.colour, self.birth_time, self.cell_id)


@dataclass(frozen=True)
class BicolouredHyperplane:
    spatial: SpatialHyperplane
    colour_plus: int = 0
    colour_minus: int = 0

    @property
    def normal(self) -> tuple[float, ...]:
        return self.spatial.normal

    @property
    def offset(self) -> float:
        return self.spatial.offset

    def translate(self, x: Sequence[float]) -> BicolouredHyperplane:
        return BicolouredHyperplane(self.spatial.translate(x), self.colour_plus, self.colour_minus)


def area(p: PolytopeLike) -> float:
    p = _poly(p)
    if p.dimension == 1:
        return p.vertices[1][0] - p.vertices[0][0]
    return _signed_area(p.vertices)


def perimeter(p: PolytopeLike) -> float:
    p = _poly(p)
    if p.dimension == 1:
        return 2.0
    return sum(math.dist(a, b) for a, b in edges(p))


def edges(p: PolytopeLike) -> list[tuple[Point, Point]]:
    v = _poly(p).vertices
    return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]


def centroid(p: PolytopeLike) -> Point:
    p = _poly(p)
    if p.dimension == 1:
        a, b = p.vertices[0][0], p.vertices[1][0]
        return (a + 0.5 * (b - a),)
    x0, y0 = p.vertices[0]
    rel = p.array - (x0, y0)
    x, y = rel[:, 0], rel[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a6 = 3.0 * cross.sum()
    cx = float(((x + xn) * cross).sum() / a6)
    cy = float(((y + yn) * cross).sum() / a6)
    return (x0 + cx, y0 + cy)


def radius(p: PolytopeLike) -> float:
    p = _poly(p)
    m = np.asarray(centroid(p))
    return float(np.max(np.linalg.norm(p.array - m, axis=1)))


def directional_support(p: PolytopeLike, u: Union[float, Sequence[float]]) -> tuple[float, float]:
    p = _poly(p)
    direction = np.atleast_1d(np.asarray(u, dtype=float))
    proj = p.array @ direction
    return float(proj.min()), float(proj.max())


def width(p: PolytopeLike, u: Union[float, Sequence[float]]) -> float:
    lo, hi = directional_support(p, u)
    return hi - lo


def hits_interior(p: PolytopeLike, eta: Union[SpatialHyperplane, BicolouredHyperplane]) -> bool:
    spatial = eta.spatial if isinstance(eta, BicolouredHyperplane) else eta
    lo, hi = directional_support(p, spatial.normal)
    return lo + TOL_SPLIT < spatial.offset < hi - TOL_SPLIT


def _clip(ring: Sequence[Point], dist: Sequence[float], keep: int) -> list[Point]:
    """Sutherland-Hodgman step keeping the vertices with ``keep * dist >= 0``."""
    out: list[Point] = []
    n = len(ring)
    for i in range(n):
        a, b = ring[i - 1], ring[i]
        da, db = dist[i - 1], dist[i]
        a_in, b_in = keep * da >= 0.0, keep * db >= 0.0
        if a_in != b_in and da != 0.0 and db != 0.0:
            t = da / (da - db)
            out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
        if b_in:
            out.append(b)
    return out


def _to_child(ring: list[Point]) -> Polytope:
    ring = _canonical_ring(ring)
    if len(ring) < 3:
        raise DegenerateChild("split produced a polygon with fewer than three vertices")
    try:
        return Polytope(tuple(ring))
    except GeometryError as e:
        raise DegenerateChild(str(e)) from None


def split(p: PolytopeLike, eta: SpatialHyperplane) -> tuple[Polytope, Polytope]:
    """Cut ``p`` by ``eta`` into ``(p ∩ {<x,u> >= r}, p ∩ {<x,u> <= r})``."""
    p = _poly(p)
    lo, hi = directional_support(p, eta.normal)
    r = eta.offset
    if not lo + TOL_SPLIT < r < hi - TOL_SPLIT:
        raise NotHitting(f"hyperplane offset {r!r} outside support ({lo!r}, {hi!r})")
    if p.dimension == 1:
        a, b = p.vertices[0][0], p.vertices[1][0]
        try:
            return Polytope.interval(r, b), Polytope.interval(a, r)
        except GeometryError as e:
            raise DegenerateChild(str(e)) from None
    dist = [float(v) for v in (p.array @ np.asarray(eta.normal)) - r]
    plus = _to_child(_clip(p.vertices, dist, 1))
    minus = _to_child(_clip(p.vertices, dist, -1))
    return plus, minus


def retract(p: PolytopeLike, eps: float) -> Polytope:
    p = _poly(p)
    if not 0.0 < eps <= 1.0:
        raise GeometryError("retraction factor must lie in (0, 1]")
    if eps == 1.0:
        return p
    m = centroid(p)
    pts = [tuple(mi + eps * (vi - mi) for vi, mi in zip(v, m)) for v in p.vertices]
    try:
        return Polytope(tuple(pts))
    except GeometryError as e:
        raise DegenerateChild(str(e)) from None


def retracted_support(p: PolytopeLike, eps: float, u: Sequence[float]) -> tuple[float, float]:
    """Support interval of the eps-retraction without building the polytope."""
    lo, hi = directional_support(p, u)
    mu = float(np.dot(centroid(p), u))
    return mu + eps * (lo - mu), mu + eps * (hi - mu)


def _boxes_touch(p: Polytope, q: Polytope, pad: float) -> bool:
    plo, phi = p.bounds
    qlo, qhi = q.bounds
    return bool(np.all(plo <= qhi + pad) and np.all(qlo <= phi + pad))


def _touch_tol(p: Polytope, q: Polytope) -> float:
    scale = 1.0 + max(float(np.abs(p.array).max()), float(np.abs(q.array).max()))
    return TOL_TOUCH * scale


def segment_overlap(a: Point, b: Point, c: Point, d: Point, tol: float) -> float:
    """Length of the common part of two segments when they are collinear, else 0."""
    ex, ey = b[0] - a[0], b[1] - a[1]
    length = math.hypot(ex, ey)
    if length <= TOL_GEOM:
        return 0.0
    tx, ty = ex / length, ey / length
    nx, ny = -ty, tx
    if abs((c[0] - a[0]) * nx + (c[1] - a[1]) * ny) > tol:
        return 0.0
    if abs((d[0] - a[0]) * nx + (d[1] - a[1]) * ny) > tol:
        return 0.0
    s1 = (c[0] - a[0]) * tx + (c[1] - a[1]) * ty
    s2 = (d[0] - a[0]) * tx + (d[1] - a[1]) * ty
    return max(0.0, min(length, max(s1, s2)) - max(0.0, min(s1, s2)))


def shared_boundary_length(p: PolytopeLike, q: PolytopeLike) -> float:
    p, q = _poly(p), _poly(q)
    tol = _touch_tol(p, q)
    if p.dimension == 1:
        (a,), (b,) = p.vertices
        (c,), (d,) = q.vertices
        return 1.0 if abs(b - c) <= tol or abs(d - a) <= tol else 0.0
    if not _boxes_touch(p, q, tol):
        return 0.0
    total = 0.0
    q_edges = edges(q)
    for a, b in edges(p):
        for c, d in q_edges:
            total += segment_overlap(a, b, c, d, tol)
    return total


def _inward_halfplanes(p: Polytope) -> list[tuple[float, float, float]]:
    """(nx, ny, c) with interior {<x, n> >= c} for every edge of a ccw polygon."""
    out = []
    for (ax, ay), (bx, by) in edges(p):
        ex, ey = bx - ax, by - ay
        length = math.hypot(ex, ey)
        nx, ny = -ey / length, ex / length
        out.append((nx, ny, nx * ax + ny * ay))
    return out


def intersect(p: PolytopeLike, q: PolytopeLike) -> Optional[Polytope]:
    p, q = _poly(p), _poly(q)
    if p.dimension == 1:
        lo = max(p.vertices[0][0], q.vertices[0][0])
        hi = min(p.vertices[1][0], q.vertices[1][0])
        return Polytope.interval(lo, hi) if hi - lo > TOL_GEOM else None
    if not _boxes_touch(p, q, 0.0):
        return None
    ring: list[Point] = list(p.vertices)
    for nx, ny, c in _inward_halfplanes(q):
        dist = [nx * x + ny * y - c for x, y in ring]
        ring = _clip(ring, dist, 1)
        if len(ring) < 3:
            return None
    ring = _canonical_ring(ring)
    if len(ring) < 3:
        return None
    try:
        return Polytope(tuple(ring))
    except GeometryError:
        return None


def inset_distance(inner: PolytopeLike, outer: PolytopeLike) -> float:
    """Largest r with ``inner + B_r`` inside ``outer`` (negative when inner sticks out)."""
    inner, outer = _poly(inner), _poly(outer)
    if outer.dimension == 1:
        return min(
            inner.vertices[0][0] - outer.vertices[0][0],
            outer.vertices[1][0] - inner.vertices[1][0],
        )
    pts = inner.array
    return min(
        float((pts @ np.asarray((nx, ny))).min() - c) for nx, ny, c in _inward_halfplanes(outer)
    )


def contains(outer: PolytopeLike, inner: PolytopeLike, margin: float = TOL_GEOM) -> bool:
    """True when ``inner`` lies in the interior of ``outer`` with the given margin."""
    return inset_distance(inner, outer) > margin


def contains_point(p: PolytopeLike, x: Sequence[float]) -> bool:
    p = _poly(p)
    if p.dimension == 1:
        return p.vertices[0][0] <= x[0] <= p.vertices[1][0]
    return all(nx * x[0] + ny * x[1] >= c - TOL_GEOM for nx, ny, c in _inward_halfplanes(p))


def diameters(p: PolytopeLike) -> tuple[float, float]:
    lo, hi = _poly(p).bounds
    span = hi - lo
    if len(span) == 1:
        return float(span[0]), 0.0
    return float(span[0]), float(span[1])


def translate(p: PolytopeLike, x: Sequence[float]) -> Polytope:
    return _poly(p).translate(x)
