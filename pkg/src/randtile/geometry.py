"""Exact rational geometry for tiles: boxes in any dimension and polygons in 2D.

All coordinates are `fractions.Fraction`; every predicate used for rule
validation and region decomposition is decided exactly.  Float arithmetic only
enters through an optional linear embedding (used for metric quantities such
as distances to disks and SVG output).
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import StructuralError

Point = tuple  # tuple of Fraction


def frac(x) -> Fraction:
    """Coerce ints, strings like '3/4', and floats to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


def fpoint(p) -> Point:
    return tuple(frac(c) for c in p)


def vadd(a: Point, b: Point) -> Point:
    return tuple(x + y for x, y in zip(a, b))


def vsub(a: Point, b: Point) -> Point:
    return tuple(x - y for x, y in zip(a, b))


def vscale(s, a: Point) -> Point:
    return tuple(s * x for x in a)


def cross(o: Point, a: Point, b: Point):
    """2D cross product (a-o) x (b-o)."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


class Box:
    """Axis-aligned box [lo, hi] in dimension d >= 1."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        self.lo = fpoint(lo)
        self.hi = fpoint(hi)
        if len(self.lo) != len(self.hi):
            raise StructuralError("box corner dimensions differ")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise StructuralError("box must have positive extent")

    @property
    def dim(self):
        return len(self.lo)

    def volume(self) -> Fraction:
        v = Fraction(1)
        for l, h in zip(self.lo, self.hi):
            v *= h - l
        return v

    def transform(self, theta, tau) -> "Box":
        theta = frac(theta)
        tau = fpoint(tau)
        return Box(vadd(vscale(theta, self.lo), tau), vadd(vscale(theta, self.hi), tau))

    def translate(self, tau) -> "Box":
        return self.transform(1, tau)

    def bbox(self):
        return self.lo, self.hi

    def centroid(self) -> Point:
        return tuple((l + h) / 2 for l, h in zip(self.lo, self.hi))

    def vertices_list(self):
        if self.dim == 1:
            return [self.lo, self.hi]
        if self.dim == 2:
            (x0, y0), (x1, y1) = self.lo, self.hi
            return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        raise StructuralError("vertex list only for d <= 2 boxes")

    def contains_point(self, p, strict=False) -> bool:
        p = fpoint(p)
        if strict:
            return all(l < c < h for c, l, h in zip(p, self.lo, self.hi))
        return all(l <= c <= h for c, l, h in zip(p, self.lo, self.hi))

    def intersection_volume(self, other) -> Fraction:
        if isinstance(other, Box):
            v = Fraction(1)
            for l0, h0, l1, h1 in zip(self.lo, self.hi, other.lo, other.hi):
                lo, hi = max(l0, l1), min(h0, h1)
                if hi <= lo:
                    return Fraction(0)
                v *= hi - lo
            return v
        return self.to_polygon().intersection_volume(other)

    def contains_shape(self, other) -> bool:
        # Boxes are convex: vertex containment decides.
        return all(self.contains_point(v) for v in _shape_vertices(other))

    def to_polygon(self) -> "Polygon":
        if self.dim != 2:
            raise StructuralError("only 2D boxes convert to polygons")
        return Polygon(self.vertices_list())

    def __repr__(self):
        return f"Box({self.lo}, {self.hi})"


class Polygon:
    """Simple polygon in 2D with rational vertices, stored counterclockwise."""

    __slots__ = ("vertices", "_convex")

    def __init__(self, vertices):
        vs = [fpoint(v) for v in vertices]
        if len(vs) < 3:
            raise StructuralError("polygon needs at least 3 vertices")
        if any(len(v) != 2 for v in vs):
            raise StructuralError("polygon vertices must be 2D")
        area2 = _signed_area2(vs)
        if area2 == 0:
            raise StructuralError("polygon is degenerate (zero area)")
        if area2 < 0:
            vs = vs[::-1]
        self.vertices = tuple(vs)
        if not _is_simple(self.vertices):
            raise StructuralError("polygon is self-intersecting")
        self._convex = _is_convex(self.vertices)

    @classmethod
    def _trusted(cls, vertices, convex):
        """Internal: skip validation for affine images of valid polygons."""
        obj = object.__new__(cls)
        obj.vertices = tuple(vertices)
        obj._convex = convex
        return obj

    @property
    def dim(self):
        return 2

    @property
    def convex(self):
        return self._convex

    def volume(self) -> Fraction:
        return _signed_area2(self.vertices) / 2

    def transform(self, theta, tau) -> "Polygon":
        theta = frac(theta)
        tau = fpoint(tau)
        # a point reflection (theta < 0) has determinant theta^2 > 0, so the
        # counterclockwise orientation is preserved either way
        vs = [vadd(vscale(theta, v), tau) for v in self.vertices]
        return Polygon._trusted(vs, self._convex)

    def translate(self, tau) -> "Polygon":
        return self.transform(1, tau)

    def bbox(self):
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return (min(xs), min(ys)), (max(xs), max(ys))

    def centroid(self) -> Point:
        a6 = 3 * _signed_area2(self.vertices)
        cx = cy = Fraction(0)
        vs = self.vertices
        for i in range(len(vs)):
            x0, y0 = vs[i]
            x1, y1 = vs[(i + 1) % len(vs)]
            w = x0 * y1 - x1 * y0
            cx += (x0 + x1) * w
            cy += (y0 + y1) * w
        return (cx / a6, cy / a6)

    def vertices_list(self):
        return list(self.vertices)

    def contains_point(self, p, strict=False) -> bool:
        p = fpoint(p)
        if self._convex:
            vs = self.vertices
            for i in range(len(vs)):
                c = cross(vs[i], vs[(i + 1) % len(vs)], p)
                if c < 0 or (strict and c == 0):
                    return False
            return True
        inside = _winding_contains(self.vertices, p)
        if strict:
            return inside and not _on_boundary(self.vertices, p)
        return inside or _on_boundary(self.vertices, p)

    def triangulate(self):
        """Exact ear-clipping triangulation; returns a list of CCW triangles."""
        if self._convex:
            vs = self.vertices
            return [Polygon([vs[0], vs[i], vs[i + 1]]) for i in range(1, len(vs) - 1)]
        return [Polygon(t) for t in _ear_clip(list(self.vertices))]

    def intersection_volume(self, other) -> Fraction:
        if isinstance(other, Box):
            other = other.to_polygon()
        if self._convex and other._convex:
            clipped = clip_convex(self.vertices, other.vertices)
            return _signed_area2(clipped) / 2 if len(clipped) >= 3 else Fraction(0)
        total = Fraction(0)
        for t1 in self.triangulate():
            for t2 in other.triangulate():
                total += t1.intersection_volume(t2)
        return total

    def contains_shape(self, other) -> bool:
        if self._convex:
            return all(self.contains_point(v) for v in _shape_vertices(other))
        vol = other.volume() if not isinstance(other, Box) else other.volume()
        return self.intersection_volume(other) == vol

    def __repr__(self):
        return f"Polygon({list(self.vertices)!r})"


def _shape_vertices(shape):
    return shape.vertices_list()


def _signed_area2(vs) -> Fraction:
    s = Fraction(0)
    for i in range(len(vs)):
        x0, y0 = vs[i]
        x1, y1 = vs[(i + 1) % len(vs)]
        s += x0 * y1 - x1 * y0
    return s


def _is_convex(vs) -> bool:
    n = len(vs)
    for i in range(n):
        if cross(vs[i], vs[(i + 1) % n], vs[(i + 2) % n]) < 0:
            return False
    return True


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    d1 = cross(q1, q2, p1)
    d2 = cross(q1, q2, p2)
    d3 = cross(p1, p2, q1)
    d4 = cross(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and 0 not in (d1, d2, d3, d4)


def _is_simple(vs) -> bool:
    n = len(vs)
    for i in range(n):
        a1, a2 = vs[i], vs[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            b1, b2 = vs[j], vs[(j + 1) % n]
            if _segments_properly_intersect(a1, a2, b1, b2):
                return False
    return True


def _on_segment(a, b, p) -> bool:
    if cross(a, b, p) != 0:
        return False
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def _on_boundary(vs, p) -> bool:
    n = len(vs)
    return any(_on_segment(vs[i], vs[(i + 1) % n], p) for i in range(n))


def _winding_contains(vs, p) -> bool:
    # Exact crossing-number test (boundary points resolved separately).
    n = len(vs)
    count = 0
    for i in range(n):
        (x0, y0), (x1, y1) = vs[i], vs[(i + 1) % n]
        if (y0 <= p[1]) != (y1 <= p[1]):
            # x-coordinate of edge at height p[1]
            t = (p[1] - y0) / (y1 - y0)
            x = x0 + t * (x1 - x0)
            if x > p[0]:
                count += 1
    return count % 2 == 1


def _ear_clip(vs):
    """Ear-clipping triangulation of a simple CCW polygon, exact arithmetic."""
    tris = []
    idx = list(range(len(vs)))
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10000:
            raise StructuralError("triangulation failed (degenerate polygon?)")
        n = len(idx)
        clipped = False
        for k in range(n):
            i0, i1, i2 = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            a, b, c = vs[i0], vs[i1], vs[i2]
            if cross(a, b, c) <= 0:
                continue  # reflex or collinear
            ear = Polygon([a, b, c])
            ok = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                if ear.contains_point(vs[j], strict=True) or _on_boundary((a, b, c), vs[j]):
                    ok = False
                    break
            if ok:
                tris.append((a, b, c))
                idx.pop(k)
                clipped = True
                break
        if not clipped:
            raise StructuralError("no ear found; polygon may be degenerate")
    tris.append(tuple(vs[i] for i in idx))
    return tris


def clip_convex(subject: Sequence[Point], clipper: Sequence[Point]):
    """Sutherland-Hodgman clipping of a convex subject by a convex CCW clipper."""
    output = list(subject)
    n = len(clipper)
    for i in range(n):
        if not output:
            return []
        a, b = clipper[i], clipper[(i + 1) % n]
        input_list = output
        output = []
        m = len(input_list)
        for j in range(m):
            cur = input_list[j]
            nxt = input_list[(j + 1) % m]
            cur_in = cross(a, b, cur) >= 0
            nxt_in = cross(a, b, nxt) >= 0
            if cur_in:
                output.append(cur)
            if cur_in != nxt_in:
                output.append(_line_intersect(a, b, cur, nxt))
    # drop consecutive duplicates
    dedup = []
    for p in output:
        if not dedup or p != dedup[-1]:
            dedup.append(p)
    if len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    return dedup


def _line_intersect(a, b, p, q) -> Point:
    """Intersection of line ab with segment pq (assumed non-parallel crossing)."""
    d1 = cross(a, b, p)
    d2 = cross(a, b, q)
    t = d1 / (d1 - d2)
    return vadd(p, vscale(t, vsub(q, p)))


def pair_intersection_volume(a, b) -> Fraction:
    """Intersection volume of two shapes, unwrapping internal unions."""
    if isinstance(a, _TriUnion):
        return a.intersection_volume(b)
    if isinstance(b, _TriUnion):
        return b.intersection_volume(a)
    return a.intersection_volume(b)


def union_volume(shapes) -> Fraction:
    """Exact volume of a union of shapes via inclusion-exclusion recursion."""
    shapes = [s for s in shapes if s.volume() > 0]
    total = Fraction(0)
    placed = []
    for s in shapes:
        total += s.volume() - _cap_volume(s, placed)
        placed.append(s)
    return total


def _cap_volume(s, others) -> Fraction:
    """Volume of s ∩ (union of others)."""
    caps = []
    for o in others:
        v = pair_intersection_volume(s, o)
        if v > 0:
            caps.append(_intersect_shape(s, o))
    if not caps:
        return Fraction(0)
    return union_volume(caps)


def _intersect_shape(a, b):
    """Intersection of two shapes as a shape (convex pieces only)."""
    if isinstance(a, _TriUnion) or isinstance(b, _TriUnion):
        pas = a.pieces if isinstance(a, _TriUnion) else [a]
        pbs = b.pieces if isinstance(b, _TriUnion) else [b]
        pieces = []
        for pa in pas:
            for pb in pbs:
                if pair_intersection_volume(pa, pb) > 0:
                    pieces.append(_intersect_shape(pa, pb))
        return _TriUnion(pieces)
    if isinstance(a, Box) and isinstance(b, Box):
        lo = tuple(max(l0, l1) for l0, l1 in zip(a.lo, b.lo))
        hi = tuple(min(h0, h1) for h0, h1 in zip(a.hi, b.hi))
        return Box(lo, hi)
    pa = a.to_polygon() if isinstance(a, Box) else a
    pb = b.to_polygon() if isinstance(b, Box) else b
    if pa.convex and pb.convex:
        return Polygon(clip_convex(pa.vertices, pb.vertices))
    # non-convex: return a _TriUnion wrapper of pairwise triangle clips
    pieces = []
    for t1 in pa.triangulate():
        for t2 in pb.triangulate():
            if t1.intersection_volume(t2) > 0:
                pieces.append(Polygon(clip_convex(t1.vertices, t2.vertices)))
    return _TriUnion(pieces)


class _TriUnion:
    """Internal: disjoint union of convex pieces, enough for volume recursion."""

    def __init__(self, pieces):
        self.pieces = pieces

    def volume(self):
        return sum((p.volume() for p in self.pieces), Fraction(0))

    def intersection_volume(self, other):
        others = other.pieces if isinstance(other, _TriUnion) else [other]
        return sum((p.intersection_volume(o) for p in self.pieces for o in others),
                   Fraction(0))


# ---------------------------------------------------------------------------
# Float helpers (metric work through an embedding)
# ---------------------------------------------------------------------------

def embed_point(p, embedding=None):
    """Map rational coordinates to Euclidean floats via a diagonal embedding."""
    if embedding is None:
        return tuple(float(c) for c in p)
    return tuple(float(c) * float(e) for c, e in zip(p, embedding))


def point_segment_distance(p, a, b) -> float:
    """Euclidean distance from float point p to segment ab."""
    px, py = p
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom == 0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / denom
    t = max(0.0, min(1.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def boundary_distance(shape, p, embedding=None) -> float:
    """Float distance from point p (rational coords) to the shape boundary."""
    pe = embed_point(p, embedding)
    if shape.dim == 1:
        lo, hi = float(shape.lo[0]), float(shape.hi[0])
        return min(abs(pe[0] - lo), abs(pe[0] - hi))
    if isinstance(shape, Box) and shape.dim > 2:
        return min(min(abs(float(c) - float(l)), abs(float(c) - float(h)))
                   for c, l, h in zip(p, shape.lo, shape.hi))
    vs = [embed_point(v, embedding) for v in shape.vertices_list()]
    n = len(vs)
    return min(point_segment_distance(pe, vs[i], vs[(i + 1) % n]) for i in range(n))
