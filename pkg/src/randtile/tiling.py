"""Finite patches of tilings and the supertile decomposition of dilated regions.

Level-k supertiles are handled as pure translates: the supertile of type v at
level k has footprint θ_(k)^{-1}·t_v (a scaled prototile), and its children
are level-(k-1) supertiles translated by θ_(k)^{-1}·τ_branch.  All tests used
for decomposition are exact for box/polygon regions; disks use float distances
through the family embedding.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import geometry
from .errors import (InsufficientDataError, PartialCoverError, StructuralError,
                     UnsupportedOperationError)
from .geometry import frac, fpoint
from .substitution import RuleFamily, substitution_matrix

DEFAULT_TILE_BUDGET = 10_000_000


@dataclass
class Patch:
    """A finite set of placed tiles: (prototile id, translation)."""

    tiles: list                      # list of (type, offset tuple of Fraction)
    family: Optional[RuleFamily] = None
    lineage: Optional[list] = None   # optional per-tile (level, type, parent idx)

    def __len__(self):
        return len(self.tiles)

    def multiset(self) -> Counter:
        return Counter(t for t, _ in self.tiles)

    def shapes(self):
        if self.family is None:
            raise UnsupportedOperationError("patch has no family attached")
        for t, off in self.tiles:
            yield self.family.prototiles[t].shape.translate(off)

    def total_volume(self) -> Fraction:
        if self.family is None:
            raise UnsupportedOperationError("patch has no family attached")
        vols = [p.volume for p in self.family.prototiles]
        return sum((vols[t] for t, _ in self.tiles), Fraction(0))

    def placed_set(self):
        return {(t, off) for t, off in self.tiles}


@dataclass(frozen=True)
class Region:
    """A good Lipschitz region: disk, box, or convex polygon, with dilation T.

    Box/polygon coordinates are in family coordinate units (exact rationals);
    disks are Euclidean (center in coordinate units, radius through the
    embedding).
    """

    kind: str                        # "disk" | "box" | "polygon"
    center: tuple = None             # disk
    radius: float = None             # disk
    corner: tuple = None             # box
    widths: tuple = None             # box
    vertices: tuple = None           # polygon
    dilation: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "dilation", frac(self.dilation))
        if self.kind == "disk":
            if self.center is None or self.radius is None:
                raise StructuralError("disk region needs center and radius")
            object.__setattr__(self, "center", fpoint(self.center))
        elif self.kind == "box":
            if self.corner is None or self.widths is None:
                raise StructuralError("box region needs corner and widths")
            object.__setattr__(self, "corner", fpoint(self.corner))
            object.__setattr__(self, "widths", fpoint(self.widths))
        elif self.kind == "polygon":
            if self.vertices is None:
                raise StructuralError("polygon region needs vertices")
            object.__setattr__(self, "vertices",
                               tuple(fpoint(v) for v in self.vertices))
        else:
            raise StructuralError(f"unknown region kind {self.kind!r}")

    @staticmethod
    def disk(center, radius, dilation=1) -> "Region":
        return Region("disk", center=center, radius=float(radius),
                      dilation=dilation)

    @staticmethod
    def box(corner, widths, dilation=1) -> "Region":
        return Region("box", corner=corner, widths=widths, dilation=dilation)

    @staticmethod
    def unit_square(dilation=1) -> "Region":
        return Region("box", corner=(0, 0), widths=(1, 1), dilation=dilation)

    @staticmethod
    def polygon(vertices, dilation=1) -> "Region":
        return Region("polygon", vertices=vertices, dilation=dilation)

    def dilated(self, extra=1) -> "Region":
        return Region(self.kind, center=self.center, radius=self.radius,
                      corner=self.corner, widths=self.widths,
                      vertices=self.vertices,
                      dilation=self.dilation * frac(extra))

    def shape(self):
        """Exact shape for box/polygon regions (dilation applied, cached)."""
        cached = getattr(self, "_shape_cache", None)
        if cached is not None:
            return cached
        shape = self._build_shape()
        object.__setattr__(self, "_shape_cache", shape)
        return shape

    def _build_shape(self):
        t = self.dilation
        if self.kind == "box":
            lo = geometry.vscale(t, self.corner)
            hi = geometry.vscale(t, geometry.vadd(self.corner, self.widths))
            return geometry.Box(lo, hi)
        if self.kind == "polygon":
            return geometry.Polygon([geometry.vscale(t, v) for v in self.vertices])
        raise UnsupportedOperationError("disk regions have no exact shape")

    def volume(self, embedding=None) -> float:
        if self.kind == "disk":
            r = float(self.dilation) * self.radius
            return math.pi * r * r
        vol = float(self.shape().volume())
        if embedding is not None:
            for e in embedding:
                vol *= float(e)
        return vol

    def boundary_measure(self, embedding=None) -> float:
        """Euclidean perimeter (d=2) / endpoint count (d=1) of the dilation."""
        if self.kind == "disk":
            return 2 * math.pi * float(self.dilation) * self.radius
        shape = self.shape()
        if shape.dim == 1:
            return 2.0
        vs = [geometry.embed_point(v, embedding) for v in shape.vertices_list()]
        return sum(math.dist(vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs)))

    # -- containment of tiles -------------------------------------------

    def contains_points(self, pts, embedding=None) -> bool:
        """Are all points inside the dilated region?  Exact for box/polygon.

        For a convex region this decides containment of the convex hull of
        `pts`, hence of any tile with those vertices.
        """
        if self.kind == "disk":
            c = geometry.embed_point(
                geometry.vscale(self.dilation, self.center), embedding)
            r = float(self.dilation) * self.radius
            return all(math.dist(geometry.embed_point(p, embedding), c) <= r
                       for p in pts)
        shape = self.shape()
        if isinstance(shape, geometry.Box):
            return all(
                all(l <= c <= h for c, l, h in zip(p, shape.lo, shape.hi))
                for p in pts)
        if shape.convex:
            return all(shape.contains_point(p) for p in pts)
        # non-convex region: exact volume-based containment
        poly = geometry.Polygon(pts)
        return shape.contains_shape(poly)

    def contains_shape(self, shape, embedding=None) -> bool:
        """Does the dilated region contain the (convex) shape entirely?"""
        if self.kind == "disk":
            c = geometry.embed_point(
                geometry.vscale(self.dilation, self.center), embedding)
            r = float(self.dilation) * self.radius
            return all(
                math.dist(geometry.embed_point(v, embedding), c) <= r
                for v in shape.vertices_list())
        return self.shape().contains_shape(shape)

    def intersects_bbox(self, lo, hi, embedding=None) -> bool:
        """Cheap reject: does the dilated region possibly meet bbox [lo,hi]?"""
        if self.kind == "disk":
            c = geometry.embed_point(
                geometry.vscale(self.dilation, self.center), embedding)
            r = float(self.dilation) * self.radius
            d2 = 0.0
            loe = geometry.embed_point(lo, embedding)
            hie = geometry.embed_point(hi, embedding)
            for ci, l, h in zip(c, loe, hie):
                if ci < l:
                    d2 += (l - ci) ** 2
                elif ci > h:
                    d2 += (ci - h) ** 2
            return d2 <= r * r
        rlo, rhi = self.shape().bbox()
        return all(l <= rh and rl <= h
                   for l, h, rl, rh in zip(lo, hi, rlo, rhi))

    def contains_window(self, footprint, embedding=None) -> bool:
        """Is the dilated region contained in the convex footprint shape?"""
        if self.kind == "disk":
            c = geometry.embed_point(
                geometry.vscale(self.dilation, self.center), embedding)
            r = float(self.dilation) * self.radius
            vs = [geometry.embed_point(v, embedding)
                  for v in footprint.vertices_list()]
            if footprint.dim == 1:
                return vs[0][0] + r <= c[0] <= vs[1][0] - r
            n = len(vs)
            for i in range(n):
                ax, ay = vs[i]
                bx, by = vs[(i + 1) % n]
                # signed distance of center to edge (CCW: inside is positive)
                nx, ny = ay - by, bx - ax  # inward normal
                norm = math.hypot(nx, ny)
                if ((c[0] - ax) * nx + (c[1] - ay) * ny) / norm < r - 1e-12:
                    return False
            return True
        return footprint.contains_shape(self.shape())


@dataclass
class DecompositionReport:
    """Greedy supertile decomposition of a dilated region."""

    n: int                         # top level with nonzero counts (-1 if empty)
    counts: dict                   # level i -> list of counts per type
    boundary_skipped: int
    volume_covered: Fraction
    theta_products: list           # θ_(i) for i = 0..top ancestor level
    fitted_K2: Optional[float]
    anchor_level: int

    def total_count(self, level: int) -> int:
        return sum(self.counts.get(level, []))


def decomposition_tile_multiset(report: DecompositionReport,
                                family: RuleFamily, x) -> Counter:
    """Level-0 tile-type multiset of all supertiles in the report."""
    m = family.n_prototiles
    out = Counter()
    prod = np.eye(m, dtype=object)
    top = max(report.counts) if report.counts else -1
    for level in range(0, top + 1):
        if level > 0:
            a = substitution_matrix(family.rule(x[level]), m).astype(object)
            prod = a @ prod
        cnts = report.counts.get(level)
        if not cnts:
            continue
        for j, kappa in enumerate(cnts):
            if kappa == 0:
                continue
            row = prod[j]
            for t in range(m):
                if row[t]:
                    out[t] += kappa * int(row[t])
    return out


class SupertileSystem:
    """Cached supertile data for (family, x): θ products and footprints."""

    def __init__(self, family: RuleFamily, x):
        self.family = family
        self.x = x
        self._theta_inv = [Fraction(1)]        # θ_(k)^{-1}
        self._footprints = [
            {v: p.shape for v, p in enumerate(family.prototiles)}]
        self._bboxes = [{v: p.shape.bbox() for v, p in enumerate(family.prototiles)}]
        self._verts = [{v: _shape_corners(p.shape)
                        for v, p in enumerate(family.prototiles)}]
        self._children = {}            # level -> {v: [(child, delta)]}
        self._edge_data = {}           # (k, v) -> embedded edge data for margins
        self._volumes = family.volumes()

    def rule_at(self, level: int):
        return self.family.rule(self.x[level])

    def _ensure(self, k: int):
        while len(self._theta_inv) <= k:
            lvl = len(self._theta_inv)
            rule = self.rule_at(lvl)
            if not rule.is_geometric:
                raise UnsupportedOperationError(
                    f"rule {rule.id} at level {lvl} is matrix-only")
            ti = self._theta_inv[-1] / rule.theta
            self._theta_inv.append(ti)
            foot = {v: p.shape.transform(ti, (0,) * self.family.dim)
                    for v, p in enumerate(self.family.prototiles)}
            self._footprints.append(foot)
            self._bboxes.append({v: s.bbox() for v, s in foot.items()})
            self._verts.append({v: _shape_corners(s) for v, s in foot.items()})

    def theta_inv(self, k: int) -> Fraction:
        self._ensure(k)
        return self._theta_inv[k]

    def footprint(self, k: int, v: int):
        self._ensure(k)
        return self._footprints[k][v]

    def verts(self, k: int, v: int, offset=None):
        """Corner points of the footprint, optionally translated."""
        self._ensure(k)
        vs = self._verts[k][v]
        if offset is None:
            return vs
        return [geometry.vadd(p, offset) for p in vs]

    def volume(self, k: int, v: int) -> Fraction:
        return self._volumes[v] * self.theta_inv(k) ** self.family.dim

    def bbox(self, k: int, v: int, offset):
        self._ensure(k)
        lo, hi = self._bboxes[k][v]
        return geometry.vadd(lo, offset), geometry.vadd(hi, offset)

    def children(self, k: int, v: int):
        """Child slots of a level-k type-v supertile: (type, offset delta)."""
        level = self._children.get(k)
        if level is None:
            rule = self.rule_at(k)
            ti = self.theta_inv(k)
            level = {}
            for w in range(self.family.n_prototiles):
                level[w] = [(b.child, geometry.vscale(ti, b.tau))
                            for b in rule.children_of(w)]
            self._children[k] = level
        return level[v]

    def margin(self, k: int, v: int, offset, pts) -> float:
        """Min signed distance of window extreme points inside the translated
        footprint of (k, v); negative means some point sticks out."""
        data = self._edge_data.get((k, v))
        if data is None:
            data = _build_edge_data(self.footprint(k, v), self.family.embedding)
            self._edge_data[(k, v)] = data
        off = geometry.embed_point(offset, self.family.embedding)
        is_box, payload = data
        best = math.inf
        if is_box:
            lo, hi = payload
            for p, pad in pts:
                m = min(min(p[i] - off[i] - lo[i], hi[i] + off[i] - p[i])
                        for i in range(len(lo)))
                best = min(best, m - pad)
            return best
        for p, pad in pts:
            px, py = p[0] - off[0], p[1] - off[1]
            m = math.inf
            for ax, ay, nx, ny, norm in payload:
                m = min(m, ((px - ax) * nx + (py - ay) * ny) / norm)
            best = min(best, m - pad)
        return best

    def _up_candidates(self, lvl: int, v: int, offset, beam: int = 4):
        """Branches placing the current type-v supertile inside a level-lvl one."""
        rule = self.rule_at(lvl)
        if not rule.is_geometric:
            raise UnsupportedOperationError(
                f"rule {rule.id} at level {lvl} is matrix-only")
        ti = self.theta_inv(lvl)
        out = []
        for parent in range(self.family.n_prototiles):
            seen = 0
            for b in rule.children_of(parent):
                if b.child != v:
                    continue
                o = geometry.vsub(offset, geometry.vscale(ti, b.tau))
                out.append((parent, o, (lvl, parent, v, seen)))
                seen += 1
        return out

    def anchor(self, window: Region, start_vertex: int = 0,
               max_level: int = 64, max_expansions: int = 200_000):
        """Grow an anchored supertile until its footprint contains the window.

        Returns (level, vertex, offset, path_edges); path_edges are the chosen
        diagram edges (level, parent, child, branch index).  Footprints are
        nested along ancestor chains, so the window margin is monotone
        non-decreasing up any path; best-first search on the margin therefore
        finds a covering placement whenever one exists.
        """
        import heapq

        emb = self.family.embedding
        pts = _window_extremes(window, emb)
        offset0 = (Fraction(0),) * self.family.dim
        m0 = self.margin(0, start_vertex, offset0, pts)
        heap = [(-m0, 0, 0, start_vertex, offset0, ())]
        seen = {(0, start_vertex, offset0)}
        tick = 1
        deepest = 0
        while heap and tick <= max_expansions:
            neg_m, _, k, v, offset, edges = heapq.heappop(heap)
            if -neg_m >= 0 and window.contains_window(
                    self.footprint(k, v).translate(offset), emb):
                return k, v, offset, list(edges)
            lvl = k + 1
            deepest = max(deepest, k)
            if lvl > min(len(self.x), max_level):
                continue
            for parent, o, edge in self._up_candidates(lvl, v, offset):
                key = (lvl, parent, o)
                if key in seen:
                    continue
                seen.add(key)
                m = self.margin(lvl, parent, o, pts)
                heapq.heappush(heap, (-m, tick, lvl, parent, o,
                                      edges + (edge,)))
                tick += 1
        if not heap:
            raise InsufficientDataError(
                f"sequence too short to cover the window "
                f"(explored up to level {deepest})")
        raise InsufficientDataError(
            "window not covered within the expansion budget")


def _window_center(window: Region, embedding):
    if window.kind == "disk":
        return geometry.embed_point(
            geometry.vscale(window.dilation, window.center), embedding)
    return geometry.embed_point(window.shape().centroid(), embedding)


def _window_extremes(window: Region, embedding):
    """Embedded extreme points (and radius padding) describing the window."""
    if window.kind == "disk":
        c = geometry.embed_point(
            geometry.vscale(window.dilation, window.center), embedding)
        r = float(window.dilation) * window.radius
        return [(c, r)]
    return [(geometry.embed_point(v, embedding), 0.0)
            for v in window.shape().vertices_list()]


def _shape_corners(shape):
    """All corner points of a Box or Polygon as exact coordinate tuples."""
    if isinstance(shape, geometry.Polygon):
        return list(shape.vertices)
    corners = [()]
    for l, h in zip(shape.lo, shape.hi):
        corners = [c + (e,) for c in corners for e in ((l, h) if l != h else (l,))]
    return corners


def _build_edge_data(shape, embedding):
    """Precompute float margin data for a footprint at the origin.

    Boxes: (True, (lo, hi)) in embedded coordinates.
    Polygons: (False, [(ax, ay, nx, ny, |n|)]) with inward CCW normals.
    """
    if isinstance(shape, geometry.Box):
        lo = geometry.embed_point(shape.lo, embedding)
        hi = geometry.embed_point(shape.hi, embedding)
        return True, (lo, hi)
    vs = [geometry.embed_point(v, embedding) for v in shape.vertices]
    edges = []
    n = len(vs)
    for i in range(n):
        ax, ay = vs[i]
        bx, by = vs[(i + 1) % n]
        nx, ny = ay - by, bx - ax  # inward normal for CCW boundary
        norm = math.hypot(nx, ny)
        if norm > 0:
            edges.append((ax, ay, nx, ny, norm))
    return False, edges


def generate_patch(family: RuleFamily, x, window: Region,
                   budget: int = DEFAULT_TILE_BUDGET,
                   system: SupertileSystem = None, anchor=None) -> Patch:
    """All tiles of the anchored tiling hierarchy lying entirely inside window.

    `anchor` fixes the covering supertile as (level, vertex, offset), so
    several windows can be cut from one coherent hierarchy.
    """
    if system is None:
        system = SupertileSystem(family, x)
    emb = family.embedding
    if anchor is None:
        level, vertex, offset, _ = system.anchor(window)
    else:
        level, vertex, offset = anchor[:3]
    tiles = []
    budget_left = [budget]
    vadd = geometry.vadd

    def take(v, off):
        if budget_left[0] <= 0:
            raise PartialCoverError(
                "tile budget exhausted", partial=Patch(tiles, family=family))
        budget_left[0] -= 1
        tiles.append((v, off))

    def emit(k, v, off, inside):
        if not inside:
            lo, hi = system.bbox(k, v, off)
            if not window.intersects_bbox(lo, hi, emb):
                return
            inside = window.contains_points(system.verts(k, v, off), emb)
        if k == 0:
            if inside:
                take(v, off)
            return
        for child, delta in system.children(k, v):
            emit(k - 1, child, vadd(off, delta), inside)

    emit(level, vertex, offset, False)
    return Patch(tiles, family=family)


def decompose_region(family: RuleFamily, x, b_region: Region, t_dilation,
                     system: SupertileSystem = None,
                     anchor=None) -> DecompositionReport:
    """Greedy top-down decomposition of T·B into maximal supertiles.

    `anchor` fixes the ambient supertile as (level, vertex, offset) so the
    decomposition refers to the same hierarchy as a previously generated
    patch.
    """
    t_dilation = frac(t_dilation)
    if t_dilation <= 0:
        raise StructuralError("dilation must be positive")
    window = b_region.dilated(t_dilation)
    if system is None:
        system = SupertileSystem(family, x)
    emb = family.embedding
    if anchor is None:
        level, vertex, offset, _ = system.anchor(window)
    else:
        level, vertex, offset = anchor[:3]
    counts = {}
    boundary = [0]
    covered = [Fraction(0)]
    vols = family.volumes()

    def walk(k, v, off):
        lo, hi = system.bbox(k, v, off)
        if not window.intersects_bbox(lo, hi, emb):
            return
        if window.contains_points(system.verts(k, v, off), emb):
            counts.setdefault(k, [0] * family.n_prototiles)[v] += 1
            covered[0] += system.volume(k, v)
            return
        if k == 0:
            boundary[0] += 1
            return
        for child, delta in system.children(k, v):
            walk(k - 1, child, geometry.vadd(off, delta))

    walk(level, vertex, offset)
    top = max((i for i, c in counts.items() if any(c)), default=-1)
    counts = {i: c for i, c in counts.items() if any(c)}
    # fitted K2 for the boundary-count bound: Σ_j κ^(i)_j ≤ K2·|∂(T·B)|·θ_(i)^{d-1}
    k2 = None
    if counts:
        perim = window.boundary_measure(emb)
        d = family.dim
        vals = []
        for i, c in counts.items():
            if i == top:
                continue  # bulk level, not a boundary layer
            theta_i = 1 / system.theta_inv(i)
            vals.append(sum(c) / (perim * float(theta_i) ** (d - 1)))
        k2 = max(vals) if vals else 0.0
    return DecompositionReport(
        n=top, counts=counts, boundary_skipped=boundary[0],
        volume_covered=covered[0],
        theta_products=[1 / system.theta_inv(i) for i in range(level + 1)],
        fitted_K2=k2, anchor_level=level)
