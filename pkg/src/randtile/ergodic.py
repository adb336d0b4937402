"""Ergodic integrals of locally-constant observables and their deviations.

Observables are transversally locally constant (TLC): a depth-m observable
assigns one weight to each level-m pattern class, i.e. to each length-m path
of the diagram; depth 0 means one weight per prototile type.  Supertile
integrals V^k then satisfy the exact recursion V^{k+1} = A_{k+1} V^k for
k >= m, which makes deviation measurements exact in rational arithmetic.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import geometry
from .errors import (DegenerateObservableError, InsufficientDataError,
                     StructuralError, UnsupportedOperationError)
from .cocycle import top_left_direction
from .geometry import frac
from .substitution import RuleFamily, substitution_matrix
from .symbolic import SymbolSequence, recurrence_times, rng_stream
from .tiling import (Region, SupertileSystem, decompose_region, generate_patch)


@dataclass(frozen=True)
class TLCObservable:
    """Weights per pattern class: depth 0 = per prototile type; depth m > 0 =
    per length-m diagram path, given as ((edge tuple, ...), weight) pairs."""

    depth: int
    weights: tuple

    def __post_init__(self):
        if self.depth < 0:
            raise StructuralError("depth must be >= 0")
        if self.depth == 0:
            object.__setattr__(self, "weights", tuple(self.weights))
        else:
            object.__setattr__(self, "weights", tuple(
                (tuple(tuple(int(c) for c in e) for e in path), w)
                for path, w in self.weights))

    @staticmethod
    def typewise(weights) -> "TLCObservable":
        return TLCObservable(0, tuple(weights))

    @staticmethod
    def constant(value, n_types: int) -> "TLCObservable":
        return TLCObservable(0, (value,) * n_types)

    def weight_map(self) -> dict:
        if self.depth == 0:
            raise UnsupportedOperationError("depth-0 weights are typewise")
        return dict(self.weights)

    def is_exact(self) -> bool:
        vals = ([w for w in self.weights] if self.depth == 0
                else [w for _, w in self.weights])
        return all(isinstance(w, (int, Fraction)) for w in vals)


@dataclass
class ErgodicVector:
    """V^k: integral of the observable over each level-k supertile type."""

    level: int
    values: np.ndarray


@dataclass
class CotraceEstimate:
    """Level-0 cotrace vector whose cocycle orbit shadows the V^k."""

    vector: np.ndarray
    residuals: list                 # r_k = ||V^{k+1} - A_{k+1} V^k||


@dataclass
class SpecialAveragingSequence:
    """Averaging sets T_i(B_eps + tau_i) realized as unions of supertiles."""

    base_multiset: Counter          # tile types of the base patch P_eps
    t_star: Fraction
    entries: list                   # (k_i, T_i, tau_i)
    hausdorff: Optional[float]      # measured distance of base patch to B
    window: int                     # recurrence window used
    dim: int


def _exact_dtype(values):
    return all(isinstance(v, (int, Fraction)) for v in values)


def _matrices_along(family, x, depth):
    m = family.n_prototiles
    return [substitution_matrix(family.rule(x[k]), m) for k in range(1, depth + 1)]


def _upward_continuation(family, x, k, vertex, m):
    """Lexicographically least edge continuation from level k to level m."""
    edges = []
    v = vertex
    for level in range(k + 1, m + 1):
        rule = family.rule(x[level])
        best = None
        for parent in range(family.n_prototiles):
            for b in rule.children_of(parent):
                if b.child == v:
                    best = (level, parent, v, 0)
                    break
            if best is not None:
                break
        if best is None:
            raise StructuralError(f"vertex {v} has no outgoing edge at {level}")
        edges.append(best)
        v = best[1]
    return tuple(edges)


def _paths_to(family, x, k):
    """All length-k paths, grouped by terminal vertex: {vertex: [edge tuple]}."""
    paths = {v: [()] for v in range(family.n_prototiles)}
    for level in range(1, k + 1):
        rule = family.rule(x[level])
        nxt = {v: [] for v in range(family.n_prototiles)}
        for parent in range(family.n_prototiles):
            seen = {}
            for b in rule.children_of(parent):
                idx = seen.get(b.child, 0)
                seen[b.child] = idx + 1
                for p in paths[b.child]:
                    nxt[parent].append(p + ((level, parent, b.child, idx),))
        paths = nxt
    return paths


def ergodic_vectors(f: TLCObservable, family: RuleFamily, x: SymbolSequence,
                    depth: int):
    """[V^0 .. V^depth]; exact arithmetic when the weights are rational."""
    if depth > len(x):
        raise StructuralError("depth exceeds sequence length")
    m = f.depth
    vols = family.volumes()
    n = family.n_prototiles
    exact = f.is_exact()
    dtype = object if exact else complex if any(
        isinstance(w, complex) for w in (dict(f.weights).values()
                                         if m else f.weights)) else float

    def vec(vals):
        return np.array(vals, dtype=dtype)

    if m == 0:
        base = vec([f.weights[j] * (vols[j] if exact else float(vols[j]))
                    for j in range(n)])
        out = [ErgodicVector(0, base)]
    else:
        if not _levels_geometric(family, x, m):
            raise UnsupportedOperationError(
                "depth > 0 observables need geometric rules "
                "(pattern classes are positions of tiles)")
        wmap = f.weight_map()
        out = []
        for k in range(0, min(m, depth + 1)):
            vals = []
            for j in range(n):
                cont = _upward_continuation(family, x, k, j, m)
                total = 0
                for p in _paths_to(family, x, k)[j]:
                    src = p[0][2] if p else j
                    w = wmap.get(p + cont, 0)
                    total += w * (vols[src] if exact else float(vols[src]))
                vals.append(total)
            out.append(ErgodicVector(k, vec(vals)))
        if depth >= m:
            vals = []
            paths = _paths_to(family, x, m)
            for u in range(n):
                total = 0
                for p in paths[u]:
                    src = p[0][2]
                    w = wmap.get(p, 0)
                    total += w * (vols[src] if exact else float(vols[src]))
                vals.append(total)
            out.append(ErgodicVector(m, vec(vals)))

    while len(out) <= depth:
        k = len(out)
        a = substitution_matrix(family.rule(x[k]), n)
        a = a.astype(object) if exact else a.astype(float)
        out.append(ErgodicVector(k, a @ out[-1].values))
    return out[:depth + 1]


def cotrace_shadow(f: TLCObservable, family: RuleFamily, x: SymbolSequence,
                   depth: int) -> CotraceEstimate:
    """Level-0 vector a with A_k···A_1·a shadowing V^k; exact for depth 0."""
    if depth < 2:
        raise StructuralError("depth must be >= 2")
    vecs = ergodic_vectors(f, family, x, depth)
    n = family.n_prototiles
    mats = _matrices_along(family, x, depth)
    residuals = []
    for k in range(depth):
        pred = mats[k].astype(object if f.is_exact() else float) @ vecs[k].values
        diff = vecs[k + 1].values - pred
        residuals.append(math.sqrt(sum(float(c) ** 2 for c in diff)))
    if f.depth == 0:
        return CotraceEstimate(vector=vecs[0].values, residuals=residuals)
    prod = np.eye(n)
    for k in range(f.depth):
        prod = mats[k].astype(float) @ prod
    a, *_ = np.linalg.lstsq(prod, vecs[f.depth].values.astype(float),
                            rcond=None)
    return CotraceEstimate(vector=a, residuals=residuals)


def make_zero_trace_observable(family: RuleFamily, x: SymbolSequence,
                               depth: int) -> TLCObservable:
    """Depth-0 weights w with diag(vol)·w orthogonal to the dominant left
    direction of the cocycle product, so the top-exponent component of V^k
    vanishes.  Weights are rationalized when that is exact."""
    u = top_left_direction(family, x, depth)
    n = family.n_prototiles
    if n == 1:
        raise DegenerateObservableError(
            "one prototile type: only the zero observable has zero trace")
    e1 = np.zeros(n)
    e1[0] = 1.0
    y = e1 - (u @ e1) * u           # component of e1 orthogonal to u
    if np.linalg.norm(y) < 1e-12:
        raise DegenerateObservableError("no nonzero zero-trace direction")
    vols = family.volumes()
    w = [y[j] / float(vols[j]) for j in range(n)]
    norm = math.sqrt(sum(c * c for c in w))
    w = [c / norm for c in w]
    # rationalize when exact: check orthogonality of the rounded weights
    cand = [Fraction(c).limit_denominator(10 ** 6) for c in w]
    resid = abs(sum(float(u[j]) * float(vols[j]) * float(cand[j])
                    for j in range(n)))
    if resid < 1e-10:
        return TLCObservable(0, tuple(cand))
    return TLCObservable(0, tuple(w))


def _log_abs(value) -> Optional[float]:
    """log|value| for Fraction/int/float of any size; None when zero."""
    if isinstance(value, (int, Fraction)):
        q = Fraction(value)
        if q == 0:
            return None
        return _log_int(abs(q.numerator)) - _log_int(q.denominator)
    v = abs(float(value))
    return math.log(v) if v > 0 else None


def _log_int(n: int) -> float:
    if n.bit_length() <= 900:
        return math.log(n)
    shift = n.bit_length() - 60
    return math.log(n >> shift) + shift * math.log(2)


def _lsq_slope(xs, ys) -> float:
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    a = np.vstack([xs, np.ones_like(xs)]).T
    sol, *_ = np.linalg.lstsq(a, ys, rcond=None)
    return float(sol[0])


@dataclass
class DeviationFit:
    """log|integral| vs log T and fitted growth slopes."""

    entries: list                   # (T float, log|I| or None)
    slope: float                    # least-squares over the top half of scales
    running_max_slope: float
    cap: Optional[float]            # max(d·lambda_j/lambda_1, d-1), if known


def deviation_over_regions(f: TLCObservable, family: RuleFamily,
                           x: SymbolSequence, b_region: Region, t_grid,
                           system: Optional[SupertileSystem] = None,
                           lyapunov=None) -> DeviationFit:
    """Fitted slope of log|∫_{T·B} f| against log T over a grid of dilations.

    The integral over the patch covering T·B is computed exactly from the
    supertile decomposition: ∫ = Σ_{i,j} κ^(i)_j · V^i_j.
    """
    if f.depth != 0:
        raise UnsupportedOperationError("region deviations need depth 0")
    if system is None:
        system = SupertileSystem(family, x)
    t_grid = sorted(frac(t) for t in t_grid)
    reports = [decompose_region(family, x, b_region, t, system=system)
               for t in t_grid]
    depth = max((r.anchor_level for r in reports), default=0)
    vecs = ergodic_vectors(f, family, x, depth)
    entries = []
    for t, rep in zip(t_grid, reports):
        total = 0
        for level, counts in rep.counts.items():
            for j, kappa in enumerate(counts):
                if kappa:
                    total += kappa * vecs[level].values[j]
        entries.append((float(t), _log_abs(total)))
    usable = [(math.log(t), li) for t, li in entries if li is not None]
    if len(usable) < 4:
        raise InsufficientDataError(
            f"only {len(usable)} nonzero integrals; need >= 4")
    top = usable[len(usable) // 2:]
    slope = _lsq_slope([u[0] for u in top], [u[1] for u in top])
    run = _running_max_slope(usable)
    cap = None
    if lyapunov is not None:
        lam = lyapunov.raw_exponents
        d = family.dim
        cap = max(d * lam[1] / lam[0], d - 1)
    return DeviationFit(entries=entries, slope=slope, running_max_slope=run,
                        cap=cap)


def _running_max_slope(points) -> float:
    """Least-squares slope through the running maxima of (log T, log|I|)."""
    best = -math.inf
    records = []
    for lt, li in points:
        if li > best:
            best = li
            records.append((lt, li))
    if len(records) < 2:
        lt, li = records[0]
        return li / lt if lt else 0.0
    return _lsq_slope([r[0] for r in records], [r[1] for r in records])


def _patch_point_distance(points, patch, embedding):
    """Distance of each embedded point to the patch (0 when covered)."""
    shapes = list(patch.shapes())
    boxes = []
    for s in shapes:
        lo, hi = s.bbox()
        boxes.append((geometry.embed_point(lo, embedding),
                      geometry.embed_point(hi, embedding)))
    lo_arr = np.array([b[0] for b in boxes])
    hi_arr = np.array([b[1] for b in boxes])
    out = []
    for p in points:
        pa = np.asarray(p)
        gap = np.maximum(lo_arr - pa, 0) + np.maximum(pa - hi_arr, 0)
        lower = np.sqrt((gap ** 2).sum(axis=1))
        best = math.inf
        for idx in np.argsort(lower):
            if lower[idx] >= best:
                break
            s = shapes[idx]
            vs = [geometry.embed_point(v, embedding)
                  for v in s.vertices_list()]
            if _point_in_embedded(pa, vs):
                best = 0.0
                break
            n = len(vs)
            for i in range(n):
                best = min(best, geometry.point_segment_distance(
                    tuple(pa), vs[i], vs[(i + 1) % n]))
        out.append(best)
    return out


def _point_in_embedded(p, vs) -> bool:
    if len(vs) == 2 and len(p) == 1:
        return vs[0][0] <= p[0] <= vs[1][0]
    n = len(vs)
    for i in range(n):
        ax, ay = vs[i]
        bx, by = vs[(i + 1) % n]
        if (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax) < 0:
            return False
    return True


def _boundary_samples(window: Region, embedding, count: int = 96):
    """Embedded sample points on the boundary of the dilated window."""
    if window.kind == "disk":
        c = geometry.embed_point(
            geometry.vscale(window.dilation, window.center), embedding)
        r = float(window.dilation) * window.radius
        return [(c[0] + r * math.cos(2 * math.pi * i / count),
                 c[1] + r * math.sin(2 * math.pi * i / count))
                for i in range(count)]
    shape = window.shape()
    vs = [geometry.embed_point(v, embedding) for v in shape.vertices_list()]
    if shape.dim == 1:
        return [(vs[0][0],), (vs[1][0],)]
    per_edge = max(2, count // len(vs))
    pts = []
    n = len(vs)
    for i in range(n):
        a, b = vs[i], vs[(i + 1) % n]
        for t in range(per_edge):
            s = t / per_edge
            pts.append((a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])))
    return pts


def special_averaging_sequence(family: RuleFamily, x: SymbolSequence,
                               b_region: Region, eps: float, count: int,
                               seed: int = 0,
                               system: Optional[SupertileSystem] = None
                               ) -> SpecialAveragingSequence:
    """Averaging sets along recurrence times of the sequence.

    The base patch covers T_*·B with T_* the smallest dyadic dilation whose
    rescaled patch is eps-close to B in Hausdorff distance; each recurrence
    time k_i of x blows the base patch up into a union of level-k_i
    supertiles of the same type multiset, at dilation T_i = θ_(k_i)^{-1}·T_*.
    """
    if count < 1:
        raise StructuralError("count must be >= 1")
    if system is None:
        system = SupertileSystem(family, x)
    n = family.n_prototiles
    # path richness: smallest k* with A_{k*}···A_1 everywhere positive
    prod = np.eye(n, dtype=object)
    k_star = None
    for k in range(1, len(x) + 1):
        prod = substitution_matrix(family.rule(x[k]), n).astype(object) @ prod
        if (prod > 0).all():
            k_star = k
            break
    if k_star is None:
        raise InsufficientDataError("no level with all path pairs connected")

    geometric = family.geometric or _levels_geometric(
        family, x, min(len(x), max(k_star, 8)))

    if geometric:
        emb = family.embedding
        t_star = Fraction(1)
        patch = None
        hausdorff = None
        diam = max(_shape_diameter(p.shape, emb) for p in family.prototiles)
        for _ in range(32):
            window = b_region.dilated(t_star)
            try:
                patch = generate_patch(family, x, window, system=system)
            except UnsupportedOperationError:
                geometric = False
                break
            if len(patch):
                samples = _boundary_samples(window, emb)
                dists = _patch_point_distance(samples, patch, emb)
                hausdorff = max(dists) / float(t_star)
                ball_ok = float(t_star) * _inradius(b_region, emb) >= 2 * diam
                if hausdorff <= eps and ball_ok:
                    break
            t_star *= 2
        else:
            raise InsufficientDataError(
                "no dyadic dilation met the Hausdorff criterion")
    if not geometric:
        # matrix-only family: no geometry, so the base multiset is an
        # arbitrary positive integer vector drawn reproducibly from the seed
        gen = rng_stream(seed, worker_id=1)
        mult = Counter({t: int(gen.integers(1, 10)) for t in range(n)})
        t_star = Fraction(1)
        hausdorff = None
        base_anchor = None
    else:
        mult = patch.multiset()
        level, vtx, offset, edges = system.anchor(b_region.dilated(t_star))
        base_anchor = (level, edges)

    window = max(k_star, base_anchor[0] if base_anchor else 0)
    recs = recurrence_times(x, window) if window <= len(x) else []
    if len(recs) < count:
        raise InsufficientDataError(
            f"only {len(recs)} recurrence times with window {window}; "
            f"need {count}")
    entries = []
    dim = family.dim
    zero = (Fraction(0),) * dim
    for k_i in recs[:count]:
        t_i = system.theta_inv(k_i) * t_star if _levels_geometric(
            family, x, k_i) else _theta_inv_product(family, x, k_i) * t_star
        tau = zero
        if base_anchor is not None and _levels_geometric(
                family, x, k_i + base_anchor[0]):
            o_base = _anchor_offset(family, x, system, base_anchor[1], 0)
            o_i = _anchor_offset(family, x, system, base_anchor[1], k_i)
            tau = geometry.vsub(
                geometry.vscale(1 / t_i, o_i),
                geometry.vscale(1 / t_star, o_base))
        entries.append((k_i, t_i, tau))
    return SpecialAveragingSequence(base_multiset=mult, t_star=t_star,
                                    entries=entries, hausdorff=hausdorff,
                                    window=window, dim=dim)


def _levels_geometric(family, x, k) -> bool:
    if k > len(x):
        return False
    return all(family.rule(x[level]).is_geometric for level in range(1, k + 1))


def _theta_inv_product(family, x, k) -> Fraction:
    out = Fraction(1)
    for level in range(1, k + 1):
        out /= family.rule(x[level]).theta
    return out


def _anchor_offset(family, x, system, edges, shift):
    """Anchored offset of the edge path raised by `shift` levels."""
    offset = (Fraction(0),) * family.dim
    for (level, parent, child, branch) in edges:
        rule = family.rule(x[level + shift])
        branches = [b for b in rule.children_of(parent) if b.child == child]
        offset = geometry.vsub(offset, geometry.vscale(
            system.theta_inv(level + shift), branches[branch].tau))
    return offset


def _inradius(region: Region, embedding) -> float:
    if region.kind == "disk":
        return region.radius
    shape = region.shape()
    vs = [geometry.embed_point(v, embedding) for v in shape.vertices_list()]
    if shape.dim == 1:
        return (vs[1][0] - vs[0][0]) / 2
    c = geometry.embed_point(shape.centroid(), embedding)
    best = math.inf
    n = len(vs)
    for i in range(n):
        best = min(best, geometry.point_segment_distance(
            tuple(c), vs[i], vs[(i + 1) % n]))
    return best


def _shape_diameter(shape, embedding) -> float:
    vs = [geometry.embed_point(v, embedding) for v in shape.vertices_list()]
    return max(math.dist(a, b) for a in vs for b in vs)


def deviation_along_sequence(f: TLCObservable, seq: SpecialAveragingSequence,
                             family: RuleFamily, x: SymbolSequence,
                             vectors=None) -> DeviationFit:
    """limsup-style slope of log|∫ over the averaging sets| vs log T_i.

    The integral over the i-th set is Σ_type multiplicity · V^{k_i}_type.
    The limsup is estimated by a least-squares fit through the record points
    (new maxima) of log|I|.
    """
    if len(seq.entries) < 5:
        raise InsufficientDataError("need >= 5 averaging-sequence entries")
    kmax = max(k for k, _, _ in seq.entries)
    if vectors is None:
        vectors = ergodic_vectors(f, family, x, kmax)
    entries = []
    for k_i, t_i, _ in seq.entries:
        total = 0
        for t, mlt in seq.base_multiset.items():
            total += mlt * vectors[k_i].values[t]
        entries.append((float(t_i), _log_abs(total)))
    usable = [(math.log(t), li) for t, li in entries if li is not None]
    if not usable:
        raise DegenerateObservableError("all sequence integrals are zero")
    # limsup estimate: least squares through the record points (new maxima of
    # log|I|), which rides the peaks of any oscillating subdominant component
    run = _running_max_slope(usable)
    return DeviationFit(entries=entries, slope=run, running_max_slope=run,
                        cap=None)
