"""Finite-range pattern-equivariant operators on tiling puncture sets.

Each tile carries one puncture; kernels assign matrix entries from the local
pattern around a puncture, so the operator commutes with every translation
that maps the point set into itself.  Diagonals of finite-range kernels are
locally constant observables, which ties windowed traces exactly to the
ergodic module's supertile integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from . import geometry
from .errors import (IncompletePatternError, StructuralError,
                     UnsupportedOperationError)
from .ergodic import TLCObservable, deviation_along_sequence
from .geometry import frac
from .substitution import RuleFamily
from .tiling import Patch, Region

_DENSE_LIMIT = 4000


@dataclass
class PunctureSet:
    """One marked point per tile of a patch, with type labels."""

    points: list                   # exact coordinate tuples
    types: list                    # prototile id per point
    family: RuleFamily
    patch: Optional[Patch] = None
    source_window: Optional[Region] = None

    def __post_init__(self):
        if len(self.points) != len(self.types):
            raise StructuralError("points/types length mismatch")
        self._embedded = np.array(
            [geometry.embed_point(p, self.family.embedding)
             for p in self.points])
        self._tree = cKDTree(self._embedded) if len(self.points) else None

    def __len__(self):
        return len(self.points)

    @staticmethod
    def from_patch(patch: Patch, window: Optional[Region] = None
                   ) -> "PunctureSet":
        fam = patch.family
        if fam is None:
            raise UnsupportedOperationError("patch has no family attached")
        pts, types = [], []
        for t, off in patch.tiles:
            pts.append(geometry.vadd(fam.prototiles[t].puncture, off))
            types.append(t)
        return PunctureSet(points=pts, types=types, family=fam, patch=patch,
                           source_window=window)

    @property
    def embedded(self) -> np.ndarray:
        return self._embedded

    def min_gap(self) -> float:
        """Smallest puncture separation (uniform discreteness witness)."""
        if len(self.points) < 2:
            return math.inf
        d, _ = self._tree.query(self._embedded, k=2)
        return float(d[:, 1].min())

    def neighbors(self, radius: float):
        """Index pairs (i, j), i < j, within embedded distance radius."""
        if self._tree is None:
            return np.zeros((0, 2), dtype=int)
        pairs = self._tree.query_pairs(radius + 1e-9, output_type="ndarray")
        return pairs

    def pattern_labels(self, radius: float):
        """Hashable local-pattern key per point: the exact constellation of
        (displacement, type) within the radius, plus the point's own type."""
        nbrs = [[] for _ in range(len(self.points))]
        for i, j in self.neighbors(radius):
            disp = geometry.vsub(self.points[j], self.points[i])
            if _embedded_norm(disp, self.family.embedding) <= radius + 1e-9:
                nbrs[i].append((disp, self.types[j]))
                nbrs[j].append((geometry.vscale(-1, disp), self.types[i]))
        return [
            (self.types[i], tuple(sorted(nbrs[i])))
            for i in range(len(self.points))
        ]


def _embedded_norm(v, embedding) -> float:
    return math.dist(geometry.embed_point(v, embedding),
                     (0.0,) * len(v))


@dataclass(frozen=True)
class KernelSpec:
    """Finite-range kernel: diagonal per local pattern (or per tile type, or
    the neighbor degree), off-diagonal per displacement within the range."""

    range: float
    diagonal_by_type: Optional[tuple] = None     # value per prototile id
    diagonal_by_pattern: Optional[tuple] = None  # ((pattern key, value), ...)
    diagonal_degree: bool = False                # diag = #neighbors in range
    offdiagonal: object = 0                      # scalar, or ((disp, v), ...)
    hermitian: bool = True
    lipschitz: float = 0.0

    def __post_init__(self):
        modes = sum(x is not None for x in
                    (self.diagonal_by_type, self.diagonal_by_pattern))
        modes += self.diagonal_degree
        if modes > 1:
            raise StructuralError("choose one diagonal rule")
        if self.range < 0:
            raise StructuralError("kernel range must be >= 0")

    @staticmethod
    def identity() -> "KernelSpec":
        return KernelSpec(range=0.0, offdiagonal=0, diagonal_degree=False,
                          diagonal_by_type=None, diagonal_by_pattern=None,
                          hermitian=True)

    @staticmethod
    def typewise(values, range=0.0) -> "KernelSpec":
        return KernelSpec(range=range, diagonal_by_type=tuple(values))

    @staticmethod
    def laplacian(range: float) -> "KernelSpec":
        """Adjacency Laplacian: diag = degree, offdiag = -1 within range."""
        return KernelSpec(range=range, diagonal_degree=True, offdiagonal=-1)

    def diagonal_values(self, punctures: PunctureSet, indices, degrees):
        if self.diagonal_degree:
            return [degrees[i] for i in indices]
        if self.diagonal_by_type is not None:
            return [self.diagonal_by_type[punctures.types[i]]
                    for i in indices]
        if self.diagonal_by_pattern is not None:
            labels = punctures.pattern_labels(self.range)
            table = dict(self.diagonal_by_pattern)
            return [table.get(labels[i], 0) for i in indices]
        return [1] * len(indices)   # identity kernel

    def offdiagonal_value(self, disp):
        if isinstance(self.offdiagonal, (int, float, complex, Fraction)):
            return self.offdiagonal
        return dict(self.offdiagonal).get(disp, 0)


@dataclass
class WindowedOperator:
    """Restriction of a pattern-equivariant operator to a window."""

    matrix: sp.csr_matrix
    indices: list                   # indices into the puncture set
    punctures: PunctureSet
    kernel: KernelSpec
    window: Region

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()


def build_operator(kernel: KernelSpec, punctures: PunctureSet,
                   window: Region) -> WindowedOperator:
    """Assemble the windowed matrix; every selected point must have its full
    range-ball of punctures available in the source set."""
    fam = punctures.family
    emb = fam.embedding
    if punctures.source_window is not None and kernel.range > 0:
        from .tiling import _window_extremes
        pts = _window_extremes(window, emb)
        padded = [(p, pad + kernel.range) for p, pad in pts]
        src = punctures.source_window
        if src.kind != "disk":
            shape = src.shape()
            ok = all(_signed_margin(shape, p, emb) >= pad - 1e-9
                     for p, pad in padded)
        else:
            c = geometry.embed_point(
                geometry.vscale(src.dilation, src.center), emb)
            r = float(src.dilation) * src.radius
            ok = all(math.dist(p, c) + pad <= r + 1e-9 for p, pad in padded)
        if not ok:
            raise IncompletePatternError(
                "window plus kernel range exceeds the source patch; "
                "patterns at the rim would be incomplete")
    sel = [i for i in range(len(punctures))
           if window.contains_points([punctures.points[i]], emb)]
    pos = {i: k for k, i in enumerate(sel)}
    n = len(sel)
    rows, cols, vals = [], [], []
    degrees = {i: 0 for i in sel}
    if kernel.range > 0 and n:
        for i, j in punctures.neighbors(kernel.range):
            disp = geometry.vsub(punctures.points[j], punctures.points[i])
            if _embedded_norm(disp, emb) > kernel.range + 1e-9:
                continue
            if i in pos and j in pos:
                degrees[i] += 1
                degrees[j] += 1
                v = kernel.offdiagonal_value(disp)
                w = (np.conj(v) if kernel.hermitian
                     else kernel.offdiagonal_value(geometry.vscale(-1, disp)))
                if v:
                    rows.append(pos[i])
                    cols.append(pos[j])
                    vals.append(complex(v).real if not isinstance(
                        v, complex) else v)
                    rows.append(pos[j])
                    cols.append(pos[i])
                    vals.append(complex(w).real if not isinstance(
                        w, complex) else w)
    diag = kernel.diagonal_values(punctures, sel, degrees)
    for k, v in enumerate(diag):
        if v:
            rows.append(k)
            cols.append(k)
            vals.append(float(v) if isinstance(v, Fraction) else v)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return WindowedOperator(matrix=mat, indices=sel, punctures=punctures,
                            kernel=kernel, window=window)


def _signed_margin(shape, p, embedding) -> float:
    vs = [geometry.embed_point(v, embedding) for v in shape.vertices_list()]
    if shape.dim == 1:
        return min(p[0] - vs[0][0], vs[1][0] - p[0])
    best = math.inf
    nvs = len(vs)
    for i in range(nvs):
        ax, ay = vs[i]
        bx, by = vs[(i + 1) % nvs]
        nx, ny = ay - by, bx - ax
        norm = math.hypot(nx, ny)
        if norm:
            best = min(best, ((p[0] - ax) * nx + (p[1] - ay) * ny) / norm)
    return best


def windowed_trace(op: WindowedOperator, subregion: Region,
                   mode: str = "raw"):
    """Sum of diagonal entries over the subregion.

    raw: punctures inside the subregion.  interior-supertile: punctures of
    tiles entirely inside the subregion (the trace over O^-(subregion)),
    which matches the ergodic integral of the induced observable exactly.
    """
    fam = op.punctures.family
    emb = fam.embedding
    pts = op.punctures.points
    types = op.punctures.types
    degrees = None
    diag = op.matrix.diagonal()
    total = 0
    exact_diag = _exact_diagonal(op)
    for k, i in enumerate(op.indices):
        if mode == "raw":
            inside = subregion.contains_points([pts[i]], emb)
        elif mode == "interior-supertile":
            if op.punctures.patch is None:
                raise UnsupportedOperationError(
                    "interior-supertile mode needs the source patch")
            t, off = op.punctures.patch.tiles[i]
            shape = fam.prototiles[t].shape
            verts = [geometry.vadd(v, off) for v in _corners(shape)]
            inside = subregion.contains_points(verts, emb)
        else:
            raise StructuralError(f"unknown trace mode {mode!r}")
        if inside:
            total += exact_diag[k] if exact_diag is not None else diag[k]
    return total


def _corners(shape):
    from .tiling import _shape_corners
    return _shape_corners(shape)


def _exact_diagonal(op: WindowedOperator):
    """Rational diagonal values when the kernel rule is exact."""
    k = op.kernel
    if k.diagonal_degree:
        return None  # integer degrees are already exact in the float matrix
    if k.diagonal_by_type is not None and all(
            isinstance(v, (int, Fraction)) for v in k.diagonal_by_type):
        return [k.diagonal_by_type[op.punctures.types[i]]
                for i in op.indices]
    return None


@dataclass
class TraceDeviationReport:
    slope: float
    target: Optional[float]         # d·lambda_r/lambda_1
    ratio: Optional[float]          # lambda_r/lambda_1
    trace_flag: Optional[bool]      # ratio > (d-1)/d
    fit: object


def trace_deviation(kernel: KernelSpec, family: RuleFamily, x, seq,
                    lyapunov=None, r: int = 2) -> TraceDeviationReport:
    """Growth slope of |tr(A restricted to the averaging sets)| vs log T.

    The diagonal of a finite-range kernel induces the depth-0 observable
    w_t = diag_t / vol_t, so the trace deviation is exactly the ergodic
    deviation of that observable along the special averaging sequence.
    """
    if kernel.diagonal_by_type is None:
        raise UnsupportedOperationError(
            "trace deviation needs a typewise diagonal rule")
    vols = family.volumes()
    w = tuple(Fraction(v) / vols[t] if isinstance(v, (int, Fraction))
              else v / float(vols[t])
              for t, v in enumerate(kernel.diagonal_by_type))
    f = TLCObservable(0, w)
    fit = deviation_along_sequence(f, seq, family, x)
    target = ratio = flag = None
    if lyapunov is not None:
        lam = lyapunov.raw_exponents
        d = family.dim
        ratio = lam[r - 1] / lam[0]
        target = d * ratio
        flag = ratio > (d - 1) / d
    return TraceDeviationReport(slope=fit.slope, target=target, ratio=ratio,
                                trace_flag=flag, fit=fit)


@dataclass
class IDSReport:
    energies: np.ndarray
    curves: list                    # one IDS array per window, same grid
    labels: list                    # window descriptors
    sup_differences: list           # ||IDS_{i+1} - IDS_i||_inf


def eigenvalue_counts(matrix: sp.spmatrix, energies) -> np.ndarray:
    """#eigenvalues <= E for each E, exact up to solver tolerance.

    Dense solve below _DENSE_LIMIT points; sparse LDL^T inertia counting
    (LU with no pivoting threshold on A - E·I) above.
    """
    n = matrix.shape[0]
    energies = np.asarray(energies, dtype=float)
    if n == 0:
        return np.zeros(len(energies), dtype=int)
    if n <= _DENSE_LIMIT:
        vals = np.linalg.eigvalsh(matrix.toarray())
        return np.searchsorted(vals, energies, side="right")
    out = np.empty(len(energies), dtype=int)
    base = matrix.tocsc().astype(float)
    eye = sp.identity(n, format="csc")
    for idx, e in enumerate(energies):
        shifted = (base - e * eye).tocsc()
        lu = spla.splu(shifted, diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
        d = lu.U.diagonal()
        out[idx] = int((d < 0).sum())
    return out


def ids_estimate(kernel: KernelSpec, punctures_per_window, windows,
                 energies) -> IDSReport:
    """IDS_T(E) = #(eigenvalues <= E) / #points over a sweep of windows."""
    if not kernel.hermitian:
        raise UnsupportedOperationError("IDS needs a hermitian kernel")
    energies = np.asarray(energies, dtype=float)
    curves = []
    labels = []
    for punctures, window in zip(punctures_per_window, windows):
        op = build_operator(kernel, punctures, window)
        if op.size == 0:
            raise StructuralError(f"window {window} contains no punctures")
        counts = eigenvalue_counts(op.matrix, energies)
        curves.append(counts / op.size)
        labels.append(window)
    sups = [float(np.abs(curves[i + 1] - curves[i]).max())
            for i in range(len(curves) - 1)]
    return IDSReport(energies=energies, curves=curves, labels=labels,
                     sup_differences=sups)
