"""Matrix cocycles over symbol sequences and their Lyapunov spectrum.

The cocycle acts on cotrace vectors by plain left multiplication: after k
steps the accumulated map is A_{x_k}···A_{x_1}.  Exponents are estimated by
the discrete-QR method with periodic re-orthonormalization; standard errors
come from batch means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConvergenceError, StructuralError
from .substitution import RuleFamily, substitution_matrix
from .symbolic import MeasureSpec, SymbolSequence, sample_sequence

NEG_INF = float("-inf")
_ORTHO_TOL = 1e-10
_UNDERFLOW_LOG = -600.0  # running column norm below e^-600 => kernel direction


def _family_matrices(family: RuleFamily):
    m = family.n_prototiles
    return [substitution_matrix(rule, m).astype(float) for rule in family.rules]


class CocycleProduct:
    """QR-factored running product A_{i_k}···A_{i_1}.

    Maintains an orthonormal frame Q and accumulated log-norms per column, so
    arbitrarily long products never overflow.  Factors are pushed one at a
    time; re-orthonormalization happens every `reorth_every` pushes.
    """

    def __init__(self, dim: int, reorth_every: int = 5):
        if reorth_every < 1:
            raise StructuralError("reorth_every must be >= 1")
        self.dim = dim
        self.reorth_every = reorth_every
        self.frame = np.eye(dim)
        self.lognorms = np.zeros(dim)
        self.indices = []
        self.dead = np.zeros(dim, dtype=bool)   # kernel directions (V^inf)
        self._pending = 0

    def push(self, a: np.ndarray, index: Optional[int] = None):
        a = np.asarray(a, dtype=float)
        if a.shape != (self.dim, self.dim):
            raise StructuralError("factor dimension mismatch")
        self.frame = a @ self.frame
        self.indices.append(index)
        self._pending += 1
        if self._pending >= self.reorth_every:
            self.reorthonormalize()
        return self

    def reorthonormalize(self):
        """QR-factor the frame, rolling column norms into the log accumulator."""
        if self._pending == 0:
            return
        q, r = np.linalg.qr(self.frame)
        diag = np.abs(np.diag(r))
        with np.errstate(divide="ignore"):
            logs = np.log(diag)
        self.dead |= np.logical_or(diag == 0.0,
                                   self.lognorms + logs < _UNDERFLOW_LOG)
        self.lognorms = np.where(self.dead, NEG_INF, self.lognorms + logs)
        self.frame = q
        self._pending = 0

    def check_frame(self):
        self.reorthonormalize()
        err = np.abs(self.frame.T @ self.frame - np.eye(self.dim)).max()
        if err > _ORTHO_TOL:
            raise StructuralError(f"frame lost orthonormality ({err:.2e})")
        return err


@dataclass
class LyapunovReport:
    """Estimated Lyapunov exponents, largest first, in nats per shift step."""

    exponents: list                 # one entry per distinct exponent
    multiplicities: list
    stderrs: list                   # combined standard error per group
    steps: int
    seed: int
    measure: MeasureSpec
    raw_exponents: list = None      # all dim exponents before grouping
    raw_stderrs: list = None

    @property
    def top(self) -> float:
        return self.exponents[0]

    def normalized(self) -> list:
        """lambda_i / lambda_1 over the raw (ungrouped) spectrum."""
        return [e / self.top for e in self.raw_exponents]


def _group_exponents(exponents, stderrs, merge_factor: float = 5.0):
    """Merge exponents whose gap is within merge_factor * combined stderr."""
    groups = []
    for lam, se in zip(exponents, stderrs):
        if groups:
            lam0, ses = groups[-1]
            combined = math.hypot(se, ses[-1])
            if lam == lam0[-1] or (math.isfinite(lam) and math.isfinite(lam0[-1])
                                   and lam0[-1] - lam <= merge_factor * combined):
                lam0.append(lam)
                ses.append(se)
                continue
        groups.append(([lam], [se]))
    out_e, out_m, out_se = [], [], []
    for lams, ses in groups:
        finite = [v for v in lams if math.isfinite(v)]
        out_e.append(sum(finite) / len(finite) if finite else NEG_INF)
        out_m.append(len(lams))
        out_se.append(math.sqrt(sum(s * s for s in ses)) / len(ses))
    return out_e, out_m, out_se


def lyapunov_spectrum(family: RuleFamily, measure: MeasureSpec, steps: int,
                      seed: int, reorth_every: int = 5,
                      x: Optional[SymbolSequence] = None) -> LyapunovReport:
    """Discrete-QR estimate of all exponents of A_{x_k}···A_{x_1}.

    Standard errors are batch means over >= 20 batches, floored at 20/steps
    so deterministic (single-matrix) sequences still report the finite-step
    truncation error scale.
    """
    if steps < 1000:
        raise StructuralError("steps must be >= 1000")
    mats = _family_matrices(family)
    dim = family.n_prototiles
    if x is None:
        x = sample_sequence(measure, steps, seed)
    elif len(x) < steps:
        raise StructuralError("provided sequence shorter than steps")

    n_batches = max(20, min(50, steps // 200))
    edges = np.linspace(0, steps, n_batches + 1).astype(int)
    prod = CocycleProduct(dim, reorth_every=reorth_every)
    batch_sums = np.zeros((n_batches, dim))
    prev = prod.lognorms.copy()
    b = 0
    for k in range(1, steps + 1):
        prod.push(mats[x[k] - 1], index=x[k])
        if k == edges[b + 1]:
            prod.reorthonormalize()
            cur = prod.lognorms
            delta = np.where(np.isinf(cur), 0.0, cur - np.where(
                np.isinf(prev), 0.0, prev))
            batch_sums[b] = delta
            prev = cur.copy()
            b += 1
    prod.check_frame()

    lens = np.diff(edges)
    batch_means = batch_sums / lens[:, None]
    raw = [NEG_INF if prod.dead[i] else float(prod.lognorms[i]) / steps
           for i in range(dim)]
    se = np.std(batch_means, axis=0, ddof=1) / math.sqrt(n_batches)
    floor = 20.0 / steps
    raw_se = [max(float(s), floor) for s in se]

    order = sorted(range(dim), key=lambda i: (not math.isfinite(raw[i]),
                                              -raw[i] if math.isfinite(raw[i])
                                              else 0.0))
    raw_sorted = [raw[i] for i in order]
    se_sorted = [raw_se[i] for i in order]
    exps, mults, gses = _group_exponents(raw_sorted, se_sorted)
    return LyapunovReport(exponents=exps, multiplicities=mults, stderrs=gses,
                          steps=steps, seed=seed, measure=measure,
                          raw_exponents=raw_sorted, raw_stderrs=se_sorted)


def apply_cocycle(matrices, v):
    """A_k···A_1·v for an explicit ordered factor list; exact for integral v."""
    vec = list(v)
    exact = all(isinstance(c, int) or (hasattr(c, "denominator"))
                for c in vec)
    out = np.array(vec, dtype=object if exact else float)
    for a in matrices:
        m = np.asarray(a)
        out = (m.astype(object) if exact else m.astype(float)) @ out
    return out


def top_left_direction(family: RuleFamily, x: SymbolSequence, depth: int,
                       gap_tol: float = 1e-9) -> np.ndarray:
    """Unit vector u aligned with the image of generic vectors under
    A_{x_depth}···A_{x_1}: the top left singular direction of the product.

    The product is rescaled every step to avoid overflow; a convergence error
    is raised when the top singular gap is below gap_tol (no dominant
    direction, e.g. identity factors).
    """
    if depth < 1:
        raise StructuralError("depth must be >= 1")
    mats = _family_matrices(family)
    dim = family.n_prototiles
    prod = np.eye(dim)
    for k in range(1, depth + 1):
        prod = mats[x[k] - 1] @ prod
        scale = np.abs(prod).max()
        if scale == 0.0:
            raise ConvergenceError("product vanished; no dominant direction")
        prod /= scale
    u, s, _ = np.linalg.svd(prod)
    if dim > 1 and (s[0] - s[1]) <= gap_tol * s[0]:
        raise ConvergenceError(
            f"no singular gap after {depth} factors "
            f"(sigma1={s[0]:.3e}, sigma2={s[1]:.3e})")
    vec = u[:, 0]
    lead = next(c for c in vec if abs(c) > 1e-12)
    if lead < 0:
        vec = -vec
    return vec
