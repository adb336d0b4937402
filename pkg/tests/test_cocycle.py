import math
from fractions import Fraction

import numpy as np
import pytest

from randtile.cocycle import (CocycleProduct, apply_cocycle, lyapunov_spectrum,
                              top_left_direction)
from randtile.errors import ConvergenceError, StructuralError
from randtile.substitution import (matrix_only_family, substitution_matrix)
from randtile.symbolic import MeasureSpec, SymbolSequence

LOG2 = math.log(2.0)
LOG4 = math.log(4.0)
LOG16 = math.log(16.0)
LOG52_HALF = 0.5 * math.log(52.0)


def test_cocycle_product_identity():
    prod = CocycleProduct(4, reorth_every=3)
    for _ in range(10):
        prod.push(np.eye(4))
    prod.check_frame()
    assert np.allclose(prod.lognorms, 0.0)
    assert not prod.dead.any()


def test_cocycle_product_scaling():
    prod = CocycleProduct(2, reorth_every=2)
    for _ in range(50):
        prod.push(np.diag([2.0, 0.5]))
    prod.reorthonormalize()
    assert prod.lognorms[0] == pytest.approx(50 * LOG2)
    assert prod.lognorms[1] == pytest.approx(-50 * LOG2)


def test_cocycle_kernel_detection():
    prod = CocycleProduct(2, reorth_every=1)
    prod.push(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert prod.dead.tolist() == [False, True]
    assert prod.lognorms[1] == float("-inf")


def test_cocycle_dimension_check():
    with pytest.raises(StructuralError):
        CocycleProduct(3).push(np.eye(2))
    with pytest.raises(StructuralError):
        CocycleProduct(3, reorth_every=0)


def test_lyapunov_p1_endpoint(hhp):
    rep = lyapunov_spectrum(hhp, MeasureSpec.bernoulli_p(1.0), 20000, seed=0)
    targets = [LOG4, LOG2, 0.0, 0.0, 0.0, 0.0]
    for lam, se, t in zip(rep.raw_exponents, rep.raw_stderrs, targets):
        assert abs(lam - t) <= 3 * se
    assert sum(rep.multiplicities) == 6
    assert rep.exponents == sorted(rep.exponents, reverse=True)


def test_lyapunov_p0_endpoint(hhp):
    rep = lyapunov_spectrum(hhp, MeasureSpec.bernoulli_p(0.0), 20000, seed=0)
    targets = [LOG16, LOG52_HALF, LOG52_HALF, LOG2, LOG2, LOG2]
    for lam, se, t in zip(rep.raw_exponents, rep.raw_stderrs, targets):
        assert abs(lam - t) <= 3 * se


def test_lyapunov_determinant_identity(hhp):
    """The exponents sum to E[log|det A|]: log 8 at p=1, log 6656 at p=0."""
    a1 = substitution_matrix(hhp.rules[0], 6).astype(float)
    a2 = substitution_matrix(hhp.rules[1], 6).astype(float)
    assert round(np.linalg.det(a1)) == 8
    assert round(np.linalg.det(a2)) == 6656
    for p, det in ((1.0, 8.0), (0.0, 6656.0)):
        rep = lyapunov_spectrum(hhp, MeasureSpec.bernoulli_p(p), 20000, seed=1)
        assert sum(rep.raw_exponents) == pytest.approx(math.log(det), abs=1e-6)


def test_lyapunov_seed_reproducibility(hhp):
    m = MeasureSpec.bernoulli_p(0.5)
    a = lyapunov_spectrum(hhp, m, 2000, seed=5)
    b = lyapunov_spectrum(hhp, m, 2000, seed=5)
    assert a.raw_exponents == b.raw_exponents
    assert a.stderrs == b.stderrs


def test_lyapunov_reorth_insensitive(hhp):
    m = MeasureSpec.bernoulli_p(1.0)
    a = lyapunov_spectrum(hhp, m, 5000, seed=0, reorth_every=1)
    b = lyapunov_spectrum(hhp, m, 5000, seed=0, reorth_every=10)
    for x, y in zip(a.raw_exponents, b.raw_exponents):
        assert x == pytest.approx(y, abs=1e-9)


def test_lyapunov_explicit_sequence(hhp):
    x = SymbolSequence.constant(1, 5000)
    rep = lyapunov_spectrum(hhp, MeasureSpec.bernoulli_p(0.5), 5000, seed=0,
                            x=x)
    assert rep.top == pytest.approx(LOG4, abs=1e-3)
    with pytest.raises(StructuralError):
        lyapunov_spectrum(hhp, MeasureSpec.bernoulli_p(0.5), 6000, seed=0, x=x)


def test_lyapunov_minimum_steps(hhp):
    with pytest.raises(StructuralError):
        lyapunov_spectrum(hhp, MeasureSpec.bernoulli_p(0.5), 500, seed=0)


def test_normalized_spectrum(hhp):
    rep = lyapunov_spectrum(hhp, MeasureSpec.bernoulli_p(0.0), 20000, seed=0)
    norm = rep.normalized()
    assert norm[0] == 1.0
    assert norm[1] == pytest.approx(LOG52_HALF / LOG16, abs=0.02)


def test_apply_cocycle_exact(hhp):
    a1 = substitution_matrix(hhp.rules[0], 6)
    out = apply_cocycle([a1] * 5, [1] * 6)
    assert out.tolist() == [4 ** 5] * 6
    frac_out = apply_cocycle([a1], [Fraction(1, 3)] * 6)
    assert frac_out.tolist() == [Fraction(4, 3)] * 6


def test_top_left_direction_half_hex(hhp):
    x = SymbolSequence.constant(1, 40)
    u = top_left_direction(hhp, x, 40)
    assert np.allclose(u, np.full(6, 1 / math.sqrt(6)), atol=1e-12)


def test_top_left_direction_single_type(sol1):
    x = SymbolSequence.constant(1, 10)
    assert top_left_direction(sol1, x, 10).tolist() == [1.0]


def test_top_left_direction_no_gap():
    fam = matrix_only_family("perm", [np.eye(2, dtype=int)], dim=1)
    x = SymbolSequence.constant(1, 30)
    with pytest.raises(ConvergenceError):
        top_left_direction(fam, x, 30)
