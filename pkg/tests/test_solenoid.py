import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randtile.errors import StructuralError
from randtile.solenoid import (CylinderObservable, SolenoidSpec, base_cell,
                               cylinder_measure, dk_check, random_observable,
                               variation)


def _partitions(items):
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in _partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1:]
        yield [[head]] + part


def _brute_variation(values):
    """Supremum of sum of oscillations over all clopen partitions."""
    best = Fraction(0)
    for part in _partitions(list(values)):
        tot = sum((max(g) - min(g) for g in part), Fraction(0))
        best = max(best, tot)
    return best


def _brute_integral(spec, f, y, path, n):
    """Unfolded weighted lattice sum: no residue folding."""
    m = f.depth
    qm = spec.q_prod(m)
    qn = spec.q_prod(n)
    grid = f.grid(spec)
    c0 = base_cell(spec, path, m)

    def w(a, j):
        if j == 0:
            return 1 - y[a]
        if j == qn:
            return y[a]
        return Fraction(1)

    total = Fraction(0)
    for j in itertools.product(range(qn + 1), repeat=spec.dim):
        wt = Fraction(1)
        for a in range(spec.dim):
            wt *= w(a, j[a])
        cell = tuple((c0[a] + j[a]) % qm for a in range(spec.dim))
        total += wt * grid[cell]
    return total


def test_spec_validation():
    with pytest.raises(StructuralError):
        SolenoidSpec(0, (2,))
    with pytest.raises(StructuralError):
        SolenoidSpec(1, (1,))
    with pytest.raises(StructuralError):
        SolenoidSpec(1, ())
    spec = SolenoidSpec(1, (2, 3), tail=(4, 5))
    assert [spec.q_at(k) for k in range(1, 7)] == [2, 3, 4, 5, 4, 5]
    assert spec.q_prod(4) == 120
    with pytest.raises(StructuralError):
        SolenoidSpec(1, (2,)).q_at(2)


def test_cylinder_measure():
    spec = SolenoidSpec.periodic([2, 3], dim=2)
    assert cylinder_measure(spec, 0) == 1
    assert cylinder_measure(spec, 1) == Fraction(1, 4)
    assert cylinder_measure(spec, 2) == Fraction(1, 36)


def test_observable_shape_and_mean():
    spec = SolenoidSpec.periodic([2], dim=1)
    f = CylinderObservable.from_array(spec, 2, [1, 2, 3, 4])
    assert f.mean(spec) == Fraction(5, 2)
    with pytest.raises(StructuralError):
        CylinderObservable.from_array(spec, 2, [1, 2, 3])


def test_variation_matches_brute_force():
    spec = SolenoidSpec.periodic([2], dim=1)
    import numpy as np
    rng = np.random.default_rng(7)
    for _ in range(20):
        vals = [Fraction(int(a), 4) for a in rng.integers(-8, 9, size=4)]
        f = CylinderObservable.from_array(spec, 2, vals)
        assert variation(f) == _brute_variation(vals)


def test_variation_simple_cases():
    spec = SolenoidSpec.periodic([2], dim=1)
    const = CylinderObservable.from_array(spec, 1, [3, 3])
    assert variation(const) == 0
    step = CylinderObservable.from_array(spec, 1, [0, 1])
    assert variation(step) == 1
    f = CylinderObservable.from_array(spec, 2, [0, 0, 1, 1])
    assert variation(f) == 2      # two disjoint jumps can be paired


def test_base_cell_mixed_radix():
    spec = SolenoidSpec.periodic([2, 3], dim=1)
    # digit g_1 in {0,1} at scale 1, digit g_2 in {0,1,2} at scale 2
    assert base_cell(spec, [(1,), (2,)], 2) == (5,)
    assert base_cell(spec, [(0,), (1,)], 2) == (2,)
    with pytest.raises(StructuralError):
        base_cell(spec, [(1,), (3,)], 2)
    with pytest.raises(StructuralError):
        base_cell(spec, [(1,)], 2)


def test_dk_integral_matches_brute_force_1d():
    spec = SolenoidSpec.periodic([2], dim=1)
    f = CylinderObservable.from_array(
        spec, 2, [Fraction(1, 2), Fraction(-3, 4), 2, Fraction(1, 8)])
    y = (Fraction(3, 7),)
    path = [(1,), (0,)]
    rep = dk_check(spec, f, y, path, range(0, 4))
    for entry in rep.entries:
        assert entry.integral == _brute_integral(spec, f, y, path, entry.n)
        assert entry.target == f.mean(spec) * spec.q_prod(entry.n)


def test_dk_integral_matches_brute_force_2d():
    spec = SolenoidSpec.periodic([2, 3], dim=2)
    f = random_observable(spec, 2, seed=1)
    y = (Fraction(1, 3), Fraction(5, 8))
    path = [(1, 0), (2, 1)]
    rep = dk_check(spec, f, y, path, range(0, 4))
    for entry in rep.entries:
        assert entry.integral == _brute_integral(spec, f, y, path, entry.n)


def test_dk_gap_zero_beyond_depth():
    """For n >= depth the cube averages the observable exactly."""
    spec = SolenoidSpec.periodic([2, 3], dim=1)
    f = random_observable(spec, 2, seed=5)
    rep = dk_check(spec, f, (Fraction(2, 5),), [(1,), (0,)], range(2, 7))
    assert all(e.gap == 0 for e in rep.entries)


def test_dk_bound_holds_and_shift_invariance():
    spec = SolenoidSpec.periodic([2], dim=1)
    f = random_observable(spec, 2, seed=11)
    shifted = CylinderObservable(2, tuple(v + 7 for v in f.values))
    y = (Fraction(1, 4),)
    path = [(0,), (1,)]
    a = dk_check(spec, f, y, path, range(0, 6))
    b = dk_check(spec, shifted, y, path, range(0, 6))
    assert a.holds and b.holds
    assert [e.gap for e in a.entries] == [e.gap for e in b.entries]
    assert a.var == b.var


def test_random_observable_reproducible():
    spec = SolenoidSpec.periodic([2], dim=1)
    a = random_observable(spec, 2, seed=3, worker_id=1)
    b = random_observable(spec, 2, seed=3, worker_id=1)
    c = random_observable(spec, 2, seed=3, worker_id=2)
    assert a.values == b.values
    assert a.values != c.values


def test_dk_offset_validation():
    spec = SolenoidSpec.periodic([2], dim=1)
    f = random_observable(spec, 1, seed=0)
    with pytest.raises(StructuralError):
        dk_check(spec, f, (Fraction(3, 2),), [(0,)], [1])
    with pytest.raises(StructuralError):
        dk_check(spec, f, (Fraction(1, 2), Fraction(0)), [(0,)], [1])


@given(st.integers(0, 2 ** 30), st.integers(0, 2))
@settings(max_examples=25, deadline=None)
def test_dk_bound_property(seed, depth):
    spec = SolenoidSpec.periodic([2], dim=1)
    f = random_observable(spec, depth, seed)
    gen_y = Fraction(seed % 16, 16)
    path = [((seed >> k) % 2,) for k in range(depth)]
    rep = dk_check(spec, f, (gen_y,), path, range(0, 6))
    assert rep.holds
    assert rep.max_gap <= rep.var
