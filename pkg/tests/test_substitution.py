import json
from fractions import Fraction

import numpy as np
import pytest

from randtile.errors import StructuralError
from randtile.substitution import (builtin_families, builtin_family,
                                   family_from_json, family_to_json,
                                   load_family, save_family,
                                   solenoid_family, substitution_matrix,
                                   validate_rule)


def test_half_hex_prototiles(hh):
    assert hh.n_prototiles == 6
    for p in hh.prototiles:
        assert p.volume == Fraction(3, 4)
        assert p.rho(hh.embedding) > 0


def test_half_hex_rule1_matrix(hh):
    a = substitution_matrix(hh.rules[0], 6)
    # circulant with first row (1, 0, 1, 1, 1, 0)
    row = (1, 0, 1, 1, 1, 0)
    for i in range(6):
        for j in range(6):
            assert a[i, j] == row[(j - i) % 6]
    assert (a == a.T).all()
    assert (a.sum(axis=1) == 4).all()


def test_half_hex_rule2_matrix(hhp):
    a = substitution_matrix(hhp.rules[1], 6)
    row = (6, 2, 1, 4, 2, 1)
    for i in range(6):
        for j in range(6):
            assert a[i, j] == row[(j - i) % 6]
    assert (a.sum(axis=1) == 16).all()


def test_geometric_flags(hh, hhp, odp, sol1, sol2):
    assert hh.geometric
    assert not hhp.geometric          # rule 2 is matrix-only
    assert hhp.rules[0].is_geometric
    assert odp.geometric and sol1.geometric and sol2.geometric


@pytest.mark.parametrize("fam_name", ["half-hex-classical", "solenoid-2-1d",
                                      "solenoid-2x3-2d", "one-d-pair"])
def test_validate_rule_exact(fam_name):
    fam = builtin_family(fam_name)
    for rule in fam.rules:
        rep = validate_rule(rule, fam.prototiles)
        assert rep.passed
        assert rep.max_overlap == 0
        assert all(r == 0 for r in rep.residuals.values())


def test_validate_rule_rejects_matrix_only(hhp):
    with pytest.raises(StructuralError):
        validate_rule(hhp.rules[1], hhp.prototiles)


def test_volume_eigenvector_identity():
    """A · vol = theta^{-d} · vol for every rule of every built-in family."""
    for fam in builtin_families():
        vols = np.array(fam.volumes(), dtype=object)
        for rule in fam.rules:
            a = substitution_matrix(rule, fam.n_prototiles).astype(object)
            scale = Fraction(1) / rule.theta ** fam.dim
            assert (a @ vols == scale * vols).all()


def test_rule_symbol_indexing(odp):
    assert odp.rule(1).id == 1
    assert odp.rule(2).id == 2
    with pytest.raises(StructuralError):
        odp.rule(0)
    with pytest.raises(StructuralError):
        odp.rule(3)


def test_solenoid_family_structure():
    fam = solenoid_family([2, 3], 2)
    assert fam.n_prototiles == 1
    assert len(fam.rules[0].branches) == 4
    assert len(fam.rules[1].branches) == 9
    assert fam.rules[0].theta == Fraction(1, 2)
    assert fam.rules[1].theta == Fraction(1, 3)


def test_builtin_family_lookup():
    assert builtin_family("half-hex-pair").name == "half-hex-pair"
    assert builtin_family("solenoid-5-1d").rules[0].theta == Fraction(1, 5)
    with pytest.raises(StructuralError):
        builtin_family("no-such-family")


def test_json_round_trip(tmp_path):
    for fam in builtin_families():
        path = tmp_path / f"{fam.name}.json"
        save_family(fam, path)
        back = load_family(path)
        assert family_to_json(back) == family_to_json(fam)
        assert back.geometric == fam.geometric
        assert back.volumes() == fam.volumes()


def test_json_is_plain_data(tmp_path, hh):
    path = tmp_path / "fam.json"
    save_family(hh, path)
    data = json.loads(path.read_text())
    assert data["dimension"] == 2
    assert len(data["prototiles"]) == 6
    assert all("theta" in r for r in data["rules"])
    assert family_from_json(data).n_prototiles == 6
