from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magrotor.bosons import (BosonPolynomial, OpExpr, UnsupportedComponent, bosonize_D, hp_map_J, hp_map_spin,
                             monomial_key, monomial_text, normal_order_product, product_rule_bosonized, rotor_hp,
                             spin_hp, spin_hp_matrices, truncate)
from magrotor.symbolic import Sym, sqrt, sym

import oracles

CUT = 9


def _fock_word(word, cut=CUT):
    """Product of raw truncated matrices for a word of (mode, dagger) letters."""
    a = oracles.lowering(cut)
    eye = np.eye(cut + 1)
    out = np.eye((cut + 1) ** 2)
    for mode, dag in word:
        op = a.T if dag else a
        out = out @ (np.kron(op, eye) if mode == "s" else np.kron(eye, op))
    return out


def _poly_word(word):
    out = BosonPolynomial.scalar(1)
    for mode, dag in word:
        out = out * (BosonPolynomial.create(mode) if dag else BosonPolynomial.annihilate(mode))
    return out


@given(st.lists(st.tuples(st.sampled_from(["s", "k"]), st.booleans()), max_size=6))
@settings(max_examples=150, deadline=None)
def test_normal_ordering_matches_fock_matrices(word):
    poly = _poly_word(word)
    got = poly.to_sparse({"s": CUT, "k": CUT}, {}).toarray()
    ref = _fock_word(word)
    occ = np.add.outer(np.arange(CUT + 1), np.arange(CUT + 1)).ravel()
    inner = np.flatnonzero(occ <= CUT - len(word))
    assert np.max(np.abs(got[np.ix_(inner, inner)] - ref[np.ix_(inner, inner)]), initial=0) < 1e-9
    for mono, _ in poly.items():
        # canonical form: creations left of annihilations, one entry per mode
        assert len({i for i, _, _ in mono}) == len(mono)


def test_commutator_and_known_orderings():
    s, sd = BosonPolynomial.annihilate("s"), BosonPolynomial.create("s")
    assert s * sd - sd * s == BosonPolynomial.scalar(1)
    assert (s * s * sd).coefficient("s+", "s^2") == Sym.const(1)
    assert (s * s * sd).coefficient("s") == Sym.const(2)
    k = BosonPolynomial.annihilate("k")
    assert s * k == k * s


def test_dagger_and_hermiticity():
    p = BosonPolynomial.monomial("s+", "k", coeff=sqrt(2) * sym("S"))
    assert p.dagger().coefficient("s", "k+") == sqrt(2) * sym("S")
    assert (p + p.dagger()).is_hermitian()
    assert not p.is_hermitian()


def test_exactness_floor_propagates():
    a = BosonPolynomial.monomial("s", coeff=sym("S", Fraction(1, 2))).with_floor(Fraction(-1, 2))
    b = BosonPolynomial.monomial("s+", coeff=sym("S", Fraction(1, 2)) + sym("S", -2))
    prod = normal_order_product(a, b)
    assert prod.floor == Fraction(0)
    for _, c in prod.items():
        assert all(Sym.key_degree(key) >= 0 for key, _ in c.items())
    assert prod.as_exact().floor is None


def test_text_round_trip_of_table_entries():
    for j, m, k in ((1, 0, 0), (1, 1, 1), (1, 1, -1), (2, 0, 1), (4, -1, 0)):
        p = bosonize_D(j, m, k)
        assert BosonPolynomial.from_text(p.to_text()) == p
        assert BosonPolynomial.from_text(p.to_text()).floor == p.floor


def test_monomial_helpers():
    key = monomial_key("m+^2", "s", "s+")
    assert monomial_text(key) == "s+ s m+^2"
    with pytest.raises(ValueError):
        monomial_key("q+")


def test_spin_hp_exact_on_fock_space_matches_spin_matrices():
    for S in (Fraction(1, 2), 1, Fraction(5, 2), 4):
        n = int(2 * S)
        hp = spin_hp_matrices(S, n + 3)
        ref = oracles.spin_matrices(S)
        # Fock occupation n corresponds to S3 = S - n; only n <= 2S is physical
        for tag in ("S3", "Sup", "Sdown"):
            assert np.max(np.abs(hp[tag][: n + 1, : n + 1] - ref[tag])) < 1e-13
        # the physical block is not left by the ladders
        assert np.max(np.abs(hp["Sdown"][n + 1:, : n + 1])) == 0


def test_hp_series_converges_to_exact_map():
    S = 20
    cut = 6
    exact = spin_hp_matrices(S, cut)["Sup"]
    errs = []
    for order in (0, 2, 4, 6):
        poly = hp_map_spin(OpExpr.op("Sup"), order)
        mat = poly.to_sparse({"s": cut}, {"S": S}).toarray()
        errs.append(np.max(np.abs(mat[:4, :4] - exact[:4, :4])))
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] < 1e-5 * np.max(np.abs(exact))


def test_hp_map_rejects_foreign_operators():
    with pytest.raises(ValueError):
        hp_map_spin(OpExpr.op("J3"), 2)
    with pytest.raises(ValueError):
        hp_map_J(OpExpr.op("S3"), 2)


def test_spin_algebra_from_hp_series():
    ops = spin_hp(3)
    comm = ops["Sup"] * ops["Sdown"] - ops["Sdown"] * ops["Sup"]
    # [S+, S-] = 2 S3 holds exactly for every term the series can vouch for
    diff = comm - ops["S3"] * 2
    assert diff.floor == -2
    assert diff.is_zero()


def test_rotor_hp_exact_parts():
    ops = rotor_hp(2)
    J = sym("J")
    assert ops["J3"].coefficient() == -J
    assert ops["Jz"].coefficient() == -J
    # the j vacuum is a coherent state of d = sqrt(2J) + j with mean d+d = 2J
    # and Poisson spread, so <(d+d/2)(d+d/2 + 1)> = (4J^2 + 2J)/4 + J
    assert ops["J2"].coefficient() == J * J + Fraction(3, 2) * J
    assert ops["Jz"].coefficient("m+", "m") == Sym.const(1)


def test_bosonized_unitarity_through_inverse_J():
    total = BosonPolynomial.scalar(-1)
    for k in (-1, 0, 1):
        d = bosonize_D(1, 0, k)
        total = total + d * d.dagger()
    offending = [mono for mono, c in total.items() for key, _ in c.items() if Sym.key_degree(key) >= -1]
    assert offending == []


def test_unsupported_components():
    with pytest.raises(UnsupportedComponent):
        bosonize_D(2, 1, 1)
    with pytest.raises(UnsupportedComponent):
        bosonize_D(3, 0, 0)
    assert bosonize_D(0, 0, 0) == BosonPolynomial.scalar(1)


def test_bosonized_D_order_filter():
    lead = bosonize_D(1, 0, 1, order=1)
    assert all(Sym.key_power(key, "J") >= Fraction(-1, 2) for _, c in lead.items() for key, _ in c.items())
    assert lead.coefficient("k+") == sym("J", Fraction(-1, 2))


@pytest.mark.parametrize("args", [(1, 0, 0, 1, 0, 0), (1, 0, 1, 1, 0, -1), (1, 1, 0, 1, -1, 0), (1, 0, 0, 1, 1, 0)])
def test_bosonized_product_rule_through_inverse_J(args):
    lhs, rhs = product_rule_bosonized(*args)
    # both sides are known through J^-1 and agree there term by term
    assert (lhs - rhs).floor == -1
    assert (lhs - rhs).is_zero()


def test_truncate_reports_dominant_dropped_terms():
    p = (BosonPolynomial.monomial("s+", "k+", "m", coeff=sym("S", Fraction(-1, 2)))
         + BosonPolynomial.monomial("s+", "s", coeff=sym("J", -2))
         + BosonPolynomial.monomial("k", coeff=Sym.const(1)))
    rep = truncate(p, 2, max_inverse_sqrtJ_power=2)
    assert rep.kept.coefficient("k") == Sym.const(1)
    assert rep.dominant_power == Fraction(-1, 2)
    assert rep.dominant_terms == [("s+ k+ m", "S^-1/2")]
