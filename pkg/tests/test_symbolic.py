from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magrotor.symbolic import I, SYMBOLS, Sym, sqrt, sym


def test_radicals_stay_exact():
    assert sqrt(2) * sqrt(2) == Sym.const(2)
    assert sqrt(8) == 2 * sqrt(2)
    assert sqrt(Fraction(1, 2)) == sqrt(2) * Fraction(1, 2)
    assert sqrt(6) * sqrt(10) == 2 * sqrt(15)
    assert sqrt(0).is_zero()
    with pytest.raises(ValueError):
        sqrt(-1)


def test_symbol_powers_combine():
    assert sym("S", Fraction(1, 2)) * sym("S", Fraction(1, 2)) == sym("S")
    assert (sym("J", -1) * sym("J")).to_text() == "1"
    with pytest.raises(ValueError):
        sym("eta", Fraction(1, 2))
    with pytest.raises(ValueError):
        sym("S", Fraction(1, 3))


def test_imaginary_unit():
    assert I * I == Sym.const(-1)
    assert (I * sqrt(3)).conjugate() == -I * sqrt(3)


def test_degree_bookkeeping():
    x = sym("wI") * sym("S", Fraction(-1, 2)) * sym("J", Fraction(1, 2)) * sym("eta", 2)
    (key, _), = x.items()
    assert Sym.key_degree(key) == 0
    assert Sym.key_eta_order(key) == 2
    assert Sym.key_power(key, "J") == Fraction(1, 2)
    assert Sym.key_eta_order(next(iter(sym("etap").items()))[0]) == 2


def test_evaluate():
    x = 3 * sqrt(2) * sym("S", Fraction(1, 2)) + I * sym("wD")
    assert x.evaluate({"S": 8.0, "wD": 2.0}) == pytest.approx(12 + 2j)


def test_coerce_rejects_floats():
    with pytest.raises(TypeError):
        Sym.coerce(0.5)


_factor = st.tuples(st.integers(-7, 7), st.integers(1, 5), st.sampled_from([1, 2, 3, 5, 6, 10]), st.booleans(),
                    st.sampled_from(SYMBOLS), st.integers(-3, 3))


def _build(parts):
    total = Sym()
    for num, den, rad, imag, name, p in parts:
        power = Fraction(p, 2) if name not in ("eta", "etap") else p
        term = Fraction(num, den) * sqrt(rad) * sym(name, power)
        if imag:
            term = term * I
        total = total + term
    return total


@given(st.lists(_factor, max_size=6))
@settings(max_examples=200, deadline=None)
def test_text_round_trip(parts):
    x = _build(parts)
    assert Sym.from_text(x.to_text()) == x


@given(st.lists(_factor, max_size=4), st.lists(_factor, max_size=4))
@settings(max_examples=100, deadline=None)
def test_conjugation_is_antilinear_and_multiplicative(a, b):
    x, y = _build(a), _build(b)
    assert (x * y).conjugate() == x.conjugate() * y.conjugate()
    assert (x * I).conjugate() == -I * x.conjugate()


def test_unknown_symbol_in_text():
    with pytest.raises(ValueError):
        Sym.from_text("3*wQ")
