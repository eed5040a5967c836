"""Exact coefficients: sums of rational x sqrt(int) x i^p x symbol powers.

Symbols are the five frequencies, S and J (half-integer powers allowed),
and the two Lamb-Dicke parameters (integer powers).  Nothing here is ever
converted to a float except by :meth:`Sym.evaluate`.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Mapping, Union

from .angular import squarefree_split

FREQS = ("wI", "wD", "wL", "wT", "wz")
HALF_POWER_SYMBOLS = FREQS + ("S", "J")
INT_POWER_SYMBOLS = ("eta", "etap")
SYMBOLS = HALF_POWER_SYMBOLS + INT_POWER_SYMBOLS
_NH = len(HALF_POWER_SYMBOLS)
_S_POS = HALF_POWER_SYMBOLS.index("S")
_J_POS = HALF_POWER_SYMBOLS.index("J")
_ETA_POS = len(HALF_POWER_SYMBOLS)

Scalar = Union[int, Fraction]


def _mul_rad(r1: int, r2: int) -> tuple[int, int]:
    """sqrt(r1) sqrt(r2) = outer * sqrt(inner) for squarefree r1, r2."""
    g = math.gcd(r1, r2)
    return g, (r1 // g) * (r2 // g)


class Sym:
    """Immutable exact coefficient.

    Internally a map from ``(radicand, ipow, exponents)`` to a nonzero
    Fraction, where ``radicand`` is squarefree, ``ipow`` is 0 or 1 and
    ``exponents`` holds doubled powers for the half-power symbols followed
    by plain powers of eta and etap.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping | None = None):
        clean = {}
        if terms:
            for k, v in terms.items():
                if v != 0:
                    clean[k] = Fraction(v)
        self._terms = clean
        self._hash = None

    # construction -------------------------------------------------------
    @classmethod
    def const(cls, value: Scalar) -> "Sym":
        return cls({(1, 0, (0,) * len(SYMBOLS)): Fraction(value)})

    @classmethod
    def sqrt(cls, value: Scalar) -> "Sym":
        """Exact sqrt of a nonnegative rational."""
        q = Fraction(value)
        if q < 0:
            raise ValueError("sqrt of a negative rational")
        if q == 0:
            return cls()
        num_out, num_in = squarefree_split(q.numerator)
        den_out, den_in = squarefree_split(q.denominator)
        rad_out, rad = _mul_rad(num_in, den_in)
        # n = a^2 b, d = c^2 e: sqrt(n/d) = a/(c e) * sqrt(b e)
        coeff = Fraction(num_out * rad_out, den_out * den_in)
        return cls({(rad, 0, (0,) * len(SYMBOLS)): coeff})

    @classmethod
    def symbol(cls, name: str, power: Scalar = 1) -> "Sym":
        p = Fraction(power)
        exps = [0] * len(SYMBOLS)
        i = SYMBOLS.index(name)
        if i < _NH:
            if (2 * p).denominator != 1:
                raise ValueError(f"{name} allows half-integer powers only")
            exps[i] = int(2 * p)
        else:
            if p.denominator != 1:
                raise ValueError(f"{name} allows integer powers only")
            exps[i] = int(p)
        return cls({(1, 0, tuple(exps)): Fraction(1)})

    @classmethod
    def imag_unit(cls) -> "Sym":
        return cls({(1, 1, (0,) * len(SYMBOLS)): Fraction(1)})

    @staticmethod
    def coerce(x) -> "Sym":
        if isinstance(x, Sym):
            return x
        if isinstance(x, (int, Fraction)):
            return Sym.const(x)
        raise TypeError(f"cannot use {type(x).__name__} as an exact coefficient")

    # algebra --------------------------------------------------------------
    def __add__(self, other) -> "Sym":
        other = Sym.coerce(other)
        out = dict(self._terms)
        for k, v in other._terms.items():
            out[k] = out.get(k, 0) + v
        return Sym(out)

    __radd__ = __add__

    def __neg__(self) -> "Sym":
        return Sym({k: -v for k, v in self._terms.items()})

    def __sub__(self, other) -> "Sym":
        return self + (-Sym.coerce(other))

    def __rsub__(self, other) -> "Sym":
        return Sym.coerce(other) - self

    def __mul__(self, other) -> "Sym":
        if isinstance(other, (int, Fraction)):
            return Sym({k: v * other for k, v in self._terms.items()})
        other = Sym.coerce(other)
        out: dict = {}
        for (r1, i1, e1), v1 in self._terms.items():
            for (r2, i2, e2), v2 in other._terms.items():
                outer, rad = _mul_rad(r1, r2)
                ip = i1 + i2
                v = v1 * v2 * outer
                if ip == 2:
                    v, ip = -v, 0
                key = (rad, ip, tuple(a + b for a, b in zip(e1, e2)))
                out[key] = out.get(key, 0) + v
        return Sym(out)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Sym":
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        raise TypeError("division only by rationals; multiply by a symbol power instead")

    def conjugate(self) -> "Sym":
        return Sym({k: (-v if k[1] else v) for k, v in self._terms.items()})

    def __pow__(self, n: int) -> "Sym":
        out = Sym.const(1)
        for _ in range(n):
            out = out * self
        return out

    # inspection -----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Sym.const(other)
        if not isinstance(other, Sym):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def items(self):
        return self._terms.items()

    def terms(self) -> list["Sym"]:
        return [Sym({k: v}) for k, v in self._terms.items()]

    @staticmethod
    def key_degree(key) -> Fraction:
        """Combined power of S and J (S ~ J ~ large)."""
        e = key[2]
        return Fraction(e[_S_POS] + e[_J_POS], 2)

    @staticmethod
    def key_eta_order(key) -> int:
        e = key[2]
        return e[_ETA_POS] + 2 * e[_ETA_POS + 1]

    @staticmethod
    def key_power(key, name: str) -> Fraction:
        i = SYMBOLS.index(name)
        e = key[2][i]
        return Fraction(e, 2) if i < _NH else Fraction(e)

    def max_degree(self):
        return max((self.key_degree(k) for k in self._terms), default=None)

    def filter(self, keep) -> "Sym":
        return Sym({k: v for k, v in self._terms.items() if keep(k)})

    def evaluate(self, values: Mapping[str, float]) -> complex:
        total = 0j
        for (rad, ip, e), v in self._terms.items():
            x = float(v) * math.sqrt(rad)
            for name, ex in zip(SYMBOLS, e):
                if ex:
                    p = ex / 2.0 if SYMBOLS.index(name) < _NH else ex
                    x *= float(values[name]) ** p
            total += x * (1j if ip else 1)
        return total

    # text form ------------------------------------------------------------
    def to_text(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for key in sorted(self._terms, key=_key_sort):
            parts.append(_render_term(key, self._terms[key]))
        out = " ".join(parts)
        return out[2:] if out.startswith("+ ") else "-" + out[2:]

    def __repr__(self) -> str:
        return f"Sym({self.to_text()})"

    @classmethod
    def from_text(cls, text: str) -> "Sym":
        text = text.strip()
        if text == "0":
            return cls()
        tokens = re.findall(r"[+-]?\s*[^+-]+", text.replace("^-", "^~").replace("e-", "e~"))
        out = cls()
        for tok in tokens:
            tok = tok.replace("^~", "^-").replace(" ", "")
            sign = -1 if tok.startswith("-") else 1
            tok = tok.lstrip("+-")
            term = cls.const(sign)
            for factor in tok.split("*"):
                if factor == "i":
                    term = term * cls.imag_unit()
                elif factor.startswith("sqrt(") and factor.endswith(")"):
                    term = term * cls.sqrt(int(factor[5:-1]))
                elif re.fullmatch(r"\d+(/\d+)?", factor):
                    term = term * Fraction(factor)
                else:
                    name, _, power = factor.partition("^")
                    if name not in SYMBOLS:
                        raise ValueError(f"unknown symbol {name!r}")
                    term = term * cls.symbol(name, Fraction(power) if power else 1)
            out = out + term
        return out


def _key_sort(key):
    rad, ip, e = key
    return (tuple(-x for x in e), rad, ip)


def _render_term(key, value: Fraction) -> str:
    rad, ip, e = key
    sign = "-" if value < 0 else "+"
    mag = abs(value)
    factors = []
    if mag != 1 or (rad == 1 and not ip and not any(e)):
        factors.append(str(mag))
    if rad != 1:
        factors.append(f"sqrt({rad})")
    if ip:
        factors.append("i")
    for name, ex in zip(SYMBOLS, e):
        if not ex:
            continue
        p = Fraction(ex, 2) if SYMBOLS.index(name) < _NH else Fraction(ex)
        factors.append(name if p == 1 else f"{name}^{p}")
    return f"{sign} " + "*".join(factors)


# short names used throughout the builders
ONE = Sym.const(1)
ZERO = Sym()
I = Sym.imag_unit()


def sym(name: str, power: Scalar = 1) -> Sym:
    return Sym.symbol(name, power)


def sqrt(x: Scalar) -> Sym:
    return Sym.sqrt(x)
