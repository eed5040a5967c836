"""Normal-ordered boson polynomials with exact coefficients.

A polynomial maps monomials to :class:`~magrotor.symbolic.Sym` values.  A
monomial is a tuple of ``(mode, creations, annihilations)`` triples sorted
by the fixed global mode order, with all creation operators of a mode to
the left of its annihilation operators.

Each polynomial may carry an exactness ``floor``: every coefficient term
whose combined S/J power is at least ``floor`` is exact, anything below it
is unknown because a series was cut.  Products and sums propagate the floor
and discard what falls below it, so a truncated expansion can never leak a
wrong coefficient into a result that looks exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Optional

import numpy as np
import scipy.sparse as sp

from .symbolic import ONE, Sym, sqrt, sym

MODES = ("c_x", "c_y", "c_z", "b_r", "b_l", "j", "s", "k", "m", "d")
MODE_INDEX = {name: i for i, name in enumerate(MODES)}


def _binom_half(n: int) -> Fraction:
    """Generalised binomial coefficient C(1/2, n)."""
    out = Fraction(1)
    for i in range(n):
        out *= (Fraction(1, 2) - i) / (i + 1)
    return out


@lru_cache(maxsize=None)
def _mode_product(c1: int, a1: int, c2: int, a2: int) -> tuple:
    """a+^c1 a^a1 a+^c2 a^a2 in normal order: tuple of ((cre, ann), weight)."""
    out = []
    for k in range(min(a1, c2) + 1):
        w = math.comb(a1, k) * math.comb(c2, k) * math.factorial(k)
        out.append(((c1 + c2 - k, a1 + a2 - k), w))
    return tuple(out)


@lru_cache(maxsize=200000)
def _monomial_product(m1: tuple, m2: tuple) -> tuple:
    d2 = {i: (c, a) for i, c, a in m2}
    partial = [((), 1)]
    seen = set()
    for i, c1, a1 in m1:
        if i in d2:
            c2, a2 = d2[i]
            opts = _mode_product(c1, a1, c2, a2)
        else:
            opts = (((c1, a1), 1),)
        seen.add(i)
        partial = [(acc + ((i, c, a),) if (c or a) else acc, w * wo)
                   for acc, w in partial for (c, a), wo in opts]
    rest = tuple((i, c, a) for i, c, a in m2 if i not in seen)
    out = {}
    for acc, w in partial:
        mono = tuple(sorted(acc + rest))
        out[mono] = out.get(mono, 0) + w
    return tuple(out.items())


def _fmax(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


class BosonPolynomial:
    """Immutable normal-ordered polynomial."""

    __slots__ = ("_terms", "floor")

    def __init__(self, terms: Optional[Mapping] = None, floor: Optional[Fraction] = None):
        clean = {}
        if terms:
            for mono, c in terms.items():
                c = Sym.coerce(c)
                if floor is not None:
                    c = c.filter(lambda key: Sym.key_degree(key) >= floor)
                if c:
                    clean[mono] = c
        self._terms = clean
        self.floor = None if floor is None else Fraction(floor)

    # construction ---------------------------------------------------------
    @classmethod
    def scalar(cls, c) -> "BosonPolynomial":
        return cls({(): Sym.coerce(c)})

    @classmethod
    def create(cls, mode: str, power: int = 1) -> "BosonPolynomial":
        return cls({((MODE_INDEX[mode], power, 0),): ONE})

    @classmethod
    def annihilate(cls, mode: str, power: int = 1) -> "BosonPolynomial":
        return cls({((MODE_INDEX[mode], 0, power),): ONE})

    @classmethod
    def number(cls, mode: str) -> "BosonPolynomial":
        return cls({((MODE_INDEX[mode], 1, 1),): ONE})

    @classmethod
    def monomial(cls, *factors: str, coeff=ONE) -> "BosonPolynomial":
        return cls({monomial_key(*factors): Sym.coerce(coeff)})

    def as_exact(self) -> "BosonPolynomial":
        """Same terms with the floor removed, i.e. the truncated expansion
        taken literally as an exact polynomial."""
        return BosonPolynomial(self._terms, None)

    def with_floor(self, floor) -> "BosonPolynomial":
        return BosonPolynomial(self._terms, _fmax(self.floor, None if floor is None else Fraction(floor)))

    # algebra --------------------------------------------------------------
    def __add__(self, other) -> "BosonPolynomial":
        other = _coerce_poly(other)
        floor = _fmax(self.floor, other.floor)
        out = dict(self._terms)
        for mono, c in other._terms.items():
            out[mono] = out[mono] + c if mono in out else c
        return BosonPolynomial(out, floor)

    __radd__ = __add__

    def __neg__(self) -> "BosonPolynomial":
        return BosonPolynomial({m: -c for m, c in self._terms.items()}, self.floor)

    def __sub__(self, other) -> "BosonPolynomial":
        return self + (-_coerce_poly(other))

    def __rsub__(self, other) -> "BosonPolynomial":
        return _coerce_poly(other) - self

    def __mul__(self, other) -> "BosonPolynomial":
        if isinstance(other, (int, Fraction, Sym)):
            c = Sym.coerce(other)
            floor = None
            if self.floor is not None:
                top = c.max_degree()
                floor = None if top is None else self.floor + top
            return BosonPolynomial({m: v * c for m, v in self._terms.items()}, floor)
        return normal_order_product(self, other)

    def __rmul__(self, other) -> "BosonPolynomial":
        if isinstance(other, (int, Fraction, Sym)):
            return self * other
        return normal_order_product(_coerce_poly(other), self)

    def __pow__(self, n: int) -> "BosonPolynomial":
        out = BosonPolynomial.scalar(1)
        for _ in range(n):
            out = out * self
        return out

    def dagger(self) -> "BosonPolynomial":
        return BosonPolynomial({tuple((i, a, c) for i, c, a in mono): v.conjugate()
                                for mono, v in self._terms.items()}, self.floor)

    # inspection -----------------------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, BosonPolynomial):
            try:
                other = _coerce_poly(other)
            except TypeError:
                return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, *factors: str) -> Sym:
        return self._terms.get(monomial_key(*factors), Sym())

    def max_degree(self):
        return max((Sym.key_degree(k) for c in self._terms.values() for k, _ in c.items()), default=None)

    def boson_degree(self) -> int:
        return max((monomial_degree(m) for m in self._terms), default=0)

    def modes(self) -> set[str]:
        return {MODES[i] for mono in self._terms for i, _, _ in mono}

    def filter(self, keep: Callable[[tuple, tuple], bool]) -> "BosonPolynomial":
        """Keep coefficient terms for which ``keep(monomial, sym_key)`` holds."""
        out = {}
        for mono, c in self._terms.items():
            c2 = c.filter(lambda key: keep(mono, key))
            if c2:
                out[mono] = c2
        return BosonPolynomial(out, self.floor)

    def is_hermitian(self) -> bool:
        return self == self.dagger()

    # text -----------------------------------------------------------------
    def to_text(self) -> str:
        """One line per monomial: ``<monomial> : <coefficient>``, sorted."""
        lines = []
        for mono in sorted(self._terms, key=_mono_sort):
            lines.append(f"{monomial_text(mono)} : {self._terms[mono].to_text()}")
        if self.floor is not None:
            lines.insert(0, f"# exact down to S/J power {self.floor}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str) -> "BosonPolynomial":
        terms = {}
        floor = None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "power" in line:
                    floor = Fraction(line.rsplit(" ", 1)[1])
                continue
            mono_txt, _, coeff_txt = line.partition(" : ")
            mono = monomial_key(*mono_txt.split()) if mono_txt != "1" else ()
            terms[mono] = Sym.from_text(coeff_txt)
        return cls(terms, floor)

    def __repr__(self) -> str:
        return f"BosonPolynomial({len(self._terms)} terms)"

    # numerics -------------------------------------------------------------
    def to_sparse(self, cutoffs: Mapping[str, int], values: Mapping[str, float]) -> sp.csr_matrix:
        """Matrix on the tensor product of truncated Fock spaces.

        ``cutoffs`` maps each mode to its largest kept occupation; modes are
        ordered as in :data:`MODES`.  Products are evaluated on the
        truncated spaces after normal ordering, so entries are exact for
        matrix elements between states well inside the cutoff.
        """
        order = [m for m in MODES if m in cutoffs]
        missing = self.modes() - set(order)
        if missing:
            raise ValueError(f"no cutoff given for modes {sorted(missing)}")
        dims = [cutoffs[m] + 1 for m in order]
        total = sp.csr_matrix((int(np.prod(dims)), int(np.prod(dims))), dtype=complex)
        for mono, c in self._terms.items():
            per = {MODES[i]: (cr, an) for i, cr, an in mono}
            mat = sp.identity(1, dtype=complex, format="csr")
            for name, dim in zip(order, dims):
                cr, an = per.get(name, (0, 0))
                a = _fock_lowering(dim)
                factor = _matpow(a.T.tocsr(), cr) @ _matpow(a, an)
                mat = sp.kron(mat, factor, format="csr")
            total = total + c.evaluate(values) * mat
        return total.tocsr()


def _matpow(a: sp.csr_matrix, n: int) -> sp.csr_matrix:
    out = sp.identity(a.shape[0], format="csr")
    for _ in range(n):
        out = out @ a
    return out


def _fock_lowering(dim: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, dim)), 1, shape=(dim, dim), format="csr")


def _coerce_poly(x) -> BosonPolynomial:
    if isinstance(x, BosonPolynomial):
        return x
    if isinstance(x, (int, Fraction, Sym)):
        return BosonPolynomial.scalar(x)
    raise TypeError(f"cannot use {type(x).__name__} as a boson polynomial")


def monomial_degree(mono: tuple) -> int:
    return sum(c + a for _, c, a in mono)


def _mono_sort(mono):
    return (monomial_degree(mono), mono)


def monomial_key(*factors: str) -> tuple:
    """Build a monomial from factors like ``"s+"``, ``"k"``, ``"m+^2"``.

    A trailing ``+`` marks a creation operator.  Factors may be given in
    any order; the result is the normal-ordered key (no reordering
    corrections are applied, so pass factors that are already normal
    ordered or commute).
    """
    acc: dict[int, list[int]] = {}
    for f in factors:
        base, _, power = f.partition("^")
        n = int(power) if power else 1
        dag = base.endswith("+")
        name = base[:-1] if dag else base
        if name not in MODE_INDEX:
            raise ValueError(f"unknown mode {name!r}")
        slot = acc.setdefault(MODE_INDEX[name], [0, 0])
        slot[0 if dag else 1] += n
    return tuple((i, c, a) for i, (c, a) in sorted(acc.items()) if c or a)


def monomial_text(mono: tuple) -> str:
    if not mono:
        return "1"
    parts = []
    for i, c, a in mono:
        if c:
            parts.append(f"{MODES[i]}+" + (f"^{c}" if c > 1 else ""))
        if a:
            parts.append(MODES[i] + (f"^{a}" if a > 1 else ""))
    return " ".join(parts)


def normal_order_product(a: BosonPolynomial, b: BosonPolynomial) -> BosonPolynomial:
    """Exact normal-ordered product ``a * b``.

    The exactness floor of the result is the larger of
    ``a.floor + max_degree(b)`` and ``b.floor + max_degree(a)``.
    """
    b = _coerce_poly(b)
    floor = None
    if a.floor is not None:
        top = b.max_degree()
        if top is not None:
            floor = a.floor + top
    if b.floor is not None:
        top = a.max_degree()
        if top is not None:
            floor = _fmax(floor, b.floor + top)
    keep = None if floor is None else (lambda key: Sym.key_degree(key) >= floor)
    out: dict = {}
    for m1, c1 in a._terms.items():
        for m2, c2 in b._terms.items():
            c = c1 * c2
            if keep is not None:
                c = c.filter(keep)
                if not c:
                    continue
            for mono, w in _monomial_product(m1, m2):
                cw = c * w if w != 1 else c
                out[mono] = out[mono] + cw if mono in out else cw
    return BosonPolynomial(out, floor)


# ---------------------------------------------------------------------------
# truncation


@dataclass
class TruncationReport:
    kept: BosonPolynomial
    dropped: BosonPolynomial
    dominant_power: Optional[Fraction]
    dominant_terms: list[tuple[str, str]]


def truncate(expr: BosonPolynomial, max_boson_degree: int,
             max_inverse_sqrtJ_power: Optional[int] = None) -> TruncationReport:
    """Drop monomials above ``max_boson_degree`` and coefficient terms whose
    power of J is below ``-max_inverse_sqrtJ_power / 2``.

    The report names the dropped terms with the largest combined S/J power,
    which are the dominant ones in the large-S, large-J regime.
    """
    cut = None if max_inverse_sqrtJ_power is None else Fraction(-max_inverse_sqrtJ_power, 2)

    def keep(mono, key):
        if monomial_degree(mono) > max_boson_degree:
            return False
        return cut is None or Sym.key_power(key, "J") >= cut

    kept = expr.filter(keep)
    dropped = expr.filter(lambda mono, key: not keep(mono, key))
    top = dropped.max_degree()
    dominant = []
    if top is not None:
        for mono, c in dropped.items():
            part = c.filter(lambda key: Sym.key_degree(key) == top)
            if part:
                dominant.append((monomial_text(mono), part.to_text()))
        dominant.sort()
    return TruncationReport(kept, dropped, top, dominant)


# ---------------------------------------------------------------------------
# Holstein-Primakoff maps

def _n(mode):
    return BosonPolynomial.number(mode)


def _c(mode, p=1):
    return BosonPolynomial.create(mode, p)


def _a(mode, p=1):
    return BosonPolynomial.annihilate(mode, p)


SQRT2S = sqrt(2) * sym("S", Fraction(1, 2))
SQRT2J = sqrt(2) * sym("J", Fraction(1, 2))


def spin_hp(series_terms: int) -> dict[str, BosonPolynomial]:
    """S3, Sup, Sdown in terms of the spin boson ``s``.

    ``Sup = sqrt(2S) (1 - s+s/(2S))^(1/2) s`` is expanded to
    ``series_terms`` orders beyond the leading one.
    """
    if series_terms < 0:
        raise ValueError("series_terms must be non-negative")
    s3 = BosonPolynomial.scalar(sym("S")) - _n("s")
    x = _n("s") * (Fraction(-1, 2) * sym("S", -1))
    series = BosonPolynomial.scalar(0)
    power = BosonPolynomial.scalar(1)
    for n in range(series_terms + 1):
        series = series + power * _binom_half(n)
        power = power * x
    up = (series * SQRT2S) * _a("s")
    up = up.with_floor(Fraction(1, 2) - series_terms)
    return {"S3": s3, "Sup": up, "Sdown": up.dagger()}


def spin_hp_matrices(S, cutoff: int) -> dict[str, np.ndarray]:
    """Exact S3, Sup, Sdown on the Fock space of ``s`` with occupations
    0..cutoff, with the square root taken as a diagonal function of the
    number operator.  Occupations above 2S give a vanishing root, so the
    physical block n <= 2S is closed under the ladders."""
    two_s = float(2 * Fraction(S))
    n = np.arange(cutoff + 1, dtype=float)
    root = np.sqrt(np.clip(two_s - n, 0.0, None))
    lower = np.diag(np.sqrt(n[1:]), 1)
    up = np.diag(root) @ lower
    return {"S3": np.diag(two_s / 2 - n), "Sup": up, "Sdown": up.conj().T}


def d_number() -> BosonPolynomial:
    """d+d with d = sqrt(2J) + j."""
    return (BosonPolynomial.scalar(2 * sym("J")) + (_a("j") + _c("j")) * SQRT2J + _n("j"))


def rotor_hp(series_terms: int) -> dict[str, BosonPolynomial]:
    """Rotor operators with ``d = sqrt(2J) + j``.

    J3, Jz and J2 are exact polynomials.  The ladders use
    ``d+d - n = 2J (1 + y)`` and expand ``(1 + y)^(1/2)`` to
    ``series_terms`` powers of ``y``.
    """
    if series_terms < 0:
        raise ValueError("series_terms must be non-negative")
    dd = d_number()
    half = dd * Fraction(1, 2)
    out = {
        "J3": -half + _n("k"),
        "Jz": -half + _n("m"),
        "J2": half * (half + 1),
    }
    base = (_a("j") + _c("j")) * (sqrt(Fraction(1, 2)) * sym("J", Fraction(-1, 2))) + _n("j") * (Fraction(1, 2) * sym("J", -1))
    for ladder, mode in (("Jup", "k"), ("J+", "m")):
        y = base - _n(mode) * (Fraction(1, 2) * sym("J", -1))
        series = BosonPolynomial.scalar(0)
        power = BosonPolynomial.scalar(1)
        for n in range(series_terms + 1):
            series = series + power * _binom_half(n)
            power = power * y
        op = (_c(mode) * series) * SQRT2J
        op = op.with_floor(Fraction(1, 2) - Fraction(series_terms, 2))
        out[ladder] = op
    out["Jdown"] = out["Jup"].dagger()
    out["J-"] = out["J+"].dagger()
    return out


class OpExpr:
    """Polynomial in named angular-momentum operators (non-commuting)."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[tuple, Sym]] = None):
        self.terms = {k: Sym.coerce(v) for k, v in (terms or {}).items() if Sym.coerce(v)}

    @classmethod
    def op(cls, tag: str) -> "OpExpr":
        return cls({(tag,): ONE})

    def __add__(self, other) -> "OpExpr":
        other = other if isinstance(other, OpExpr) else OpExpr({(): Sym.coerce(other)})
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return OpExpr(out)

    __radd__ = __add__

    def __neg__(self):
        return OpExpr({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, OpExpr) else -Sym.coerce(other))

    def __mul__(self, other) -> "OpExpr":
        if not isinstance(other, OpExpr):
            c = Sym.coerce(other)
            return OpExpr({k: v * c for k, v in self.terms.items()})
        out = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = k1 + k2
                out[k] = out[k] + v1 * v2 if k in out else v1 * v2
        return OpExpr(out)

    def __rmul__(self, other):
        c = Sym.coerce(other)
        return OpExpr({k: c * v for k, v in self.terms.items()})

    def tags(self) -> set[str]:
        return {t for k in self.terms for t in k}


SPIN_TAGS = ("S3", "Sup", "Sdown")
ROTOR_TAGS = ("J3", "Jup", "Jdown", "Jz", "J+", "J-", "J2")


def _substitute(expr: OpExpr, table: Mapping[str, BosonPolynomial]) -> BosonPolynomial:
    total = BosonPolynomial.scalar(0)
    for tags, coeff in expr.terms.items():
        term = BosonPolynomial.scalar(coeff)
        for t in tags:
            term = term * table[t]
        total = total + term
    return total


def _leading_degree(expr: OpExpr, table_leading: Mapping[str, Fraction]) -> Fraction:
    best = None
    for tags, coeff in expr.terms.items():
        d = coeff.max_degree() + sum(table_leading[t] for t in tags)
        best = d if best is None else max(best, d)
    return best


def _hp_map(expr: OpExpr, order: int, tags: tuple, builder, leading: Mapping[str, Fraction],
            step: Fraction, symbol: str) -> BosonPolynomial:
    unknown = expr.tags() - set(tags)
    if unknown:
        raise ValueError(f"operators {sorted(unknown)} are not handled by this map")
    if order < 0:
        raise ValueError("order below the leading order of the expansion")
    top = _leading_degree(expr, leading)
    if top is None:
        return BosonPolynomial.scalar(0)
    cutoff = top - Fraction(order, 2)
    n = 0
    while True:
        result = _substitute(expr, builder(n))
        if result.floor is None or result.floor <= cutoff:
            break
        n += 1
        if n > 64:
            raise RuntimeError("series did not reach the requested order")
    kept = result.filter(lambda mono, key: Sym.key_power(key, symbol) >= cutoff)
    return BosonPolynomial(dict(kept.items()), None)


def hp_map_spin(expr: OpExpr, order: int) -> BosonPolynomial:
    """Spin expression to bosons, keeping corrections up to ``(1/sqrt(S))^order``
    relative to the expression's leading power of S.  ``order=0`` gives the
    leading term, ``order=2`` the first correction of the square root."""
    return _hp_map(expr, order, SPIN_TAGS, spin_hp,
                   {"S3": Fraction(1), "Sup": Fraction(1, 2), "Sdown": Fraction(1, 2)}, Fraction(1), "S")


def hp_map_J(expr: OpExpr, order: int) -> BosonPolynomial:
    """Rotor expression to bosons, keeping corrections up to ``(1/sqrt(J))^order``
    relative to the expression's leading power of J."""
    return _hp_map(expr, order, ROTOR_TAGS, rotor_hp,
                   {"J3": Fraction(1), "Jz": Fraction(1), "J2": Fraction(2), "Jup": Fraction(1, 2),
                    "Jdown": Fraction(1, 2), "J+": Fraction(1, 2), "J-": Fraction(1, 2)},
                   Fraction(1, 2), "J")


# ---------------------------------------------------------------------------
# bosonized D-matrices, accurate through 1/J

class UnsupportedComponent(ValueError):
    pass


_RANK_WEIGHT = {1: 1, 2: 3, 4: 10}


def _polarized_bracket() -> BosonPolynomial:
    return (BosonPolynomial.scalar(1) + _n("k") + _n("m")
            - BosonPolynomial.monomial("k+", "m+") - BosonPolynomial.monomial("k", "m"))


def _table_entry(q: int, m: int, k: int) -> BosonPolynomial:
    c = _RANK_WEIGHT[q]
    inv_j = sym("J", -1)
    mixed_scale = sqrt(Fraction(c, 8)) * inv_j
    jj = _a("j") + _c("j")
    if (m, k) == (0, 0):
        return BosonPolynomial.scalar(1) - _polarized_bracket() * (c * inv_j)
    if (m, k) == (0, 1):
        lead = (_c("k") - _a("m")) * (sqrt(c) * sym("J", Fraction(-1, 2)))
        corr = jj * _c("k") + (_a("j") - _c("j") * 3) * _a("m")
        return lead - corr * mixed_scale
    if (m, k) == (1, 0):
        lead = (_c("m") - _a("k")) * (sqrt(c) * sym("J", Fraction(-1, 2)))
        corr = jj * _c("m") + (_a("j") - _c("j") * 3) * _a("k")
        return lead - corr * mixed_scale
    if q == 1 and (m, k) == (1, 1):
        jm = _c("j") - _a("j")
        bracket = ((_n("j") + 1) * 2 + _n("k") + _n("m") - BosonPolynomial.monomial("m+", "k+") * 2
                   + _a("j", 2) - jj * jj * Fraction(3, 4) - jm * jm * Fraction(1, 4))
        return (BosonPolynomial.scalar(1) - jm * (sqrt(Fraction(1, 2)) * sym("J", Fraction(-1, 2)))
                - bracket * (Fraction(1, 2) * inv_j))
    if q == 1 and (m, k) == (1, -1):
        return (_a("k", 2) - BosonPolynomial.monomial("m+", "k") * 2 + _c("m", 2)) * (Fraction(1, 2) * inv_j)
    raise UnsupportedComponent(f"no bosonized form for D^{q}_{m},{k}")


def bosonize_D(j: int, m: int, k: int, order: Optional[int] = None) -> BosonPolynomial:
    """Bosonized D^j_{mk} through 1/J in the polarized regime.

    Supported: every component of rank 1; ranks 2 and 4 for
    (m, k) in {(0, 0), (0, +-1), (+-1, 0)}; the rank-0 identity.  The result
    carries floor -1 (terms of order J^(-3/2) are not known).  ``order``
    optionally keeps only terms down to J^(-order/2).
    """
    if j == 0 and m == 0 and k == 0:
        return BosonPolynomial.scalar(1)
    if j not in _RANK_WEIGHT or abs(m) > j or abs(k) > j:
        raise UnsupportedComponent(f"no bosonized form for D^{j}_{m},{k}")
    if j > 1 and (m, k) not in ((0, 0), (0, 1), (0, -1), (1, 0), (-1, 0)):
        raise UnsupportedComponent(f"no bosonized form for D^{j}_{m},{k}")
    if (m, k) in ((0, -1), (-1, 0)):
        poly = -_table_entry(j, -m, -k).dagger()
    elif (m, k) in ((-1, -1), (-1, 1)):
        poly = _table_entry(j, -m, -k).dagger()
    else:
        poly = _table_entry(j, m, k)
    poly = poly.with_floor(-1)
    if order is not None:
        cut = Fraction(-order, 2)
        poly = poly.filter(lambda mono, key: Sym.key_power(key, "J") >= cut)
    return poly


def product_rule_bosonized(j1: int, m1: int, k1: int, j2: int, m2: int, k2: int) -> tuple[BosonPolynomial, BosonPolynomial]:
    """Both sides of the D product rule built from the bosonized table.

    Returns ``(product, expansion)`` where ``product`` multiplies the two
    bosonized factors and ``expansion`` sums the CG-weighted bosonized
    D^Q terms.  Only usable when every D^Q on the right is tabulated.
    """
    from .angular import product_expansion

    lhs = bosonize_D(j1, m1, k1) * bosonize_D(j2, m2, k2)
    rhs = BosonPolynomial.scalar(0)
    for Q, c in product_expansion(j1, m1, k1, j2, m2, k2):
        sq = c.signed_square()
        weight = Sym.sqrt(abs(sq)) * (1 if sq >= 0 else -1)
        rhs = rhs + bosonize_D(int(Q.twice_value // 2), m1 + m2, k1 + k2) * weight
    return lhs, rhs
