"""Symbolic bosonization of the full Hamiltonian.

Every part of the Hamiltonian is mapped to normal-ordered boson polynomials
with exact coefficients, split by source and by Lamb-Dicke grade (number of
field derivatives).  The quadratic part is compared monomial by monomial
with the reference dictionary in :mod:`magrotor.hamiltonian`.

Coefficients carry an exactness floor in the combined power of S and J;
nothing below the floor is reported as a result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .bosons import BosonPolynomial, MODES, bosonize_D, monomial_degree, monomial_text, rotor_hp, spin_hp
from .hamiltonian import HG_MODES, FrequencySet, QuadraticBosonForm, hg_dictionary
from .symbolic import I, Sym, sqrt, sym
from .trap import body_frame_n_coefficients

SOURCES = ("H0", "HI", "VD0", "VD1", "VD2", "VP1", "VP2")


class PipelineOrderError(ValueError):
    """Requested orders cannot produce every quadratic coefficient."""


@dataclass(frozen=True)
class PipelineOrders:
    lamb_dicke: int = 2
    boson_degree: int = 2
    spin_series: int = 2
    rotor_series: int = 3
    eta_cap: int = 2

    def check(self) -> None:
        if self.lamb_dicke < 1:
            raise PipelineOrderError("Lamb-Dicke order 1 is needed for the centre-of-mass couplings")
        if self.boson_degree < 2:
            raise PipelineOrderError("boson degree 2 is needed for a quadratic Hamiltonian")
        if self.spin_series < 1:
            raise PipelineOrderError("spin series order 1 is needed for the anisotropy couplings")
        if self.rotor_series < 2:
            raise PipelineOrderError("rotor series order 2 is needed for the interaction couplings")
        if self.eta_cap < self.lamb_dicke:
            raise PipelineOrderError("eta cap must not be below the Lamb-Dicke order")


@dataclass(frozen=True)
class CoefficientCheck:
    group: str
    monomial: str
    expected: Sym
    found: Sym
    reliable: bool

    @property
    def matches(self) -> bool:
        return self.reliable and (self.expected - self.found).is_zero()


@dataclass(frozen=True)
class DroppedTerm:
    source: str
    monomial: str
    coefficient: Sym
    reason: str
    degree: Fraction
    eta_order: int


@dataclass
class PipelineResult:
    sources: dict[str, BosonPolynomial]
    quadratic: dict[str, BosonPolynomial]
    checks: list[CoefficientCheck]
    dropped: list[DroppedTerm]
    orders: PipelineOrders

    @property
    def hg(self) -> BosonPolynomial:
        total = BosonPolynomial.scalar(0)
        for p in self.quadratic.values():
            total = total + p.as_exact()
        return total

    def form(self, freqs: FrequencySet) -> QuadraticBosonForm:
        return QuadraticBosonForm.from_polynomial(self.hg, freqs.symbol_values(), HG_MODES)

    def failures(self) -> list[CoefficientCheck]:
        return [c for c in self.checks if not c.matches]

    def dominant_dropped(self, source: str, reason: str) -> list[DroppedTerm]:
        rows = [d for d in self.dropped if d.source == source and d.reason == reason]
        if not rows:
            return []
        top = max(d.degree for d in rows)
        return [d for d in rows if d.degree == top]

    def report(self) -> dict:
        return {
            "checks": [{"group": c.group, "monomial": c.monomial, "expected": c.expected.to_text(),
                        "found": c.found.to_text(), "reliable": c.reliable, "match": c.matches}
                       for c in self.checks],
            "floors": {k: (None if v.floor is None else str(v.floor)) for k, v in self.sources.items()},
            "dropped": [{"source": d.source, "monomial": d.monomial, "coefficient": d.coefficient.to_text(),
                         "reason": d.reason, "degree": str(d.degree), "eta_order": d.eta_order}
                        for d in self.dropped],
        }


# ---------------------------------------------------------------------------
# graded polynomials: {grade: BosonPolynomial}

Graded = dict


def _gadd(*parts: Graded) -> Graded:
    out: Graded = {}
    for p in parts:
        for g, v in p.items():
            out[g] = out[g] + v if g in out else v
    return out


def _gscale(p: Graded, c) -> Graded:
    return {g: v * c for g, v in p.items()}


class _Context:
    def __init__(self, orders: PipelineOrders):
        self.orders = orders
        self.cap = orders.eta_cap
        self.max_grade = orders.lamb_dicke

    def prune(self, poly: BosonPolynomial) -> BosonPolynomial:
        cap = self.cap
        return poly.filter(lambda mono, key: Sym.key_eta_order(key) <= cap)

    def mul(self, a: Graded, b: Graded) -> Graded:
        out: Graded = {}
        for g1, p in a.items():
            for g2, q in b.items():
                g = g1 + g2
                if g > self.max_grade:
                    continue
                r = self.prune(p * q)
                out[g] = out[g] + r if g in out else r
        return out

    def sym_product(self, a: Graded, b: Graded) -> Graded:
        return _gscale(_gadd(self.mul(a, b), self.mul(b, a)), Fraction(1, 2))


def _flat(p) -> Graded:
    return {0: p if isinstance(p, BosonPolynomial) else BosonPolynomial.scalar(p)}


def _c(mode):
    return BosonPolynomial.create(mode)


def _a(mode):
    return BosonPolynomial.annihilate(mode)


def quadratures() -> dict[str, BosonPolynomial]:
    """c_nu + c_nu^+ with the transverse modes written in circular modes
    b_r, b_l: c_x = (b_r + b_l)/sqrt 2, c_y = i (b_r - b_l)/sqrt 2."""
    h = sqrt(Fraction(1, 2))
    cx = (_a("b_r") + _a("b_l")) * h
    cy = (_a("b_r") - _a("b_l")) * (I * h)
    cz = _a("c_z")
    return {"x": cx + cx.dagger(), "y": cy + cy.dagger(), "z": cz + cz.dagger()}


def momenta() -> dict[str, BosonPolynomial]:
    """c_nu^+ - c_nu in the same modes."""
    h = sqrt(Fraction(1, 2))
    cx = (_a("b_r") + _a("b_l")) * h
    cy = (_a("b_r") - _a("b_l")) * (I * h)
    cz = _a("c_z")
    return {"x": cx.dagger() - cx, "y": cy.dagger() - cy, "z": cz.dagger() - cz}


def _D_table() -> dict[tuple[int, int], BosonPolynomial]:
    return {(m, k): bosonize_D(1, m, k) for m in (-1, 0, 1) for k in (-1, 0, 1)}


def bosonized_n(ctx: _Context, D=None) -> dict[str, Graded]:
    D = D or _D_table()
    Q = quadratures()
    out = {c: {} for c in ("n3", "nup", "ndown")}
    for o in range(ctx.max_grade + 1):
        for (comp, deriv), entries in body_frame_n_coefficients(o).items():
            poly = BosonPolynomial.scalar(1)
            for axis in deriv:
                poly = poly * Q[axis]
            if len(deriv) == 2 and deriv[0] == deriv[1]:
                poly = poly * Fraction(1, 2)
            ang = BosonPolynomial.scalar(0)
            for mk, w in entries:
                ang = ang + D[mk] * w
            term = ctx.prune(poly * ang)
            out[comp] = _gadd(out[comp], {o: term})
    return out


def bosonized_gradients(ctx: _Context, D=None) -> dict[str, dict[str, Graded]]:
    D = D or _D_table()
    Q = quadratures()
    out = {}
    for nu in "xyz":
        comps = {c: {} for c in ("n3", "nup", "ndown")}
        for o in range(1, ctx.max_grade + 1):
            for (comp, deriv), entries in body_frame_n_coefficients(o).items():
                if nu not in deriv:
                    continue
                rest = deriv.replace(nu, "", 1)
                poly = BosonPolynomial.scalar(1)
                for axis in rest:
                    poly = poly * Q[axis]
                ang = BosonPolynomial.scalar(0)
                for mk, w in entries:
                    ang = ang + D[mk] * w
                comps[comp] = _gadd(comps[comp], {o: ctx.prune(poly * ang)})
        out[nu] = comps
    return out


def _cartesian(up: Graded, down: Graded, z: Graded) -> dict[int, Graded]:
    return {1: _gscale(_gadd(up, down), Fraction(1, 2)),
            2: _gscale(_gadd(up, _gscale(down, -1)), I * Fraction(1, 2)),
            3: z}


def _source_polynomials(orders: PipelineOrders) -> dict[str, BosonPolynomial]:
    ctx = _Context(orders)
    spin = spin_hp(orders.spin_series)
    rot = rotor_hp(orders.rotor_series)
    S3, Sup, Sdn = spin["S3"], spin["Sup"], spin["Sdown"]
    inv_S = sym("S", -1)
    wI, wD, wL = sym("wI"), sym("wD"), sym("wL")
    freq = {"x": sym("wT"), "y": sym("wT"), "z": sym("wz")}
    Q, P = quadratures(), momenta()

    out: dict[str, BosonPolynomial] = {}
    h0 = S3 * wL - (S3 * S3) * (wD * inv_S) + (rot["J2"] + rot["J3"] * S3 * 2) * (wI * inv_S * Fraction(1, 2))
    for nu in "xyz":
        w = freq[nu]
        h0 = h0 - (P[nu] * P[nu]) * (w * Fraction(1, 4)) + (S3 * Q[nu] * Q[nu]) * (w * inv_S * Fraction(1, 4))
    out["H0"] = h0
    out["HI"] = (rot["Jup"] * Sdn + rot["Jdown"] * Sup) * (wI * inv_S * Fraction(1, 2))

    D = _D_table()
    n = bosonized_n(ctx, D)
    s3, sup, sdn = _flat(S3), _flat(Sup), _flat(Sdn)
    flip = _gadd(ctx.mul(n["nup"], sdn), ctx.mul(n["ndown"], sup))
    one_minus = _gadd(_flat(1), _gscale(ctx.mul(n["n3"], n["n3"]), -2))
    bracket = _gadd(ctx.mul(s3, one_minus), _gscale(ctx.sym_product(n["n3"], flip), -1))
    vd = _gadd(_gscale(ctx.mul(s3, s3), wD * inv_S), _gscale(ctx.mul(bracket, bracket), -wD * inv_S))
    for g in range(3):
        out[f"VD{g}"] = vd.get(g, BosonPolynomial.scalar(0))

    G = bosonized_gradients(ctx, D)
    Sc = _cartesian(sup, sdn, s3)
    nc = _cartesian(n["nup"], n["ndown"], n["n3"])
    vp1: Graded = {}
    vp2: Graded = {}
    for nu in "xyz":
        Gc = _cartesian(G[nu]["nup"], G[nu]["ndown"], G[nu]["n3"])
        X: Graded = {}
        for i, j, k, sgn in ((1, 2, 3, 1), (2, 3, 1, 1), (3, 1, 2, 1), (1, 3, 2, -1), (2, 1, 3, -1), (3, 2, 1, -1)):
            X = _gadd(X, _gscale(ctx.mul(ctx.sym_product(nc[j], Gc[k]), Sc[i]), sgn))
        p = _flat(P[nu])
        vp1 = _gadd(vp1, _gscale(_gadd(ctx.mul(p, X), ctx.mul(X, p)), -I * freq[nu]))
        vp2 = _gadd(vp2, _gscale(ctx.mul(X, X), 4 * freq[nu]))
    total = BosonPolynomial.scalar(0)
    for part in vp1.values():
        total = total + part
    out["VP1"] = total
    total = BosonPolynomial.scalar(0)
    for part in vp2.values():
        total = total + part
    out["VP2"] = total
    return out


def _keep_quadratic(mono, key) -> bool:
    return 1 <= monomial_degree(mono) <= 2 and Sym.key_degree(key) >= 0 and Sym.key_eta_order(key) <= 1


def reference_expansions() -> dict[str, BosonPolynomial]:
    """Quadratic contributions per source as printed in the appendices."""
    S_J = sym("S") * sym("J", -1)
    rS_J = sym("S", Fraction(1, 2)) * sym("J", Fraction(-1, 2))
    wD, wT, eta = sym("wD"), sym("wT"), sym("eta")
    jj = _a("j") + _c("j")
    mk = _c("m") - _a("k")
    vd0_half = _c("s") * (_c("k") - _a("m"))
    vd0 = (BosonPolynomial.number("j") * (32 * wD * S_J) + (jj * jj) * (Fraction(-56, 5) * wD * S_J)
           + (BosonPolynomial.number("k") + BosonPolynomial.number("m")
              - BosonPolynomial.monomial("k+", "m+") - BosonPolynomial.monomial("k", "m")) * (8 * wD * S_J)
           + (vd0_half + vd0_half.dagger()) * (4 * wD * rS_J))
    vd1_half = (_c("b_r") + _a("b_l")) * mk
    vp1_half = mk * (_c("b_r") - _a("b_l"))
    return {
        "VD0": vd0,
        "VD1": (vd1_half + vd1_half.dagger()) * (8 * wD * eta * rS_J),
        "VP1": (vp1_half + vp1_half.dagger()) * (2 * wT * eta * rS_J),
    }


def _compare(group: str, expected: BosonPolynomial, found: BosonPolynomial, floor,
             printed_only: bool = False) -> list[CoefficientCheck]:
    """One check per monomial.  With ``printed_only`` monomials absent from
    ``expected`` are skipped (a partial printed formula, not a full list)."""
    monos = {m for m, _ in expected.items()}
    if not printed_only:
        monos |= {m for m, _ in found.items()}
    rows = []
    for mono in sorted(monos, key=lambda m: (monomial_degree(m), m)):
        if monomial_degree(mono) == 0:
            continue
        e = dict(expected.items()).get(mono, Sym())
        f = dict(found.items()).get(mono, Sym())
        top = e.max_degree()
        reliable = floor is None or top is None or top >= floor
        rows.append(CoefficientCheck(group, monomial_text(mono), e, f, reliable))
    return rows


def run_bosonization_pipeline(orders: Optional[PipelineOrders] = None) -> PipelineResult:
    """Bosonize every source and compare with the reference coefficients."""
    orders = orders or PipelineOrders()
    orders.check()
    sources = _source_polynomials(orders)
    quadratic = {k: v.filter(_keep_quadratic) for k, v in sources.items()}
    for k, v in quadratic.items():
        if v.floor is not None and v.floor > 0:
            raise PipelineOrderError(f"{k} is exact only down to S/J power {v.floor}; raise the series orders")

    hg = BosonPolynomial.scalar(0)
    for v in quadratic.values():
        hg = hg + v.as_exact()
    hg_floor = max((v.floor for v in quadratic.values() if v.floor is not None), default=None)
    checks = _compare("table", hg_dictionary(), hg, hg_floor)
    for name, poly in reference_expansions().items():
        checks += _compare(name, poly, quadratic[name].as_exact(), quadratic[name].floor, printed_only=True)

    dropped: list[DroppedTerm] = []
    for src, poly in sources.items():
        for mono, coeff in poly.items():
            deg_b = monomial_degree(mono)
            for key, val in coeff.items():
                d = Sym.key_degree(key)
                e = Sym.key_eta_order(key)
                if deg_b == 0:
                    continue
                if deg_b > orders.boson_degree:
                    reason = "non-quadratic"
                elif e > 1:
                    reason = "eta^2"
                elif d < 0:
                    reason = "subleading"
                else:
                    continue
                dropped.append(DroppedTerm(src, monomial_text(mono), Sym({key: val}), reason, d, e))
    return PipelineResult(sources, quadratic, checks, dropped, orders)
