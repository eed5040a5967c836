"""Self-check suites run by ``magrotor validate``.

Each suite returns a list of :class:`Check`; a suite passes when every
check does.  Residuals are plain floats so reports serialise exactly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .angular import (EulerAngles, cg_orthogonality_residual, check_D_orthogonality, rotation_matrix,
                      rotation_matrix_from_D, triple_integral)
from .bosons import BosonPolynomial, bosonize_D, rotor_hp
from .hamiltonian import MagnetParams, compute_frequencies, validity_report
from .pipeline import run_bosonization_pipeline
from .rotor import Rep2Basis, product_rule_residual, verify_commutation_table
from .symbolic import Sym
from .trap import TrapParams, maxwell_residuals, n_jet, numeric_jet


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _check(name, residual, tol, detail="") -> Check:
    residual = float(residual)
    return Check(name, bool(residual < tol), residual, float(tol), detail)


WEAK_BIAS_TRAP = TrapParams(1e-3, 1e4, 1e6)
COBALT_10NM = MagnetParams(1e-8, 8.9e3, 1.7, 30.0)


def rotation_identity_error(samples: int = 100, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        a, g = rng.uniform(0, 2 * math.pi, 2)
        b = rng.uniform(0, math.pi)
        ang = EulerAngles(a, b, g)
        worst = max(worst, float(np.max(np.abs(rotation_matrix(ang) - rotation_matrix_from_D(ang)))))
    return worst


def _halves(top: int):
    return [Fraction(t, 2) for t in range(0, 2 * top + 1)]


def suite_algebra(seed: int = 0, cg_max: int = 6, q_max: int = 3) -> list[Check]:
    out = [_check("rotation matrix from D^1 (100 random angles)", rotation_identity_error(100, seed), 1e-12)]
    worst_cg = Fraction(0)
    for j1 in _halves(cg_max):
        for j2 in _halves(cg_max):
            worst_cg = max(worst_cg, abs(cg_orthogonality_residual(j1, j2)))
    out.append(Check(f"CG orthogonality, exact, j1, j2 <= {cg_max}", worst_cg == 0, float(worst_cg), 0.0))

    worst_norm = 0.0
    qs = [Fraction(t, 2) for t in range(0, 2 * q_max + 1)]
    for q in qs:
        tq = int(2 * q)
        for tm in range(-tq, tq + 1, 2):
            for tk in range(-tq, tq + 1, 2):
                m, k = Fraction(tm, 2), Fraction(tk, 2)
                worst_norm = max(worst_norm, check_D_orthogonality(q, m, k, q, m, k).residual)
                if q + 1 <= q_max:
                    worst_norm = max(worst_norm, check_D_orthogonality(q, m, k, q + 1, m, k).residual)
    out.append(_check(f"D normalisation by quadrature, q <= {q_max}", worst_norm, 1e-8))

    worst_tri = 0.0
    for q in range(0, q_max + 1):
        for L in range(0, q_max + 1):
            for Lp in range(abs(q - L), min(q + L, q_max) + 1):
                for m in range(-q, q + 1):
                    for mL in (-L, 0, L):
                        k, kL = -m, mL
                        mp, kp = m + mL, k + kL
                        if abs(mp) > Lp or abs(kp) > Lp:
                            continue
                        worst_tri = max(worst_tri, triple_integral(Lp, mp, kp, q, m, k, L, mL, kL).residual)
    out.append(_check(f"triple D integral by quadrature, ranks <= {q_max}", worst_tri, 1e-8))
    return out


def suite_commutators(spins=(1, 2, 4), jmax: int = 8) -> list[Check]:
    out = []
    for S in spins:
        rep = verify_commutation_table(Rep2Basis(S, jmax))
        bad = rep.failures(1e-10)
        out.append(Check(f"commutation table, S={S}, Jmax={jmax}", not bad, rep.worst, 1e-10,
                         "" if not bad else "failing: " + ", ".join(sorted(bad))))
    basis = Rep2Basis(1, jmax)
    worst = 0.0
    for m1 in (-1, 0, 1):
        for k1 in (-1, 0, 1):
            for m2 in (-1, 0, 1):
                for k2 in (-1, 0, 1):
                    worst = max(worst, product_rule_residual(basis, 1, m1, k1, 1, m2, k2))
    out.append(_check(f"D product rule, j1=j2=1, all projections, S=1, Jmax={jmax}", worst, 1e-10))
    return out


def _max_kept_degree(poly: BosonPolynomial, threshold: Fraction) -> list[str]:
    bad = []
    for mono, c in poly.items():
        for key, _ in c.items():
            if Sym.key_degree(key) >= threshold:
                bad.append(str(mono))
    return bad


def bosonized_unitarity() -> BosonPolynomial:
    total = BosonPolynomial.scalar(-1)
    for k in (-1, 0, 1):
        d = bosonize_D(1, 0, k)
        total = total + d * d.dagger()
    return total


def bosonized_jz_commutator(literal: bool = True) -> BosonPolynomial:
    """[Jz, D^1_00] with the table entry taken as printed (``literal``) or
    with its exactness floor kept."""
    jz = rotor_hp(3)["Jz"]
    d = bosonize_D(1, 0, 0)
    if literal:
        d = d.as_exact()
    return jz * d - d * jz


def suite_bosonization() -> list[Check]:
    out = []
    u = bosonized_unitarity()
    bad = _max_kept_degree(u, Fraction(-1))
    out.append(Check("bosonized unitarity sum_k D_0k D_0k^+ = 1 through J^-1", not bad, float(len(bad)), 1.0,
                     "" if not bad else f"{len(bad)} monomials at J^-1 or above"))
    c = bosonized_jz_commutator()
    bad = _max_kept_degree(c, Fraction(-1))
    out.append(Check("[Jz, D_00] = 0 through J^-1 (table entry as printed)", not bad, float(len(bad)), 1.0,
                     "" if not bad else "residual " + c.filter(lambda m, k: Sym.key_degree(k) >= -1).to_text().strip()))
    res = run_bosonization_pipeline()
    for grp in sorted({ch.group for ch in res.checks}):
        rows = [ch for ch in res.checks if ch.group == grp]
        bad = [ch for ch in rows if not ch.matches]
        detail = "; ".join(f"{ch.monomial}: expected {ch.expected.to_text()}, got {ch.found.to_text()}" for ch in bad)
        out.append(Check(f"pipeline coefficients, {grp}", not bad, float(len(bad)), 1.0, detail))
    return out


def suite_field() -> list[Check]:
    out = []
    trap = WEAK_BIAS_TRAP
    pts = np.random.default_rng(0).uniform(-1, 1, (20, 3)) * 0.1 * trap.length_scale
    div, curl = maxwell_residuals(trap, pts)
    scale = trap.Bp
    out.append(_check("field is divergence free (relative to B')", float(np.max(div)) / scale, 1e-6))
    out.append(_check("field is curl free (relative to B')", float(np.max(curl)) / scale, 1e-6))
    jet = n_jet(trap)
    worst = 0.0
    for (comp, deriv), val in jet.entries.items():
        num = numeric_jet(trap, comp, deriv)
        worst = max(worst, abs(num - val) / abs(val))
    out.append(_check("analytic jet of the field direction vs finite differences (relative)", worst, 1e-5))
    f = compute_frequencies(COBALT_10NM, trap)
    rep = validity_report(f)
    ref = {"w_L": 1.76e8, "w_I": 4.6e7, "w_D": 6.1e6, "w_T": 5.7e6}
    rel = max(abs(getattr(f, k) - v) / v for k, v in ref.items())
    out.append(_check("cobalt R=10 nm frequencies within 5% of hand values", rel, 0.05))
    out.append(Check("frequency hierarchy at cobalt R=10 nm", all(rep.hierarchy.values()), 0.0, 0.0,
                     ", ".join(k for k, v in rep.hierarchy.items() if not v)))
    return out


SUITES: dict[str, Callable[..., list[Check]]] = {
    "algebra": suite_algebra,
    "commutators": suite_commutators,
    "bosonization": suite_bosonization,
    "field": suite_field,
}
