"""Physical frequencies, the quadratic Hamiltonian dictionary, and the exact
truncated Hamiltonian.

All Hamiltonians are in angular-frequency units (hbar = 1).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np
import scipy.constants as const
import scipy.sparse as sp

from .angular import HalfInt
from .bosons import BosonPolynomial, monomial_key
from .config import read_config
from .rotor import Rep2Basis, SparseHermitianOp, build_D_operator, build_angular_operator
from .symbolic import I, ONE, Sym, sqrt, sym
from .trap import NonConfiningTrap, TrapParams, body_frame_n_coefficients

HBAR = const.hbar
K_B = const.k

DEFAULT_GAMMA = 1.761e11          # rad/(s T), electron-like
DEFAULT_ATOMIC_MASS = 9.786e-26   # kg, cobalt

MUCH_GREATER = 5.0  # factor used to read ">>" in the frequency hierarchy


@dataclass(frozen=True)
class MagnetParams:
    radius: float
    density: float
    spin_per_atom: float
    blocking_temperature: float
    gyromagnetic_ratio: float = DEFAULT_GAMMA
    atomic_mass: float = DEFAULT_ATOMIC_MASS

    def __post_init__(self):
        for name in ("radius", "density", "spin_per_atom", "blocking_temperature", "gyromagnetic_ratio", "atomic_mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def mass(self) -> float:
        return self.density * 4.0 / 3.0 * math.pi * self.radius ** 3

    @property
    def inertia(self) -> float:
        return 0.4 * self.mass * self.radius ** 2

    @property
    def atoms(self) -> float:
        return self.mass / self.atomic_mass

    @property
    def spin(self) -> HalfInt:
        return HalfInt(int(round(2 * self.spin_per_atom * self.atoms)))

    @property
    def mass_per_spin(self) -> float:
        return self.mass / float(self.spin)

    def with_radius(self, radius: float) -> "MagnetParams":
        return MagnetParams(radius, self.density, self.spin_per_atom, self.blocking_temperature,
                            self.gyromagnetic_ratio, self.atomic_mass)

    @classmethod
    def from_file(cls, path: str | Path) -> "MagnetParams":
        v = read_config(path, ["radius_m", "density_kg_m3", "spin_per_atom", "T_b_K"],
                        {"gamma_rad_sT": DEFAULT_GAMMA, "atomic_mass_kg": DEFAULT_ATOMIC_MASS})
        return cls(v["radius_m"], v["density_kg_m3"], v["spin_per_atom"], v["T_b_K"],
                   v["gamma_rad_sT"], v["atomic_mass_kg"])


COUPLING_NAMES = ("Delta", "w_k", "w_m", "w_j", "xi1", "xi2", "g_k", "g_m", "g_r", "g_l", "g_s")


def table_couplings() -> dict[str, Sym]:
    """Quadratic-Hamiltonian couplings as exact expressions in the symbols."""
    wI, wD, wL, wT = sym("wI"), sym("wD"), sym("wL"), sym("wT")
    J_S = sym("J") * sym("S", -1)
    S_J = sym("S") * sym("J", -1)
    rS_J = sym("S", Fraction(1, 2)) * sym("J", Fraction(-1, 2))
    rJ_S = sym("J", Fraction(1, 2)) * sym("S", Fraction(-1, 2))
    eta = sym("eta")
    return {
        "w_r": wT,
        "w_l": wT,
        "Delta": wL - 2 * wD - wI * J_S,
        "w_k": wI + 8 * wD * S_J,
        "w_m": 8 * wD * S_J,
        "w_j": Fraction(1, 2) * wI * (J_S - 1),
        "xi1": Fraction(1, 2) * sqrt(2) * sym("J", Fraction(1, 2)) * wI * (J_S - 1),
        "xi2": Fraction(1, 4) * wI * J_S,
        "g_k": wI * rJ_S + 4 * wD * rS_J,
        "g_m": 4 * wD * rS_J,
        "g_r": eta * (8 * wD + 2 * wT) * rS_J,
        "g_l": eta * (8 * wD - 2 * wT) * rS_J,
        "g_s": 2 * wT * eta,
    }


@dataclass(frozen=True)
class FrequencySet:
    """Base frequencies (rad/s), Lamb-Dicke parameters and derived couplings."""

    w_L: float
    w_I: float
    w_D: float
    w_T: float
    w_z: float
    S: float
    J_ref: float
    eta: float
    eta_prime: float
    z_pm: float = float("nan")
    couplings: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.couplings:
            vals = self.symbol_values()
            object.__setattr__(self, "couplings",
                               {k: v.evaluate(vals).real for k, v in table_couplings().items()})

    @classmethod
    def from_values(cls, w_L, w_I, w_D, w_T, w_z, S, J_ref=None, eta=0.0, eta_prime=0.0, z_pm=float("nan")):
        return cls(float(w_L), float(w_I), float(w_D), float(w_T), float(w_z), float(S),
                   float(S if J_ref is None else J_ref), float(eta), float(eta_prime), float(z_pm))

    def symbol_values(self) -> dict[str, float]:
        return {"wI": self.w_I, "wD": self.w_D, "wL": self.w_L, "wT": self.w_T, "wz": self.w_z,
                "S": self.S, "J": self.J_ref, "eta": self.eta, "etap": self.eta_prime}

    def replace(self, **changes) -> "FrequencySet":
        d = {k: getattr(self, k) for k in ("w_L", "w_I", "w_D", "w_T", "w_z", "S", "J_ref", "eta", "eta_prime", "z_pm")}
        d.update(changes)
        return FrequencySet(**d)

    def to_json(self) -> str:
        base = {k: getattr(self, k) for k in ("w_L", "w_I", "w_D", "w_T", "w_z")}
        doc = {
            "schema": "magrotor.frequencies/1",
            "units": {"frequencies": "rad/s", "couplings": "rad/s", "z_pm": "m", "eta": "1", "eta_prime": "1"},
            "frequencies": base,
            "S": self.S,
            "J_ref": self.J_ref,
            "eta": self.eta,
            "eta_prime": self.eta_prime,
            "z_pm": None if math.isnan(self.z_pm) else self.z_pm,
            "couplings": {k: self.couplings[k] for k in sorted(self.couplings)},
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FrequencySet":
        doc = json.loads(text)
        if doc.get("schema") != "magrotor.frequencies/1":
            raise ValueError("unrecognised frequency document")
        f = doc["frequencies"]
        return cls.from_values(f["w_L"], f["w_I"], f["w_D"], f["w_T"], f["w_z"], doc["S"], doc["J_ref"],
                               doc["eta"], doc["eta_prime"], doc["z_pm"] if doc["z_pm"] is not None else float("nan"))


def compute_frequencies(magnet: MagnetParams, trap: TrapParams, J_ref: Optional[float] = None) -> FrequencySet:
    trap.check_confining()
    S = float(magnet.spin)
    if S < 1:
        raise ValueError("the macrospin must be at least 1")
    J = S if J_ref is None else float(J_ref)
    if J < 1:
        raise ValueError("J_ref must be at least 1")
    gamma = magnet.gyromagnetic_ratio
    Ms = magnet.mass_per_spin
    w_T = math.sqrt(HBAR * gamma * trap.transverse_curvature / Ms)
    w_z = math.sqrt(HBAR * gamma * trap.Bpp / Ms)
    w_I = HBAR * S / magnet.inertia
    w_D = K_B * magnet.blocking_temperature / (HBAR * S)
    w_L = gamma * trap.B0
    z_pm = math.sqrt(HBAR / (2 * Ms * w_T))
    eta = trap.Bp * z_pm / (2 * trap.B0)
    eta_p = trap.Bpp * z_pm ** 2 / (4 * trap.B0)
    return FrequencySet.from_values(w_L, w_I, w_D, w_T, w_z, S, J, eta, eta_p, z_pm)


@dataclass(frozen=True)
class ValidityReport:
    hierarchy: dict[str, bool]
    ratios: dict[str, float]
    v_jkm: float
    eta_threshold: float
    eta_margin: float
    neglect_nonquadratic: bool
    lamb_dicke_ordering: bool

    def to_dict(self) -> dict:
        return asdict(self)


def validity_report(freqs: FrequencySet) -> ValidityReport:
    """Frequency hierarchy and the condition for dropping non-quadratic terms.

    ``>>`` is read as a factor of at least ``MUCH_GREATER``.
    """
    f = freqs
    ratios = {
        "w_L/w_I": f.w_L / f.w_I,
        "w_I/w_D": f.w_I / f.w_D,
        "w_I/w_T": f.w_I / f.w_T,
        "w_I/w_z": f.w_I / f.w_z,
        "w_D/w_T": f.w_D / f.w_T,
    }
    hierarchy = {
        "w_L >= w_I": f.w_L >= f.w_I,
        "w_I >> w_D": ratios["w_I/w_D"] >= MUCH_GREATER,
        "w_I >> w_T": ratios["w_I/w_T"] >= MUCH_GREATER,
        "w_I >> w_z": ratios["w_I/w_z"] >= MUCH_GREATER,
    }
    threshold = min(f.w_I / (f.w_D * math.sqrt(f.S)), f.w_I / (f.w_T * math.sqrt(f.S)))
    margin = f.eta / threshold if threshold > 0 else math.inf
    return ValidityReport(
        hierarchy=hierarchy,
        ratios=ratios,
        v_jkm=f.w_I / (2 * math.sqrt(2 * f.S)),
        eta_threshold=threshold,
        eta_margin=margin,
        neglect_nonquadratic=margin >= MUCH_GREATER,
        lamb_dicke_ordering=f.eta_prime < f.eta < 1,
    )


# ---------------------------------------------------------------------------
# quadratic forms

HG_MODES = ("b_r", "b_l", "c_z", "s", "j", "k", "m")


def _n(mode):
    return BosonPolynomial.number(mode)


def _c(mode):
    return BosonPolynomial.create(mode)


def _a(mode):
    return BosonPolynomial.annihilate(mode)


def hg_dictionary() -> BosonPolynomial:
    """The quadratic Hamiltonian with table couplings, as an exact polynomial."""
    t = table_couplings()
    jj = _a("j") + _c("j")
    H = (_n("b_r") * t["w_r"] + _n("b_l") * t["w_l"] + _n("c_z") * sym("wz") - _n("s") * t["Delta"]
         + _n("j") * t["w_j"] + jj * t["xi1"] + (jj * jj) * t["xi2"]
         + _n("m") * t["w_m"] + _n("k") * t["w_k"]
         - (BosonPolynomial.monomial("m+", "k+") + BosonPolynomial.monomial("m", "k")) * t["w_m"])
    Vs = ((BosonPolynomial.monomial("s+", "k+") + BosonPolynomial.monomial("s", "k")) * t["g_k"]
          - (BosonPolynomial.monomial("s+", "m") + BosonPolynomial.monomial("s", "m+")) * t["g_m"])
    mk = _c("m") - _a("k")
    half = (_a("b_l") * mk) * t["g_l"] + (_c("b_r") * mk) * t["g_r"] - (_c("s") * (_c("b_r") - _a("b_l"))) * t["g_s"]
    return H + Vs + half + half.dagger()


@dataclass
class QuadraticBosonForm:
    """H = a^+ A a + (1/2)(a^+ B a^+ + h.c.) + (lam . a^+ + h.c.) + const."""

    modes: tuple[str, ...]
    A: np.ndarray
    B: np.ndarray
    linear: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        n = len(self.modes)
        self.A = np.asarray(self.A, dtype=complex).reshape(n, n)
        self.B = np.asarray(self.B, dtype=complex).reshape(n, n)
        self.linear = np.asarray(self.linear, dtype=complex).reshape(n)
        if np.max(np.abs(self.A - self.A.conj().T), initial=0) > 1e-9 * max(1.0, np.max(np.abs(self.A), initial=0)):
            raise ValueError("A block is not Hermitian")
        if np.max(np.abs(self.B - self.B.T), initial=0) > 1e-9 * max(1.0, np.max(np.abs(self.B), initial=0)):
            raise ValueError("B block is not symmetric")

    @property
    def dynamical_matrix(self) -> np.ndarray:
        """Doubled Hermitian matrix [[A, B], [B*, A*]]."""
        return np.block([[self.A, self.B], [self.B.conj(), self.A.conj()]])

    def restrict(self, modes: Iterable[str], tol: float = 0.0) -> "QuadraticBosonForm":
        """Sub-form on ``modes``.  Couplings to the dropped modes must be at
        most ``tol`` in magnitude."""
        modes = tuple(modes)
        idx = [self.modes.index(m) for m in modes]
        rest = [i for i in range(len(self.modes)) if i not in idx]
        if rest:
            cross = max(np.max(np.abs(self.A[np.ix_(idx, rest)]), initial=0),
                        np.max(np.abs(self.B[np.ix_(idx, rest)]), initial=0))
            if cross > tol:
                raise ValueError(f"dropped modes couple to the kept ones (largest coupling {cross:.3e})")
        return QuadraticBosonForm(modes, self.A[np.ix_(idx, idx)], self.B[np.ix_(idx, idx)], self.linear[idx], self.constant)

    def relabel(self, order: Iterable[str]) -> "QuadraticBosonForm":
        order = tuple(order)
        if sorted(order) != sorted(self.modes):
            raise ValueError("relabel needs a permutation of the modes")
        return self.restrict(order)

    @classmethod
    def from_polynomial(cls, poly: BosonPolynomial, values: Mapping[str, float],
                        modes: Optional[Iterable[str]] = None, tol: float = 1e-9) -> "QuadraticBosonForm":
        from .bosons import MODES, monomial_degree
        modes = tuple(modes) if modes is not None else tuple(m for m in MODES if m in poly.modes())
        idx = {m: i for i, m in enumerate(modes)}
        n = len(modes)
        A = np.zeros((n, n), complex)
        B = np.zeros((n, n), complex)
        Bc = np.zeros((n, n), complex)
        lin = np.zeros(n, complex)
        linc = np.zeros(n, complex)
        const_ = 0j
        for mono, c in poly.items():
            v = c.evaluate(values)
            deg = monomial_degree(mono)
            if deg > 2:
                raise ValueError("polynomial is not quadratic")
            ops = []
            for i, cr, an in mono:
                name = MODES[i]
                if name not in idx:
                    raise ValueError(f"mode {name} not in the requested mode list")
                ops += [(idx[name], True)] * cr + [(idx[name], False)] * an
            if deg == 0:
                const_ += v
            elif deg == 1:
                (i, dag), = ops
                if dag:
                    lin[i] += v
                else:
                    linc[i] += v
            else:
                (i, d1), (j, d2) = ops
                if d1 != d2:
                    if d2:
                        i, j = j, i
                    A[i, j] += v
                elif d1 and d2:
                    B[i, j] += v
                    B[j, i] += v
                else:
                    Bc[i, j] += v
                    Bc[j, i] += v
        scale = max(1.0, np.max(np.abs(A), initial=0), np.max(np.abs(B), initial=0), np.max(np.abs(lin), initial=0))
        if np.max(np.abs(Bc - B.conj()), initial=0) > tol * scale or np.max(np.abs(linc - lin.conj()), initial=0) > tol * scale:
            raise ValueError("polynomial is not Hermitian")
        return cls(modes, A, B, lin, float(const_.real))


def build_quadratic_HG(freqs: FrequencySet, modes: Iterable[str] = HG_MODES) -> QuadraticBosonForm:
    full = QuadraticBosonForm.from_polynomial(hg_dictionary(), freqs.symbol_values(), HG_MODES)
    return full.restrict(tuple(modes))


# ---------------------------------------------------------------------------
# exact truncated Hamiltonian

CM_MODES = ("c_x", "c_y", "c_z")


class HamiltonianBuildError(RuntimeError):
    pass


def _quadrature(mode: str) -> BosonPolynomial:
    return _a(mode) + _c(mode)


def _momentum(mode: str) -> BosonPolynomial:
    """c^+ - c (the momentum is i sqrt(M w / 2) times this)."""
    return _c(mode) - _a(mode)


class _Graded:
    """Sum over Lamb-Dicke grade of (CM polynomial) x (angular matrix) pairs."""

    def __init__(self, max_grade: int, parts: Optional[dict] = None):
        self.max_grade = max_grade
        self.parts: dict[int, list] = parts or {}

    @classmethod
    def angular(cls, max_grade: int, mat) -> "_Graded":
        return cls(max_grade, {0: [(BosonPolynomial.scalar(1), sp.csr_matrix(mat))]})

    @classmethod
    def cm(cls, max_grade: int, poly: BosonPolynomial, dim: int, grade: int = 0) -> "_Graded":
        if grade > max_grade:
            return cls(max_grade)
        return cls(max_grade, {grade: [(poly, sp.identity(dim, dtype=complex, format="csr"))]})

    def __add__(self, other: "_Graded") -> "_Graded":
        out = {g: list(v) for g, v in self.parts.items()}
        for g, v in other.parts.items():
            out.setdefault(g, []).extend(v)
        return _Graded(self.max_grade, out)

    def scale(self, c) -> "_Graded":
        """Exact coefficients multiply the CM polynomial, numbers the matrix."""
        if isinstance(c, (Sym, int, Fraction)):
            parts = {g: [(p * c, m) for p, m in v] for g, v in self.parts.items()}
        else:
            parts = {g: [(p, m * c) for p, m in v] for g, v in self.parts.items()}
        return _Graded(self.max_grade, parts)

    def __mul__(self, other: "_Graded") -> "_Graded":
        out: dict[int, list] = {}
        for g1, v1 in self.parts.items():
            for g2, v2 in other.parts.items():
                g = g1 + g2
                if g > self.max_grade:
                    continue
                for p1, m1 in v1:
                    for p2, m2 in v2:
                        out.setdefault(g, []).append((p1 * p2, m1 @ m2))
        return _Graded(self.max_grade, out)._compress()

    def _compress(self) -> "_Graded":
        out = {}
        for g, v in self.parts.items():
            merged: dict = {}
            for p, m in v:
                key = p.to_text()
                if key in merged:
                    merged[key] = (merged[key][0], merged[key][1] + m)
                else:
                    merged[key] = (p, m)
            out[g] = list(merged.values())
        return _Graded(self.max_grade, out)

    def anticommutator_half(self, other: "_Graded") -> "_Graded":
        a = self * other
        b = other * self
        return (a + b).scale(0.5)

    def assemble(self, cutoffs: Mapping[str, int], values: Mapping[str, float], dim: int) -> sp.csr_matrix:
        if cutoffs:
            cm_dim = int(np.prod([cutoffs[m] + 1 for m in CM_MODES if m in cutoffs]))
        else:
            cm_dim = 1
        total = sp.csr_matrix((dim * cm_dim, dim * cm_dim), dtype=complex)
        for v in self.parts.values():
            for p, m in v:
                if p.is_zero() or m.nnz == 0:
                    continue
                if cutoffs:
                    cm = p.to_sparse(cutoffs, values)
                else:
                    if p.modes():
                        raise HamiltonianBuildError("centre-of-mass operator without Fock cutoffs")
                    cm = sp.identity(1, dtype=complex, format="csr") * p.coefficient().evaluate(values)
                total = total + sp.kron(m, cm, format="csr")
        return total.tocsr()


def _n_components(basis: Rep2Basis, order: int, cm_modes: tuple[str, ...]) -> dict[str, _Graded]:
    """n_3, n_up, n_down with the Lamb-Dicke expansion up to ``order``."""
    D = {}

    def dmat(mk):
        if mk not in D:
            D[mk] = build_D_operator(basis, 1, *mk).matrix
        return D[mk]

    out = {c: _Graded(order) for c in ("n3", "nup", "ndown")}
    axis_mode = {"x": "c_x", "y": "c_y", "z": "c_z"}
    for o in range(order + 1):
        for (comp, deriv), entries in body_frame_n_coefficients(o).items():
            modes_needed = [axis_mode[a] for a in deriv]
            if any(m not in cm_modes for m in modes_needed):
                continue
            poly = BosonPolynomial.scalar(1)
            for m in modes_needed:
                poly = poly * _quadrature(m)
            if len(deriv) == 2:
                poly = poly * (Fraction(1, 2) if deriv[0] == deriv[1] else 1)
            for mk, w in entries:
                out[comp] = out[comp] + _Graded(order, {o: [(poly * w, dmat(mk))]})
    return out


def _gradients(basis: Rep2Basis, order: int, cm_modes: tuple[str, ...]) -> dict[str, dict[str, _Graded]]:
    """Scaled gradients G_nu = (z_nu/sqrt(S)) d_nu n(r), expanded so that the
    total grade (number of derivatives) stays within ``order``."""
    axis_mode = {"x": "c_x", "y": "c_y", "z": "c_z"}
    D = {}

    def dmat(mk):
        if mk not in D:
            D[mk] = build_D_operator(basis, 1, *mk).matrix
        return D[mk]

    out = {}
    for nu in "xyz":
        if axis_mode[nu] not in cm_modes:
            continue
        comps = {c: _Graded(order) for c in ("n3", "nup", "ndown")}
        for o in (1, 2):
            if o > order:
                continue
            for (comp, deriv), entries in body_frame_n_coefficients(o).items():
                if nu not in deriv:
                    continue
                rest = deriv.replace(nu, "", 1)
                if any(axis_mode[a] not in cm_modes for a in rest):
                    continue
                poly = BosonPolynomial.scalar(1)
                for a in rest:
                    poly = poly * _quadrature(axis_mode[a])
                for mk, w in entries:
                    comps[comp] = comps[comp] + _Graded(order, {o: [(poly * w, dmat(mk))]})
        out[nu] = comps
    return out


def _cartesian(up: _Graded, down: _Graded, z: _Graded) -> dict[int, _Graded]:
    return {1: (up + down).scale(Sym.const(Fraction(1, 2))),
            2: (up + down.scale(Sym.const(-1))).scale(I * Fraction(1, 2)),
            3: z}


def build_exact_hamiltonian(freqs: FrequencySet, basis: Rep2Basis, fock_cutoffs: Optional[Mapping[str, int]] = None,
                            lamb_dicke_order: int = 0, include: Iterable[str] = ("H0", "HI", "VD", "VP"),
                            hermiticity_tol: float = 1e-12) -> SparseHermitianOp:
    """Angular part exact on the truncated basis, centre of mass on truncated
    Fock spaces, n(r) expanded to ``lamb_dicke_order`` derivatives.

    Products of D-operators that are not manifestly Hermitian after
    truncation are symmetrised.  The relative anti-Hermitian residual before
    the final symmetrisation must stay below ``hermiticity_tol``.
    """
    include = set(include)
    unknown = include - {"H0", "HI", "VD", "VP"}
    if unknown:
        raise ValueError(f"unknown Hamiltonian parts {sorted(unknown)}")
    if lamb_dicke_order not in (0, 1, 2):
        raise ValueError("lamb_dicke_order must be 0, 1 or 2")
    S = float(basis.S)
    if abs(S - freqs.S) > 1e-9:
        raise HamiltonianBuildError(f"basis spin {S} differs from the frequency set spin {freqs.S}")
    cutoffs = dict(fock_cutoffs or {})
    for m, n in cutoffs.items():
        if m not in CM_MODES or n < 0:
            raise HamiltonianBuildError(f"bad Fock cutoff {m}={n}")
    cm_modes = tuple(m for m in CM_MODES if m in cutoffs)
    if "VP" in include and not cm_modes:
        raise HamiltonianBuildError("VP needs centre-of-mass modes")
    n_factors = 4 if "VD" in include else (2 if "VP" in include else 1)
    if basis.Jmax.twice_value < basis.S.twice_value + 2 * 2 * n_factors:
        warnings.warn("Jmax < S + 2 x (number of D factors): the top shells are distorted by truncation",
                      RuntimeWarning, stacklevel=2)

    values = freqs.symbol_values()
    values["S"] = S
    dim = basis.dim
    order = lamb_dicke_order
    A = lambda tag: build_angular_operator(basis, tag).matrix  # noqa: E731
    ang = lambda m: _Graded.angular(order, m)  # noqa: E731
    S3, Sup, Sdn = A("S3"), A("Sup"), A("Sdown")
    H = _Graded(order)

    if "H0" in include:
        rot = (A("J2") + 2 * (A("J3") @ S3)) * (freqs.w_I / (2 * S))
        spin = S3 * freqs.w_L - (S3 @ S3) * (freqs.w_D / S)
        H = H + ang(rot + spin)
        for m in cm_modes:
            w = freqs.w_z if m == "c_z" else freqs.w_T
            kinetic = (_momentum(m) * _momentum(m)) * Fraction(-1, 4)
            trap = (_quadrature(m) * _quadrature(m)) * Fraction(1, 4)
            H = H + _Graded.cm(order, kinetic, dim).scale(w)
            H = H + _Graded(order, {0: [(trap, S3 * (w / S))]})
    if "HI" in include:
        H = H + ang((A("Jup") @ Sdn + A("Jdown") @ Sup) * (freqs.w_I / (2 * S)))
    if "VD" in include or "VP" in include:
        n = _n_components(basis, order, cm_modes)
    if "VD" in include:
        s3 = ang(S3)
        n3sq = n["n3"] * n["n3"]
        flip = n["nup"] * ang(Sdn) + n["ndown"] * ang(Sup)
        one = ang(sp.identity(dim, dtype=complex, format="csr"))
        bracket = s3 * (one + n3sq.scale(-2.0)) + n["n3"].anticommutator_half(flip).scale(-1.0)
        VD = ang(S3 @ S3).scale(freqs.w_D / S) + (bracket * bracket).scale(-freqs.w_D / S)
        H = H + VD
    if "VP" in include and order >= 1:
        G = _gradients(basis, order, cm_modes)
        Sc = _cartesian(ang(Sup), ang(Sdn), ang(S3))
        nc = _cartesian(n["nup"], n["ndown"], n["n3"])
        for nu, Gn in G.items():
            w = freqs.w_z if nu == "z" else freqs.w_T
            Gc = _cartesian(Gn["nup"], Gn["ndown"], Gn["n3"])
            X = _Graded(order)
            for i, j, k, sgn in ((1, 2, 3, 1), (2, 3, 1, 1), (3, 1, 2, 1), (1, 3, 2, -1), (2, 1, 3, -1), (3, 2, 1, -1)):
                X = X + (nc[j].anticommutator_half(Gc[k]) * Sc[i]).scale(float(sgn))
            mode = {"x": "c_x", "y": "c_y", "z": "c_z"}[nu]
            P = _Graded.cm(order, _momentum(mode), dim)
            H = H + (P * X + X * P).scale(-1j * w)
            H = H + (X * X).scale(4.0 * w)
    mat = H.assemble(cutoffs, values, dim)
    resid = abs(mat - mat.getH())
    worst = resid.max() if resid.nnz else 0.0
    scale = max(1.0, abs(mat).max() if mat.nnz else 0.0)
    if worst > hermiticity_tol * scale:
        raise HamiltonianBuildError(f"Hermiticity residual {worst:.3e} exceeds tolerance")
    mat = ((mat + mat.getH()) * 0.5).tocsr()
    mat.eliminate_zeros()
    return SparseHermitianOp(mat, True, basis.hash + (f"+fock{sorted(cutoffs.items())}" if cutoffs else ""),
                             "H", lossy_top_shell=True)
