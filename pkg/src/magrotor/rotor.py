"""Truncated rotor-plus-macrospin Hilbert space.

States are |J mJ kJ; S kS> with a single cutoff ``Jmax`` on the rotor shell.
Operators are scipy CSR matrices wrapped in :class:`SparseHermitianOp`.
D-operators couple J to J +- j, so everything within j of the cutoff is
affected by the truncation; identity checks are evaluated on the interior
columns only.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp

from . import kernels
from .angular import AngularDomainError, ExactCoeff, HalfInt, Number, clebsch_gordan, twice


@dataclass(frozen=True)
class Rep2State:
    J: HalfInt
    mJ: HalfInt
    kJ: HalfInt
    S: HalfInt
    kS: HalfInt

    def __post_init__(self):
        for name, proj, mag in (("mJ", self.mJ, self.J), ("kJ", self.kJ, self.J), ("kS", self.kS, self.S)):
            if abs(proj.twice_value) > mag.twice_value or (mag.twice_value - proj.twice_value) % 2:
                raise AngularDomainError(f"{name}={proj} not allowed for magnitude {mag}")

    @classmethod
    def of(cls, J: Number, mJ: Number, kJ: Number, S: Number, kS: Number) -> "Rep2State":
        return cls(*(HalfInt.of(x) for x in (J, mJ, kJ, S, kS)))


class Rep2Basis:
    """Lexicographically ordered basis in (J, mJ, kJ, kS).

    ``mJ_block`` keeps a single lab projection; ``k_window`` keeps states
    with kJ + kS inside the closed interval given (the body projection of
    L, conserved at zeroth Lamb-Dicke order).
    """

    def __init__(self, S: Number, Jmax: Number, mJ_block: Optional[Number] = None,
                 k_window: Optional[tuple[Number, Number]] = None, Jmin: Optional[Number] = None):
        self.S = HalfInt.of(S)
        self.Jmax = HalfInt.of(Jmax)
        tS = self.S.twice_value
        if tS < 0:
            raise AngularDomainError("S must be non-negative")
        tJmax = self.Jmax.twice_value
        if (tJmax - tS) % 2:
            raise AngularDomainError("Jmax - S must be an integer")
        self.mJ_block = None if mJ_block is None else HalfInt.of(mJ_block)
        self.k_window = None if k_window is None else (HalfInt.of(k_window[0]), HalfInt.of(k_window[1]))
        start = tS % 2
        if Jmin is not None:
            start = max(start, twice(Jmin))
        labels = []
        for tJ in range(start, tJmax + 1, 2):
            if self.mJ_block is not None:
                m_range = [self.mJ_block.twice_value] if abs(self.mJ_block.twice_value) <= tJ and (tJ - self.mJ_block.twice_value) % 2 == 0 else []
            else:
                m_range = range(-tJ, tJ + 1, 2)
            for tm in m_range:
                for tk in range(-tJ, tJ + 1, 2):
                    for ts in range(-tS, tS + 1, 2):
                        if self.k_window is not None:
                            K = tk + ts
                            if K < self.k_window[0].twice_value or K > self.k_window[1].twice_value:
                                continue
                        labels.append((tJ, tm, tk, ts))
        arr = np.array(labels, dtype=np.int64).reshape(-1, 4)
        self.tJ, self.tmJ, self.tkJ, self.tkS = (arr[:, i].copy() for i in range(4))
        self.key_base = 2 * max(tJmax, tS) + 6
        self.keys = np.asarray(kernels.state_keys(self.tJ, self.tmJ, self.tkJ, self.tkS, self.key_base), dtype=np.int64)
        self.dim = len(labels)
        desc = f"S={tS}/2;Jmax={tJmax}/2;mJ={self.mJ_block};K={self.k_window};Jmin={start}/2"
        self.hash = hashlib.sha256(desc.encode()).hexdigest()[:16]

    def __len__(self) -> int:
        return self.dim

    def state(self, index: int) -> Rep2State:
        return Rep2State(HalfInt(int(self.tJ[index])), HalfInt(int(self.tmJ[index])),
                         HalfInt(int(self.tkJ[index])), self.S, HalfInt(int(self.tkS[index])))

    def lookup(self, state: Rep2State) -> int:
        if state.S != self.S:
            raise KeyError("spin magnitude differs from the basis")
        key = kernels.state_keys(np.array([state.J.twice_value]), np.array([state.mJ.twice_value]),
                                 np.array([state.kJ.twice_value]), np.array([state.kS.twice_value]),
                                 self.key_base)[0]
        i = int(np.searchsorted(self.keys, key))
        if i >= self.dim or self.keys[i] != key:
            raise KeyError(f"{state} not in basis")
        return i

    def indices_of(self, tJ, tmJ, tkJ, tkS) -> np.ndarray:
        """Vectorised lookup; returns -1 where a label set is absent."""
        keys = np.asarray(kernels.state_keys(tJ, tmJ, tkJ, tkS, self.key_base), dtype=np.int64)
        idx = np.searchsorted(self.keys, keys)
        idx = np.minimum(idx, self.dim - 1) if self.dim else idx
        found = self.keys[idx] == keys if self.dim else np.zeros(len(keys), bool)
        out = np.where(found, idx, -1)
        return out

    def interior_mask(self, shift: Number) -> np.ndarray:
        """States with J <= Jmax - shift."""
        return self.tJ <= self.Jmax.twice_value - twice(shift)

    def subset(self, mask: np.ndarray) -> np.ndarray:
        return np.flatnonzero(mask)


@dataclass
class SparseHermitianOp:
    """Complex sparse operator on a :class:`Rep2Basis` (optionally times a Fock space)."""

    matrix: sp.csr_matrix
    hermitian: bool
    basis_hash: str
    label: str = ""
    lossy_top_shell: bool = False
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix, dtype=complex)
        if self.hermitian:
            resid = abs(self.matrix - self.matrix.getH())
            worst = resid.max() if resid.nnz else 0.0
            if worst != 0.0:
                raise ValueError(f"{self.label}: operator flagged Hermitian but |A - A^+| = {worst}")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "SparseHermitianOp":
        return SparseHermitianOp(self.matrix.getH().tocsr(), self.hermitian, self.basis_hash,
                                 self.label + "^+", self.lossy_top_shell)

    def to_triplets(self) -> str:
        return export_triplets(self)


def _shift_operator(basis: Rep2Basis, d_tm: int, d_tk: int, d_ts: int, values: np.ndarray) -> sp.csr_matrix:
    rows = basis.indices_of(basis.tJ, basis.tmJ + d_tm, basis.tkJ + d_tk, basis.tkS + d_ts)
    cols = np.arange(basis.dim)
    keep = (rows >= 0) & (values != 0)
    return sp.csr_matrix((values[keep].astype(complex), (rows[keep], cols[keep])), shape=(basis.dim, basis.dim))


def _ladder_value(tj: np.ndarray, tm: np.ndarray, up: bool) -> np.ndarray:
    j = tj / 2.0
    m = tm / 2.0
    if up:
        v = j * (j + 1) - m * (m + 1)
    else:
        v = j * (j + 1) - m * (m - 1)
    return np.sqrt(np.clip(v, 0.0, None))


ANGULAR_TAGS = ("J3", "Jup", "Jdown", "Jz", "J+", "J-", "J2", "S3", "Sup", "Sdown", "S2")


def build_angular_operator(basis: Rep2Basis, which: str) -> SparseHermitianOp:
    """Angular-momentum operator by tag.

    Tags: J3, Jup, Jdown (body frame, acting on kJ), Jz, J+, J- (lab frame,
    acting on mJ), J2, S3, Sup, Sdown (acting on kS), S2.  ``up`` raises
    the body projection, so ``[J3, Jup] = Jup``.
    """
    tS = basis.S.twice_value
    n = basis.dim
    if which in ("J3", "Jz", "J2", "S3", "S2"):
        if which == "J3":
            d = basis.tkJ / 2.0
        elif which == "Jz":
            d = basis.tmJ / 2.0
        elif which == "J2":
            j = basis.tJ / 2.0
            d = j * (j + 1)
        elif which == "S3":
            d = basis.tkS / 2.0
        else:
            d = np.full(n, (tS / 2.0) * (tS / 2.0 + 1))
        return SparseHermitianOp(sp.diags(d.astype(complex), format="csr"), True, basis.hash, which)
    if which == "Jup":
        m = _shift_operator(basis, 0, 2, 0, _ladder_value(basis.tJ, basis.tkJ, True))
    elif which == "Jdown":
        m = _shift_operator(basis, 0, -2, 0, _ladder_value(basis.tJ, basis.tkJ, False))
    elif which == "J+":
        m = _shift_operator(basis, 2, 0, 0, _ladder_value(basis.tJ, basis.tmJ, True))
    elif which == "J-":
        m = _shift_operator(basis, -2, 0, 0, _ladder_value(basis.tJ, basis.tmJ, False))
    elif which == "Sup":
        m = _shift_operator(basis, 0, 0, 2, _ladder_value(np.full(n, tS), basis.tkS, True))
    elif which == "Sdown":
        m = _shift_operator(basis, 0, 0, -2, _ladder_value(np.full(n, tS), basis.tkS, False))
    else:
        raise ValueError(f"unknown angular operator tag {which!r}; expected one of {ANGULAR_TAGS}")
    return SparseHermitianOp(m, False, basis.hash, which)


def build_D_operator(basis: Rep2Basis, j: Number, m: Number, k: Number) -> SparseHermitianOp:
    """Wigner D-operator D^j_{mk} on the truncated basis.

    Targets with J' > Jmax (or outside a blocked basis) are dropped, and the
    operator is marked lossy at the top shell.
    """
    tj, tm, tk = twice(j), twice(m), twice(k)
    if abs(tm) > tj or abs(tk) > tj or (tj - tm) % 2 or (tj - tk) % 2:
        raise AngularDomainError(f"D^{j}_{m},{k} is not a valid component")
    if tj % 2:
        raise AngularDomainError("D-operators on this space need integer rank")
    rows, cols, vals = kernels.d_operator_entries(basis.keys, basis.tJ, basis.tmJ, basis.tkJ, basis.tkS,
                                                  tj, tm, tk, basis.key_base)
    mat = sp.csr_matrix((np.asarray(vals, dtype=complex), (rows, cols)), shape=(basis.dim, basis.dim))
    op = SparseHermitianOp(mat, False, basis.hash, f"D^{tj // 2}_{tm // 2},{tk // 2}", lossy_top_shell=tj > 0)
    if tj > 0:
        op.notes.append("truncation-lossy at the J = Jmax shell")
    return op


def basis_change_coefficients(direction: str, quantum_numbers: dict) -> list[tuple[tuple, ExactCoeff]]:
    """Expansion of a basis-1 or basis-2 ket in the coupled basis 3.

    ``direction='2->3'`` takes keys J, mJ, kJ, S, kS and returns targets
    (J, mJ, S, L, kL).  ``direction='1->3'`` takes F, mF, L, mL, kL and
    returns targets (J, mJ, S=F, L, kL).
    """
    q = {key: HalfInt.of(v) for key, v in quantum_numbers.items()}
    out = []
    if direction == "2->3":
        J, mJ, kJ, S, kS = q["J"], q["mJ"], q["kJ"], q["S"], q["kS"]
        for name, proj, mag in (("mJ", mJ, J), ("kJ", kJ, J), ("kS", kS, S)):
            if abs(proj.twice_value) > mag.twice_value:
                raise AngularDomainError(f"{name} out of range")
        tkL = kJ.twice_value + kS.twice_value
        for tL in range(abs(J.twice_value - S.twice_value), J.twice_value + S.twice_value + 1, 2):
            if abs(tkL) > tL:
                continue
            c = clebsch_gordan(J, kJ, S, kS, HalfInt(tL), HalfInt(tkL))
            if not c.is_zero():
                out.append(((J, mJ, S, HalfInt(tL), HalfInt(tkL)), c))
    elif direction == "1->3":
        F, mF, L, mL, kL = q["F"], q["mF"], q["L"], q["mL"], q["kL"]
        for name, proj, mag in (("mF", mF, F), ("mL", mL, L), ("kL", kL, L)):
            if abs(proj.twice_value) > mag.twice_value:
                raise AngularDomainError(f"{name} out of range")
        tmJ = mF.twice_value + mL.twice_value
        for tJ in range(abs(L.twice_value - F.twice_value), L.twice_value + F.twice_value + 1, 2):
            if abs(tmJ) > tJ:
                continue
            c = clebsch_gordan(F, mF, L, mL, HalfInt(tJ), HalfInt(tmJ))
            if not c.is_zero():
                out.append(((HalfInt(tJ), HalfInt(tmJ), F, L, kL), c))
    else:
        raise ValueError("direction must be '1->3' or '2->3'")
    return out


def coupled_labels(S: Number, Jmax: Number) -> list[tuple]:
    """Basis-3 labels (J, mJ, S, L, kL) matching a Rep2Basis(S, Jmax)."""
    S = HalfInt.of(S)
    tS = S.twice_value
    out = []
    for tJ in range(tS % 2, twice(Jmax) + 1, 2):
        for tm in range(-tJ, tJ + 1, 2):
            for tL in range(abs(tJ - tS), tJ + tS + 1, 2):
                for tk in range(-tL, tL + 1, 2):
                    out.append((HalfInt(tJ), HalfInt(tm), S, HalfInt(tL), HalfInt(tk)))
    return out


def change_of_basis_2to3(basis: Rep2Basis) -> tuple[np.ndarray, list[tuple]]:
    """Dense matrix U with U[a, i] = <a (basis 3)|i (basis 2)>."""
    if basis.mJ_block is not None or basis.k_window is not None:
        raise ValueError("change of basis needs an unblocked basis")
    targets = coupled_labels(basis.S, basis.Jmax)
    index = {t: i for i, t in enumerate(targets)}
    U = np.zeros((len(targets), basis.dim))
    for i in range(basis.dim):
        s = basis.state(i)
        for t, c in basis_change_coefficients("2->3", dict(J=s.J, mJ=s.mJ, kJ=s.kJ, S=s.S, kS=s.kS)):
            U[index[t], i] = float(c)
    return U, targets


def lab_uncoupled_labels(F: Number, Lmax: Number) -> list[tuple]:
    """Basis-1 labels (F, mF, L, mL, kL)."""
    F = HalfInt.of(F)
    out = []
    for tL in range(0, twice(Lmax) + 1, 2):
        for tmF in range(-F.twice_value, F.twice_value + 1, 2):
            for tm in range(-tL, tL + 1, 2):
                for tk in range(-tL, tL + 1, 2):
                    out.append((F, HalfInt(tmF), HalfInt(tL), HalfInt(tm), HalfInt(tk)))
    return out


def change_of_basis_1to3(F: Number, Lmax: Number) -> tuple[np.ndarray, list[tuple], list[tuple]]:
    """Dense matrix V with V[a, i] = <a (basis 3)|i (basis 1)> for L <= Lmax."""
    sources = lab_uncoupled_labels(F, Lmax)
    targets: dict[tuple, int] = {}
    entries = []
    for i, (Fh, mF, L, mL, kL) in enumerate(sources):
        for t, c in basis_change_coefficients("1->3", dict(F=Fh, mF=mF, L=L, mL=mL, kL=kL)):
            a = targets.setdefault(t, len(targets))
            entries.append((a, i, float(c)))
    V = np.zeros((len(targets), len(sources)))
    for a, i, v in entries:
        V[a, i] = v
    order = sorted(targets, key=lambda t: tuple(x.twice_value for x in t))
    perm = [targets[t] for t in order]
    return V[perm, :], order, sources


# ---------------------------------------------------------------------------
# rotation-matrix operators and the commutation table


def rotation_matrix_operators(basis: Rep2Basis) -> dict[tuple[int, int], sp.csr_matrix]:
    """Operator entries R_{i nu} (i body 1..3, nu lab 1..3 for x,y,z)."""
    D = {(m, k): build_D_operator(basis, 1, m, k).matrix for m in (-1, 0, 1) for k in (-1, 0, 1)}
    r2 = math.sqrt(2.0)
    R = {
        (1, 1): 0.5 * (D[1, 1] + D[-1, -1] - D[1, -1] - D[-1, 1]),
        (1, 2): -0.5j * (D[1, 1] - D[-1, -1] + D[-1, 1] - D[1, -1]),
        (1, 3): 0.5 * r2 * (D[0, -1] - D[0, 1]),
        (2, 1): 0.5j * (D[1, 1] - D[-1, -1] - D[-1, 1] + D[1, -1]),
        (2, 2): 0.5 * (D[1, 1] + D[-1, -1] + D[1, -1] + D[-1, 1]),
        (2, 3): -0.5j * r2 * (D[0, -1] + D[0, 1]),
        (3, 1): 0.5 * r2 * (D[-1, 0] - D[1, 0]),
        (3, 2): 0.5j * r2 * (D[1, 0] + D[-1, 0]),
        (3, 3): D[0, 0],
    }
    return {k: sp.csr_matrix(v) for k, v in R.items()}


def _levi(i: int, j: int, k: int) -> int:
    return ((i - j) * (j - k) * (k - i)) // 2


def _components(up: sp.spmatrix, down: sp.spmatrix, z: sp.spmatrix, body: bool):
    if body:
        return {1: 0.5 * (up + down), 2: 0.5j * (up - down), 3: z}
    return {1: 0.5 * (up + down), 2: -0.5j * (up - down), 3: z}


def _residual(A: sp.spmatrix, cols: np.ndarray) -> float:
    sub = sp.csr_matrix(A)[:, cols]
    return float(abs(sub).max()) if sub.nnz else 0.0


@dataclass
class CommutationReport:
    residuals: dict[str, float]
    interior_shift: dict[str, int]
    basis_hash: str

    @property
    def worst(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0

    def failures(self, tol: float = 1e-10) -> dict[str, float]:
        return {k: v for k, v in self.residuals.items() if v >= tol}


def verify_commutation_table(basis: Rep2Basis, ranks: Iterable[int] = (1, 2)) -> CommutationReport:
    """Evaluate the lab and body commutation identities as sparse residuals.

    Each residual is the largest entry of (lhs - rhs) restricted to columns
    with J <= Jmax - shift, where shift is the total J-reach of the D-factors
    in the identity.
    """
    if basis.mJ_block is not None or basis.k_window is not None:
        raise ValueError("commutation checks need an unblocked basis")
    if basis.Jmax.twice_value < basis.S.twice_value + 4:
        raise ValueError("need Jmax >= S + 2")
    A = lambda tag: build_angular_operator(basis, tag).matrix  # noqa: E731
    Jb = _components(A("Jup"), A("Jdown"), A("J3"), body=True)
    Sb = _components(A("Sup"), A("Sdown"), A("S3"), body=True)
    Jl = _components(A("J+"), A("J-"), A("Jz"), body=False)
    R = rotation_matrix_operators(basis)
    Sl = {mu: sum(R[i, mu] @ Sb[i] for i in (1, 2, 3)) for mu in (1, 2, 3)}
    Fl = {mu: -Sl[mu] for mu in (1, 2, 3)}
    Ll = {mu: Jl[mu] + Sl[mu] for mu in (1, 2, 3)}
    Lb = {i: Jb[i] + Sb[i] for i in (1, 2, 3)}

    res: dict[str, float] = {}
    shift: dict[str, int] = {}

    def record(name: str, expr: sp.spmatrix, reach: int):
        cols = np.flatnonzero(basis.interior_mask(reach))
        val = _residual(expr, cols)
        res[name] = max(res.get(name, 0.0), val)
        shift[name] = reach

    def com(X, Y):
        return X @ Y - Y @ X

    def algebra(name: str, V: dict, sign: complex, reach: int):
        for a in (1, 2, 3):
            for b in (1, 2, 3):
                rhs = sum(sign * _levi(a, b, c) * V[c] for c in (1, 2, 3) if _levi(a, b, c))
                record(name, com(V[a], V[b]) - (rhs if not isinstance(rhs, int) else 0 * V[a]), reach)

    def cross(name: str, X: dict, Y: dict, Z: Optional[dict], sign: complex, reach: int):
        for a in (1, 2, 3):
            for b in (1, 2, 3):
                lhs = com(X[a], Y[b])
                if Z is not None:
                    for c in (1, 2, 3):
                        if _levi(a, b, c):
                            lhs = lhs - sign * _levi(a, b, c) * Z[c]
                record(name, lhs, reach)

    # lab frame
    algebra("lab [L_mu, L_nu] = i eps L", Ll, 1j, 2)
    algebra("lab [F_mu, F_nu] = i eps F", Fl, 1j, 2)
    algebra("lab [J_mu, J_nu] = i eps J", Jl, 1j, 0)
    Lp, Lm = Ll[1] + 1j * Ll[2], Ll[1] - 1j * Ll[2]
    record("lab [L_z, L_+-] = +-L_+-", com(Ll[3], Lp) - Lp, 2)
    record("lab [L_z, L_+-] = +-L_+-", com(Ll[3], Lm) + Lm, 2)
    record("lab [L_+, L_-] = 2 L_z", com(Lp, Lm) - 2 * Ll[3], 2)
    Jp, Jm = A("J+"), A("J-")
    record("lab [J_z, J_+-] = +-J_+-", com(Jl[3], Jp) - Jp, 0)
    record("lab [J_z, J_+-] = +-J_+-", com(Jl[3], Jm) + Jm, 0)
    record("lab [J_+, J_-] = 2 J_z", com(Jp, Jm) - 2 * Jl[3], 0)
    Fp, Fm = Fl[1] + 1j * Fl[2], Fl[1] - 1j * Fl[2]
    record("lab [F_z, F_+-] = +-F_+-", com(Fl[3], Fp) - Fp, 2)
    record("lab [F_+, F_-] = 2 F_z", com(Fp, Fm) - 2 * Fl[3], 2)
    cross("lab [L_mu, S_nu] = 0", Ll, Sl, None, 0, 2)
    cross("lab [J_mu, S_nu] = i eps S", Jl, Sl, Sl, 1j, 1)
    cross("lab [J_mu, L_nu] = i eps L", Jl, Ll, Ll, 1j, 1)
    for i in (1, 2, 3):
        Ri = {mu: R[i, mu] for mu in (1, 2, 3)}
        cross("lab [L_mu, R_i nu] = i eps R_i", Ll, Ri, Ri, 1j, 2)
        cross("lab [J_mu, R_i nu] = i eps R_i", Jl, Ri, Ri, 1j, 1)
        cross("lab [S_mu, R_i nu] = 0", Sl, Ri, None, 0, 2)
    for key1, R1 in R.items():
        for key2, R2 in R.items():
            record("[R, R] = 0", com(R1, R2), 2)

    # body frame
    algebra("body [L_i, L_j] = -i eps L", Lb, -1j, 0)
    algebra("body [S_i, S_j] = -i eps S", Sb, -1j, 0)
    algebra("body [J_i, J_j] = -i eps J", Jb, -1j, 0)
    for name, up, down, z in (("J", A("Jup"), A("Jdown"), Jb[3]), ("S", A("Sup"), A("Sdown"), Sb[3]),
                              ("L", A("Jup") + A("Sup"), A("Jdown") + A("Sdown"), Lb[3])):
        record(f"body [{name}_3, {name}_up/down] = +-{name}_up/down", com(z, up) - up, 0)
        record(f"body [{name}_3, {name}_up/down] = +-{name}_up/down", com(z, down) + down, 0)
        record(f"body [{name}_up, {name}_down] = 2 {name}_3", com(up, down) - 2 * z, 0)
    cross("body [L_i, S_j] = -i eps S", Lb, Sb, Sb, -1j, 0)
    cross("body [J_i, S_j] = 0", Jb, Sb, None, 0, 0)
    cross("body [J_i, L_j] = -i eps J", Jb, Lb, Jb, -1j, 0)
    for mu in (1, 2, 3):
        Rmu = {i: R[i, mu] for i in (1, 2, 3)}
        cross("body [L_i, R_j mu] = -i eps R_k mu", Lb, Rmu, Rmu, -1j, 1)
        cross("body [J_i, R_j mu] = -i eps R_k mu", Jb, Rmu, Rmu, -1j, 1)
        cross("body [S_i, R_j mu] = 0", Sb, Rmu, None, 0, 1)

    # D-operator commutators with J
    Jup, Jdn = A("Jup"), A("Jdown")
    for q in ranks:
        for m in range(-q, q + 1):
            for k in range(-q, q + 1):
                Dq = build_D_operator(basis, q, m, k).matrix
                record("[J_z, D] = m D", com(Jl[3], Dq) - m * Dq, q)
                record("[J_3, D] = k D", com(Jb[3], Dq) - k * Dq, q)
                for sgn, L in ((1, Jp), (-1, Jm)):
                    coef = math.sqrt(max((q - sgn * m) * (q + sgn * m + 1), 0))
                    target = build_D_operator(basis, q, m + sgn, k).matrix if abs(m + sgn) <= q else 0 * Dq
                    record("[J_+-, D] = sqrt(..) D_{m+-1,k}", com(L, Dq) - coef * target, q)
                for sgn, L in ((1, Jup), (-1, Jdn)):
                    coef = math.sqrt(max((q - sgn * k) * (q + sgn * k + 1), 0))
                    target = build_D_operator(basis, q, m, k + sgn).matrix if abs(k + sgn) <= q else 0 * Dq
                    record("[J_up/down, D] = sqrt(..) D_{m,k+-1}", com(L, Dq) - coef * target, q)
                for tag in ("S3", "Sup", "Sdown"):
                    record("[S_i, D] = 0", com(A(tag), Dq), q)
    return CommutationReport(res, shift, basis.hash)


def product_rule_residual(basis: Rep2Basis, j1: int, m1: int, k1: int, j2: int, m2: int, k2: int) -> float:
    """Interior residual of D^{j1} D^{j2} minus its CG expansion."""
    from .angular import product_expansion

    lhs = build_D_operator(basis, j1, m1, k1).matrix @ build_D_operator(basis, j2, m2, k2).matrix
    rhs = sp.csr_matrix(lhs.shape, dtype=complex)
    for Q, c in product_expansion(j1, m1, k1, j2, m2, k2):
        rhs = rhs + float(c) * build_D_operator(basis, Q, m1 + m2, k1 + k2).matrix
    cols = np.flatnonzero(basis.interior_mask(j1 + j2))
    return _residual(lhs - rhs, cols)


# ---------------------------------------------------------------------------
# triplet text format

TRIPLET_HEADER = "# magrotor sparse triplets v1"


def export_triplets(op: SparseHermitianOp) -> str:
    """Text form: header line, ``dim <n> basis <hash> hermitian <0|1>``, then
    one ``i j re im`` line per stored entry, sorted by (i, j)."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [TRIPLET_HEADER, f"dim {op.dimension} basis {op.basis_hash} hermitian {int(op.hermitian)}"]
    for t in order:
        v = coo.data[t]
        lines.append(f"{coo.row[t]} {coo.col[t]} {v.real:.17g} {v.imag:.17g}")
    return "\n".join(lines) + "\n"


def import_triplets(text: str) -> SparseHermitianOp:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != TRIPLET_HEADER:
        raise ValueError("not a magrotor triplet file")
    head = lines[1].split()
    if head[0] != "dim" or head[2] != "basis" or head[4] != "hermitian":
        raise ValueError("malformed triplet header")
    n = int(head[1])
    rows, cols, vals = [], [], []
    for ln in lines[2:]:
        i, j, re, im = ln.split()
        rows.append(int(i))
        cols.append(int(j))
        vals.append(complex(float(re), float(im)))
    mat = sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n, n))
    return SparseHermitianOp(mat, bool(int(head[5])), head[3])
