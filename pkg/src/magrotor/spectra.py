"""Normal modes of quadratic boson forms and low-lying exact spectra."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as sla

from .hamiltonian import FrequencySet, QuadraticBosonForm, build_exact_hamiltonian, build_quadratic_HG
from .rotor import Rep2Basis, Rep2State, SparseHermitianOp

DENSE_LIMIT = 600


class DisplacementError(ValueError):
    """Linear terms that no shift of the modes can remove."""


class EigenSolverError(RuntimeError):
    def __init__(self, message: str, residuals: Sequence[float] = ()):
        super().__init__(message)
        self.residuals = list(residuals)


@dataclass
class NormalModes:
    """Symplectic diagonalization result.

    ``transformation`` maps normal-mode operators (d, d+) to the original
    (a, a+): columns ``i`` and ``n + i`` belong to normal mode ``i``.
    Frequencies are signed; a negative value is an inverted mode.
    """

    modes: tuple[str, ...]
    frequencies: np.ndarray
    transformation: Optional[np.ndarray]
    displacement: np.ndarray
    stable: bool
    growth_rates: np.ndarray
    labels: tuple[str, ...] = ()
    zero_modes: int = 0

    def symplectic_residual(self) -> float:
        if self.transformation is None:
            return math.inf
        n = len(self.modes)
        metric = np.diag(np.r_[np.ones(n), -np.ones(n)])
        T = self.transformation
        return float(np.max(np.abs(T.conj().T @ metric @ T - metric)))

    def to_dict(self) -> dict:
        return {
            "modes": list(self.modes),
            "frequencies": [float(x) for x in self.frequencies],
            "labels": list(self.labels),
            "stable": self.stable,
            "growth_rates": [float(x) for x in self.growth_rates],
            "displacement": [[float(z.real), float(z.imag)] for z in self.displacement],
            "zero_modes": self.zero_modes,
        }


def _displacement(form: QuadraticBosonForm, tol: float) -> np.ndarray:
    n = len(form.modes)
    if not np.any(form.linear):
        return np.zeros(n, complex)
    M = form.dynamical_matrix
    rhs = -np.r_[form.linear, form.linear.conj()]
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    scale = max(1.0, np.max(np.abs(M)))
    if np.max(np.abs(M @ sol - rhs)) > tol * scale * max(1.0, np.max(np.abs(rhs))):
        raise DisplacementError("quadratic part is singular and the linear term lies outside its range")
    alpha = sol[:n]
    if np.max(np.abs(sol[n:] - alpha.conj())) > 1e-8 * max(1.0, np.max(np.abs(alpha))):
        # the minimum-norm solution of a consistent singular system is still paired
        alpha = 0.5 * (alpha + sol[n:].conj())
    return alpha


def bogoliubov_diagonalize(form: QuadraticBosonForm, tol: float = 1e-9) -> NormalModes:
    n = len(form.modes)
    alpha = _displacement(form, tol)
    M = form.dynamical_matrix
    metric = np.r_[np.ones(n), -np.ones(n)]
    K = metric[:, None] * M
    vals, vecs = la.eig(K)
    scale = max(1.0, float(np.max(np.abs(M))))
    imag = np.abs(vals.imag) > tol * scale
    if np.any(imag):
        rates = np.sort(np.unique(np.round(np.abs(vals.imag[imag]), 12)))
        freqs = np.sort(vals.real[~imag])
        return NormalModes(form.modes, freqs, None, alpha, False, rates)

    order = np.argsort(vals.real)
    vals, vecs = vals.real[order], vecs[:, order]
    # group degenerate eigenvalues and orthonormalise with the metric inside each group
    positive = []
    zero_count = 0
    i = 0
    while i < 2 * n:
        j = i + 1
        while j < 2 * n and abs(vals[j] - vals[i]) <= 1e-7 * scale:
            j += 1
        V = vecs[:, i:j]
        G = V.conj().T @ (metric[:, None] * V)
        g, W = la.eigh(G)
        for gk, wk in zip(g, W.T):
            if gk > 1e-9:
                positive.append((vals[i:j].mean(), (V @ wk) / math.sqrt(gk)))
            elif gk >= -1e-9:
                zero_count += 1
        i = j
    if zero_count or len(positive) != n:
        freqs = np.sort(np.array([p[0] for p in positive] + [0.0] * (n - len(positive))))
        return NormalModes(form.modes, freqs, None, alpha, True, np.zeros(0), (), n - len(positive))
    positive.sort(key=lambda p: p[0])
    U = np.column_stack([p[1] for p in positive])
    top, bottom = U[:n], U[n:]
    T = np.block([[top, bottom.conj()], [bottom, top.conj()]])
    weights = np.abs(top) ** 2 + np.abs(bottom) ** 2
    labels = tuple(form.modes[int(np.argmax(weights[:, k]))] for k in range(n))
    return NormalModes(form.modes, np.array([p[0] for p in positive]), T, alpha, True, np.zeros(0), labels)


# ---------------------------------------------------------------------------
# exact spectra

def sparse_lowest_eigs(H: SparseHermitianOp, count: int, seed: int = 0, block: Optional[np.ndarray] = None,
                       near: Optional[float] = None, tol: float = 1e-12, maxiter: int = 20000) -> np.ndarray:
    """Lowest ``count`` eigenvalues (or those closest to ``near``).

    ``block`` restricts to a set of basis indices closed under H.  Small
    problems go to the dense solver; larger ones to ARPACK with a start
    vector drawn from ``numpy.random.default_rng(seed)``.
    """
    mat = H.matrix.tocsr()
    if block is not None:
        block = np.asarray(block)
        mat = mat[block][:, block]
    dim = mat.shape[0]
    if count < 1 or count > dim:
        raise ValueError(f"count must be between 1 and {dim}")
    if dim <= DENSE_LIMIT or count >= dim - 1:
        w = la.eigvalsh(mat.toarray())
        if near is None:
            return w[:count]
        return np.sort(w[np.argsort(np.abs(w - near), kind="stable")[:count]])
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    try:
        if near is None:
            w = sla.eigsh(mat, k=count, which="SA", v0=v0, tol=tol, maxiter=maxiter, return_eigenvectors=False)
        else:
            w = sla.eigsh(mat, k=count, sigma=near, which="LM", v0=v0, tol=tol, maxiter=maxiter,
                          return_eigenvectors=False)
    except sla.ArpackNoConvergence as exc:
        res = []
        if exc.eigenvectors is not None and exc.eigenvectors.size:
            for lam, vec in zip(exc.eigenvalues, exc.eigenvectors.T):
                res.append(float(np.linalg.norm(mat @ vec - lam * vec)))
        raise EigenSolverError(f"eigensolver did not converge after {maxiter} iterations", res) from None
    return np.sort(w.real)


@dataclass
class GapMatch:
    exact: float
    predicted: float
    label: str
    relative_error: float
    matched: bool


@dataclass
class SpectrumComparison:
    rows: list[GapMatch]
    report: dict = field(default_factory=dict)

    @property
    def worst_error(self) -> float:
        errs = [r.relative_error for r in self.rows if r.matched]
        return max(errs) if errs else math.inf

    def unmatched(self) -> list[GapMatch]:
        return [r for r in self.rows if not r.matched]


def _candidates(modes: NormalModes, max_quanta: int) -> list[tuple[float, str]]:
    labels = modes.labels or tuple(f"mode{i}" for i in range(len(modes.frequencies)))
    out = []
    idx = range(len(modes.frequencies))
    for q in range(1, max_quanta + 1):
        for combo in itertools.combinations_with_replacement(idx, q):
            out.append((abs(float(sum(modes.frequencies[i] for i in combo))), "+".join(labels[i] for i in combo)))
    return out


def compare_spectra(exact_gaps: Iterable[float], modes: NormalModes, max_quanta: int = 2,
                    reject_above: float = 0.5) -> SpectrumComparison:
    """Match each exact gap to the nearest unused single-mode frequency or
    sum of up to ``max_quanta`` frequencies (magnitudes compared)."""
    gaps = [abs(float(g)) for g in exact_gaps]
    cands = _candidates(modes, max_quanta)
    used: set[int] = set()
    rows = []
    for g in gaps:
        best = None
        for i, (c, lab) in enumerate(cands):
            if i in used or c == 0:
                continue
            err = abs(g - c) / c
            if best is None or err < best[0]:
                best = (err, i)
        if best is None:
            rows.append(GapMatch(g, math.nan, "", math.inf, False))
            continue
        err, i = best
        ok = err <= reject_above
        if ok:
            used.add(i)
        rows.append(GapMatch(g, cands[i][0], cands[i][1], err, ok))
    return SpectrumComparison(rows, {"candidates": len(cands), "max_quanta": max_quanta})


# ---------------------------------------------------------------------------
# reduced angular model (no centre of mass, eta = 0)

REDUCED_MODES = ("s", "k", "m")


@dataclass
class ReducedComparison:
    S: float
    gaps: dict[str, float]
    predicted: dict[str, float]
    errors: dict[str, float]
    overlaps: dict[str, float]
    dims: dict[int, int]

    @property
    def worst_error(self) -> float:
        return max(self.errors.values())


def reduced_frequencies(base: FrequencySet, S: float) -> FrequencySet:
    return base.replace(S=float(S), J_ref=float(S), eta=0.0, eta_prime=0.0)


def _reduced_levels(freqs: FrequencySet, include: tuple[str, ...], extra_J: int):
    Sh = freqs.S
    bare = {
        "vac": (0, Rep2State.of(Sh, -Sh, -Sh, Sh, Sh)),
        "s": (-1, Rep2State.of(Sh, -Sh, -Sh, Sh, Sh - 1)),
        "m": (-1, Rep2State.of(Sh + 1, -Sh, -Sh - 1, Sh, Sh)),
        "k": (1, Rep2State.of(Sh, -Sh, -Sh + 1, Sh, Sh)),
    }
    spectra, dims = {}, {}
    for K in (-1, 0, 1):
        basis = Rep2Basis(Sh, Sh + extra_J, mJ_block=-Sh, k_window=(K, K))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            H = build_exact_hamiltonian(freqs, basis, lamb_dicke_order=0, include=include)
        w, v = la.eigh(H.matrix.toarray())
        spectra[K] = (basis, w, v)
        dims[K] = basis.dim
    energies, overlaps = {}, {}
    for name, (K, state) in bare.items():
        basis, w, v = spectra[K]
        weights = np.abs(v[basis.lookup(state), :]) ** 2
        best = int(np.argmax(weights))
        energies[name] = float(w[best])
        overlaps[name] = float(weights[best])
    gaps = {m: energies[m] - energies["vac"] for m in REDUCED_MODES}
    return gaps, overlaps, dims


def reduced_model_comparison(base: FrequencySet, S: float, extra_J: int = 6) -> ReducedComparison:
    """Exact angular spectrum against the quadratic prediction for s, k, m.

    Works in the lab-projection block mJ = -S.  The polarised reference
    state |J=S, kJ=-S, kS=S> has kJ + kS = 0; single s or m quanta live at
    kJ + kS = -1 and a single k quantum at +1.  Each exact level is picked
    by its largest overlap with the corresponding bare state, and gaps are
    signed energy differences to the reference level (the reference is not
    the ground state: the spin sits at the top of its Zeeman ladder).
    """
    freqs = reduced_frequencies(base, S)
    gaps, overlaps, dims = _reduced_levels(freqs, ("H0", "HI", "VD"), extra_J)
    modes = bogoliubov_diagonalize(build_quadratic_HG(freqs, REDUCED_MODES))
    if not modes.stable:
        raise ValueError("quadratic reduced model is unstable for these parameters")
    predicted = {lab: float(f) for f, lab in zip(modes.frequencies, modes.labels)}
    if set(predicted) != set(REDUCED_MODES):
        raise ValueError(f"normal modes could not be labelled uniquely: {modes.labels}")
    errors = {m: abs(gaps[m] - predicted[m]) / abs(predicted[m]) for m in REDUCED_MODES}
    return ReducedComparison(freqs.S, gaps, predicted, errors, overlaps, dims)


def decoupled_comparison(base: FrequencySet, S: float, extra_J: int = 6) -> ReducedComparison:
    """Couplings switched off: only H0 in the exact model.  Its quadratic
    part is -Delta s+s + w_I k+k (the anisotropy and interaction pieces of
    w_k, w_m, g_k, g_m all vanish), so s and k are compared; m has no
    quadratic term and is left out."""
    freqs = reduced_frequencies(base, S)
    gaps, overlaps, dims = _reduced_levels(freqs, ("H0",), extra_J)
    predicted = {"s": -freqs.couplings["Delta"], "k": freqs.w_I}
    errors = {m: abs(gaps[m] - predicted[m]) / abs(predicted[m]) for m in predicted}
    return ReducedComparison(freqs.S, {m: gaps[m] for m in predicted}, predicted, errors, overlaps, dims)
