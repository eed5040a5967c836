import math
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

from magrotor.hamiltonian import MagnetParams, QuadraticBosonForm, build_quadratic_HG, compute_frequencies
from magrotor.rotor import SparseHermitianOp
from magrotor.spectra import (DENSE_LIMIT, DisplacementError, bogoliubov_diagonalize, compare_spectra,
                              decoupled_comparison, reduced_model_comparison, sparse_lowest_eigs)
from magrotor.trap import TrapParams

import oracles

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _fock_hamiltonian(form, cut):
    """The quadratic form written out on a truncated product Fock space."""
    n = len(form.modes)
    a1 = oracles.lowering(cut)
    eye = np.eye(cut + 1)
    ops = []
    for i in range(n):
        factors = [eye] * n
        factors[i] = a1
        op = factors[0]
        for f in factors[1:]:
            op = np.kron(op, f)
        ops.append(op)
    H = np.zeros_like(ops[0], dtype=complex)
    for i in range(n):
        H += form.linear[i] * ops[i].T + np.conj(form.linear[i]) * ops[i]
        for j in range(n):
            H += form.A[i, j] * ops[i].T @ ops[j]
            pair = 0.5 * form.B[i, j] * ops[i].T @ ops[j].T
            H += pair + pair.conj().T
    return H


def _random_stable_form(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    A = A @ A.conj().T + 3 * n * np.eye(n)
    B = 0.3 * rng.normal(size=(n, n))
    return QuadraticBosonForm(tuple(f"q{i}" for i in range(n)), A, B + B.T, np.zeros(n))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_normal_modes_match_truncated_fock_spectrum(seed):
    form = _random_stable_form(np.random.default_rng(seed), 2)
    modes = bogoliubov_diagonalize(form)
    assert modes.stable
    w = la.eigvalsh(_fock_hamiltonian(form, 22))
    gaps = w[1:4] - w[0]
    f1, f2 = modes.frequencies
    expected = sorted([f1, f2, 2 * f1, f1 + f2, 2 * f2])[:3]
    assert np.allclose(gaps, expected, rtol=1e-8)


def test_two_mode_squeezing():
    w, g = 5.0, 3.0
    form = QuadraticBosonForm(("a", "b"), np.eye(2) * w, [[0, g], [g, 0]], [0, 0])
    modes = bogoliubov_diagonalize(form)
    assert np.allclose(modes.frequencies, [4.0, 4.0])
    assert modes.symplectic_residual() < 1e-12


def test_single_mode_squeezing_with_shift():
    w, xi = 2.0, 0.5
    form = QuadraticBosonForm(("a",), [[w]], [[xi]], [0])
    modes = bogoliubov_diagonalize(form)
    assert modes.frequencies[0] == pytest.approx(math.sqrt(w * w - xi * xi))


def test_two_mode_instability_growth_rate():
    w, g = 3.0, 5.0
    form = QuadraticBosonForm(("a", "b"), np.eye(2) * w, [[0, g], [g, 0]], [0, 0])
    modes = bogoliubov_diagonalize(form)
    assert not modes.stable
    assert modes.transformation is None
    assert modes.growth_rates[0] == pytest.approx(4.0)
    assert math.isinf(modes.symplectic_residual())


def test_relabelling_does_not_change_frequencies():
    form = _random_stable_form(np.random.default_rng(5), 3)
    a = bogoliubov_diagonalize(form)
    b = bogoliubov_diagonalize(form.relabel(("q2", "q0", "q1")))
    assert np.allclose(a.frequencies, b.frequencies)
    assert a.symplectic_residual() < 1e-10


def test_displacement_removes_linear_term():
    w, lam = 2.0, 0.3 - 0.1j
    form = QuadraticBosonForm(("a",), [[w]], [[0]], [lam])
    modes = bogoliubov_diagonalize(form)
    assert modes.displacement[0] == pytest.approx(-lam / w)
    w0 = la.eigvalsh(_fock_hamiltonian(form, 30))[0]
    assert w0 == pytest.approx(-abs(lam) ** 2 / w, abs=1e-10)


def test_linear_term_on_free_mode_is_refused():
    form = QuadraticBosonForm(("a", "b"), np.diag([0.0, 1.0]), np.zeros((2, 2)), [1.0, 0.0])
    with pytest.raises(DisplacementError):
        bogoliubov_diagonalize(form)


def test_free_particle_mode_is_counted():
    # w (a+a) + (w/2)(a+a+ + a a) is (w/2) X^2 with no restoring P^2 term
    form = QuadraticBosonForm(("a", "b"), np.diag([1.0, 2.0]), np.diag([1.0, 0.0]), [0, 0])
    modes = bogoliubov_diagonalize(form)
    assert modes.zero_modes == 1
    assert modes.transformation is None
    assert np.allclose(modes.frequencies, [0.0, 2.0])


def test_zero_frequency_oscillator_is_an_ordinary_mode():
    form = QuadraticBosonForm(("a", "b"), np.diag([0.0, 1.0]), np.zeros((2, 2)), [0, 0])
    modes = bogoliubov_diagonalize(form)
    assert modes.zero_modes == 0
    assert np.allclose(modes.frequencies, [0.0, 1.0])


def _freqs(trap_name):
    magnet = MagnetParams.from_file(CONFIGS / "cobalt_10nm.cfg")
    return compute_frequencies(magnet, TrapParams.from_file(CONFIGS / f"{trap_name}.cfg"))


def test_weak_bias_trap_is_unstable():
    modes = bogoliubov_diagonalize(build_quadratic_HG(_freqs("ioffe_weak_bias")))
    assert not modes.stable
    assert modes.growth_rates.max() == pytest.approx(6.22e7, rel=1e-2)


def test_strong_bias_trap_is_stable_and_labelled():
    modes = bogoliubov_diagonalize(build_quadratic_HG(_freqs("ioffe_strong_bias")))
    assert modes.stable
    assert sorted(modes.labels) == sorted(modes.modes)
    assert modes.symplectic_residual() < 1e-6


def _random_sparse_hermitian(dim, seed):
    rng = np.random.default_rng(seed)
    M = sp.random(dim, dim, density=0.01, random_state=seed, format="csr")
    M = M + M.T + sp.diags(rng.uniform(0, 50, dim))
    return SparseHermitianOp(M.tocsr(), True, "random")


def test_sparse_eigs_match_dense_and_are_reproducible():
    H = _random_sparse_hermitian(DENSE_LIMIT + 200, 3)
    ref = la.eigvalsh(H.matrix.toarray())
    got = sparse_lowest_eigs(H, 6, seed=11)
    assert np.allclose(got, ref[:6], atol=1e-9)
    assert np.array_equal(got, sparse_lowest_eigs(H, 6, seed=11))
    near = sparse_lowest_eigs(H, 3, seed=11, near=25.0)
    assert np.allclose(near, np.sort(ref[np.argsort(np.abs(ref - 25.0))[:3]]), atol=1e-9)


def test_sparse_eigs_on_block_and_bad_count():
    H = _random_sparse_hermitian(50, 4)
    block = np.arange(10)
    got = sparse_lowest_eigs(H, 2, block=block)
    assert np.allclose(got, la.eigvalsh(H.matrix.toarray()[:10, :10])[:2])
    with pytest.raises(ValueError):
        sparse_lowest_eigs(H, 0)


def test_compare_spectra_assigns_sums_of_quanta():
    form = QuadraticBosonForm(("a", "b"), np.diag([1.0, 1.7]), np.zeros((2, 2)), [0, 0])
    modes = bogoliubov_diagonalize(form)
    cmp = compare_spectra([1.0, 1.7, 2.0, 2.7, 50.0], modes)
    labels = [r.label for r in cmp.rows if r.matched]
    assert labels == ["a", "b", "a+a", "a+b"]
    assert len(cmp.unmatched()) == 1
    assert cmp.worst_error < 1e-12


def test_reduced_model_at_small_spin():
    res = reduced_model_comparison(_freqs("ioffe_strong_bias"), 2)
    assert set(res.errors) == {"s", "k", "m"}
    # the spin flip is governed by the Zeeman and anisotropy terms already at small S
    assert res.errors["s"] < 1e-2
    assert all(o > 0.5 for o in res.overlaps.values())


def test_decoupled_limit_is_exact_up_to_anisotropy_offset():
    base = _freqs("ioffe_strong_bias")
    errs = {S: decoupled_comparison(base, S).errors for S in (2, 4)}
    for e in errs.values():
        assert e["k"] < 1e-12
    # the exact spin flip carries an extra w_D / S that the quadratic model drops
    assert errs[2]["s"] == pytest.approx(2 * errs[4]["s"], rel=1e-6)
