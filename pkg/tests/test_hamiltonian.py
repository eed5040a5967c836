import json
import math
import warnings

import numpy as np
import pytest

from magrotor.bosons import BosonPolynomial
from magrotor.hamiltonian import (HG_MODES, FrequencySet, HamiltonianBuildError, MagnetParams, QuadraticBosonForm,
                                  build_exact_hamiltonian, build_quadratic_HG, compute_frequencies, hg_dictionary,
                                  table_couplings, validity_report)
from magrotor.rotor import Rep2Basis
from magrotor.symbolic import sym
from magrotor.trap import NonConfiningTrap, TrapParams

import oracles

HBAR = 1.054571817e-34
KB = 1.380649e-23
COBALT = MagnetParams(1e-8, 8.9e3, 1.7, 30.0)
WEAK_BIAS = TrapParams(1e-3, 1e4, 1e6)


# ---------------------------------------------------------------------------
# frequencies

def test_frequencies_against_hand_evaluation():
    R, rho, gamma, ma = 1e-8, 8.9e3, 1.761e11, 9.786e-26
    mass = rho * 4 / 3 * math.pi * R ** 3
    S = round(2 * 1.7 * mass / ma) / 2
    inertia = 2 / 5 * mass * R ** 2
    curv = (1e4 ** 2 - 1e-3 * 1e6 / 2) / 1e-3
    f = compute_frequencies(COBALT, WEAK_BIAS)
    assert f.S == S
    assert f.w_L == pytest.approx(gamma * 1e-3, rel=1e-12)
    assert f.w_I == pytest.approx(HBAR * S / inertia, rel=1e-9)
    assert f.w_D == pytest.approx(KB * 30 / (HBAR * S), rel=1e-9)
    assert f.w_T == pytest.approx(math.sqrt(HBAR * gamma * curv / (mass / S)), rel=1e-9)
    assert f.w_z == pytest.approx(math.sqrt(HBAR * gamma * 1e6 / (mass / S)), rel=1e-9)
    z = math.sqrt(HBAR / (2 * (mass / S) * f.w_T))
    assert f.eta == pytest.approx(1e4 * z / 2e-3, rel=1e-9)
    assert f.eta_prime == pytest.approx(1e6 * z * z / 4e-3, rel=1e-9)


def test_weak_bias_values_and_hierarchy():
    f = compute_frequencies(COBALT, WEAK_BIAS)
    for name, ref in (("w_L", 1.76e8), ("w_I", 4.6e7), ("w_D", 6.1e6), ("w_T", 5.7e6)):
        assert abs(getattr(f, name) - ref) / ref < 0.05
    rep = validity_report(f)
    assert all(rep.hierarchy.values())
    assert rep.lamb_dicke_ordering
    assert rep.v_jkm == pytest.approx(f.w_I / (2 * math.sqrt(2 * f.S)))


def test_bias_scaling():
    a = compute_frequencies(COBALT, WEAK_BIAS)
    b = compute_frequencies(COBALT, TrapParams(2e-3, 1e4, 1e6))
    assert b.w_L == pytest.approx(2 * a.w_L)
    assert b.w_I == a.w_I and b.w_D == a.w_D
    assert b.eta == pytest.approx(a.eta / 2 * math.sqrt(a.w_T / b.w_T), rel=1e-12)


def test_hierarchy_violation_is_reported_not_raised():
    f = FrequencySet.from_values(1.0, 2.0, 1.0, 1.0, 1.0, 10)
    rep = validity_report(f)
    assert not rep.hierarchy["w_L >= w_I"]
    assert not rep.hierarchy["w_I >> w_D"]


def test_bad_inputs():
    with pytest.raises(NonConfiningTrap):
        compute_frequencies(COBALT, TrapParams(1e-3, 0.0, 1e6))
    with pytest.raises(ValueError):
        MagnetParams(-1e-8, 8.9e3, 1.7, 30.0)
    with pytest.raises(ValueError):
        compute_frequencies(COBALT, WEAK_BIAS, J_ref=0.5)


def test_json_round_trip():
    f = compute_frequencies(COBALT, WEAK_BIAS)
    text = f.to_json()
    doc = json.loads(text)
    assert doc["units"]["frequencies"] == "rad/s"
    back = FrequencySet.from_json(text)
    assert back == f
    assert back.couplings == f.couplings
    with pytest.raises(ValueError):
        FrequencySet.from_json('{"schema": "other"}')


def test_couplings_follow_table():
    f = FrequencySet.from_values(10.0, 3.0, 0.5, 0.25, 0.2, 4, J_ref=5, eta=0.1)
    wI, wD, wL, wT, S, J, eta = 3.0, 0.5, 10.0, 0.25, 4.0, 5.0, 0.1
    c = f.couplings
    assert c["Delta"] == pytest.approx(wL - 2 * wD - wI * J / S)
    assert c["w_k"] == pytest.approx(wI + 8 * wD * S / J)
    assert c["w_j"] == pytest.approx(wI / 2 * (J / S - 1))
    assert c["xi1"] == pytest.approx(math.sqrt(2 * J) / 2 * wI * (J / S - 1))
    assert c["g_k"] == pytest.approx(wI * math.sqrt(J / S) + 4 * wD * math.sqrt(S / J))
    assert c["g_r"] == pytest.approx(eta * (8 * wD + 2 * wT) * math.sqrt(S / J))
    assert c["g_s"] == pytest.approx(2 * wT * eta)


# ---------------------------------------------------------------------------
# quadratic form

def test_hg_dictionary_is_hermitian_and_decouples_at_zero_eta():
    H = hg_dictionary()
    assert H.is_hermitian()
    f = FrequencySet.from_values(10.0, 3.0, 0.5, 0.25, 0.2, 4)
    form = build_quadratic_HG(f)
    cm = [HG_MODES.index(m) for m in ("b_r", "b_l", "c_z")]
    rest = [i for i in range(len(HG_MODES)) if i not in cm]
    assert np.max(np.abs(form.A[np.ix_(cm, rest)])) == 0
    assert np.max(np.abs(form.B[np.ix_(cm, rest)])) == 0
    assert form.restrict(("s", "k", "m")).modes == ("s", "k", "m")


def test_quadratic_form_conventions():
    poly = (BosonPolynomial.number("s") * 3 + BosonPolynomial.monomial("s+", "k+") * 2
            + BosonPolynomial.monomial("s", "k") * 2 + BosonPolynomial.monomial("k+", "k+")
            + BosonPolynomial.monomial("k", "k") + BosonPolynomial.create("s") + BosonPolynomial.annihilate("s"))
    form = QuadraticBosonForm.from_polynomial(poly, {}, ("s", "k"))
    assert form.A[0, 0] == 3
    assert form.B[0, 1] == 2 and form.B[1, 0] == 2
    assert form.B[1, 1] == 2  # (1/2)(B_kk k+k+) reproduces one k+^2
    assert form.linear[0] == 1
    with pytest.raises(ValueError):
        QuadraticBosonForm.from_polynomial(BosonPolynomial.create("s") * 1, {}, ("s",))
    with pytest.raises(ValueError):
        QuadraticBosonForm.from_polynomial(BosonPolynomial.monomial("s+", "s+", "s"), {}, ("s",))
    with pytest.raises(ValueError):
        form.restrict(("s",))
    with pytest.raises(ValueError):
        form.relabel(("s", "m"))


# ---------------------------------------------------------------------------
# exact Hamiltonian against dense oracles

def _small(S, **kw):
    base = dict(w_L=5.0, w_I=2.0, w_D=0.7, w_T=0.3, w_z=0.4)
    base.update(kw)
    return FrequencySet.from_values(base["w_L"], base["w_I"], base["w_D"], base["w_T"], base["w_z"], S)


def _oracle_parts(S, Jmax, f):
    labels = oracles.rotor_labels(S, Jmax)
    op = oracles.dense_angular(labels, S)
    n = oracles.field_direction_body(labels)
    S = float(S)
    H0 = (f.w_L * op["S3"] - f.w_D / S * op["S3"] @ op["S3"]
          + f.w_I / (2 * S) * (op["J2"] + 2 * op["J3"] @ op["S3"]))
    HI = f.w_I / (2 * S) * (op["Jup"] @ op["Sdown"] + op["Jdown"] @ op["Sup"])
    flip = n["nup"] @ op["Sdown"] + n["ndown"] @ op["Sup"]
    eye = np.eye(len(labels))
    bracket = op["S3"] @ (eye - 2 * n["n3"] @ n["n3"]) - 0.5 * (n["n3"] @ flip + flip @ n["n3"])
    VD = f.w_D / S * (op["S3"] @ op["S3"]) - f.w_D / S * (bracket @ bracket)
    VD = (VD + VD.conj().T) / 2
    return {"H0": H0, "HI": HI, "VD": VD}, op


@pytest.mark.parametrize("S", [1, 2])
def test_H0_is_the_analytic_diagonal(S):
    f = _small(S)
    basis = Rep2Basis(S, S + 2)
    H = build_exact_hamiltonian(f, basis, include=("H0",)).matrix.toarray()
    ref, _ = _oracle_parts(S, S + 2, f)
    assert np.max(np.abs(H - ref["H0"])) < 1e-12
    assert np.max(np.abs(H - np.diag(np.diag(H)))) == 0


def test_HI_matches_oracle_and_one_element_by_hand():
    S, Jmax = 1, 3
    f = _small(S)
    basis = Rep2Basis(S, Jmax)
    H = build_exact_hamiltonian(f, basis, include=("HI",)).matrix.toarray()
    ref, _ = _oracle_parts(S, Jmax, f)
    assert np.max(np.abs(H - ref["HI"])) < 1e-12
    from magrotor.rotor import Rep2State
    i = basis.lookup(Rep2State.of(2, 0, 0, 1, 1))
    j = basis.lookup(Rep2State.of(2, 0, 1, 1, 0))
    # Jup raises kJ 0 -> 1 (sqrt 6) while Sdown lowers kS 1 -> 0 (sqrt 2)
    assert H[j, i] == pytest.approx(f.w_I / 2 * math.sqrt(6) * math.sqrt(2))


def test_VD_matches_dense_oracle_with_symmetrised_products():
    S, Jmax = 1, 3
    f = _small(S)
    basis = Rep2Basis(S, Jmax)
    with pytest.warns(RuntimeWarning):
        H = build_exact_hamiltonian(f, basis, include=("VD",)).matrix.toarray()
    ref, _ = _oracle_parts(S, Jmax, f)
    assert np.max(np.abs(H - ref["VD"])) < 1e-12


def test_VD_on_low_states_does_not_depend_on_cutoff():
    # A J = 1 state is four shells below Jmax = 5, which is as far as the
    # quartic D product reaches, so raising Jmax cannot change its entry.
    S = 1
    f = _small(S)
    vals = []
    for Jmax in (5, 7):
        basis = Rep2Basis(S, Jmax)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            H = build_exact_hamiltonian(f, basis, include=("VD",)).matrix
        from magrotor.rotor import Rep2State
        i = basis.lookup(Rep2State.of(1, 0, 0, 1, 1))
        vals.append(H[i, i])
    assert vals[0] == pytest.approx(vals[1], abs=1e-12)


def test_centre_of_mass_at_zero_eta_is_a_product():
    S, Jmax, cut = 1, 3, 4
    f = _small(S)
    basis = Rep2Basis(S, Jmax)
    H = build_exact_hamiltonian(f, basis, {"c_z": cut}, include=("H0",)).matrix.toarray()
    ref, op = _oracle_parts(S, Jmax, f)
    a = oracles.lowering(cut)
    n_op = a.T @ a
    one = np.eye(cut + 1)
    q2 = a @ a + a.T @ a.T + 2 * n_op + one      # (c + c+)^2, normal ordered
    p2 = a @ a + a.T @ a.T - 2 * n_op - one      # (c - c+)^2, normal ordered
    expected = (np.kron(ref["H0"], one) + f.w_z * (np.kron(np.eye(basis.dim), -p2 / 4)
                                                    + np.kron(op["S3"] / S, q2 / 4)))
    assert np.max(np.abs(H - expected)) < 1e-12


def test_polarised_block_has_harmonic_ladder():
    S, Jmax, cut = 1, 3, 5
    f = _small(S)
    basis = Rep2Basis(S, Jmax)
    H = build_exact_hamiltonian(f, basis, {"c_x": cut}, include=("H0",)).matrix.toarray()
    from magrotor.rotor import Rep2State
    i = basis.lookup(Rep2State.of(1, 0, 0, 1, 1))
    block = H[i * (cut + 1):(i + 1) * (cut + 1), i * (cut + 1):(i + 1) * (cut + 1)]
    levels = np.diag(block).real - block[0, 0].real
    assert np.allclose(levels, f.w_T * np.arange(cut + 1), atol=1e-12)


@pytest.mark.parametrize("order", [1, 2])
def test_momentum_coupling_is_polynomial_in_eta(order):
    # One derivative of n carries eta, two carry eta^2 (eta' is set to zero),
    # and products are capped at ``order`` derivatives: at first order the
    # coupling is linear in eta, at second order quadratic, never cubic.
    S, Jmax, cut = 1, 4, 1
    basis = Rep2Basis(S, Jmax)

    def H(eta):
        f = _small(S).replace(eta=eta, eta_prime=0.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return build_exact_hamiltonian(f, basis, {"c_x": cut, "c_y": cut}, lamb_dicke_order=order,
                                           include=("VP",)).matrix.toarray()

    e = 0.05
    h = [H(k * e) for k in range(4)]
    scale = np.max(np.abs(h[3]))
    assert np.max(np.abs(h[0])) == 0
    assert np.max(np.abs(h[1])) > 0
    quad = h[2] - 2 * h[1] + h[0]
    cubic = h[3] - 3 * h[2] + 3 * h[1] - h[0]
    if order == 1:
        assert np.max(np.abs(quad)) < 1e-12 * scale
    else:
        assert np.max(np.abs(quad)) > 1e-6 * scale
    assert np.max(np.abs(cubic)) < 1e-12 * scale


def test_builder_errors():
    f = _small(1)
    with pytest.raises(HamiltonianBuildError):
        build_exact_hamiltonian(f, Rep2Basis(2, 5), include=("H0",))
    with pytest.raises(HamiltonianBuildError):
        build_exact_hamiltonian(f, Rep2Basis(1, 4), include=("VP",))
    with pytest.raises(HamiltonianBuildError):
        build_exact_hamiltonian(f, Rep2Basis(1, 4), {"c_w": 2}, include=("H0",))
    with pytest.raises(ValueError):
        build_exact_hamiltonian(f, Rep2Basis(1, 4), include=("H9",))
    with pytest.raises(ValueError):
        build_exact_hamiltonian(f, Rep2Basis(1, 4), lamb_dicke_order=3)


def test_exact_hamiltonian_is_hermitian_with_everything_on():
    f = _small(1).replace(eta=0.1, eta_prime=0.01)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        H = build_exact_hamiltonian(f, Rep2Basis(1, 3), {"c_x": 1, "c_y": 1, "c_z": 1}, lamb_dicke_order=2)
    assert H.hermitian
    assert abs(H.matrix - H.matrix.getH()).max() == 0


def test_symbol_table_is_exact():
    t = table_couplings()
    assert t["g_s"] == 2 * sym("wT") * sym("eta")
    assert t["w_r"] == t["w_l"]
