"""Superoperator construction and spectral analysis."""

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from prbmlab import (EnsembleSpec, LindbladModel, apply_superoperator,
                     build_dense_superoperator, build_real_superoperator,
                     coords_from_hermitian, full_spectrum, leading_modes,
                     matrix_from_coords, pairing_defect, sample_operator)


def _model(n, alpha_h, alpha_l, gamma, seed, boundary="open"):
    h = sample_operator(EnsembleSpec(n, alpha_h, boundary, seed=seed)).matrix
    l = sample_operator(EnsembleSpec(n, alpha_l, boundary, seed=seed + 1)).matrix
    return LindbladModel(h, [(l, gamma)])


def _random_hermitian(n, rng):
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (x + x.conj().T) / 2


# ----------------------------------------------------------------- the action

def test_steady_state_is_annihilated():
    model = _model(12, 0.3, 0.9, 0.7, seed=1)
    out = apply_superoperator(model, np.eye(12) / 12)
    assert np.max(np.abs(out)) < 1e-10


def test_unitary_part_kills_eigenprojectors():
    model = _model(10, 0.5, 0.5, 0.0, seed=2)
    model = LindbladModel(model.hamiltonian, [])
    vals, vecs = np.linalg.eigh(model.hamiltonian)
    proj = np.outer(vecs[:, 3], vecs[:, 3]).astype(complex)
    assert np.max(np.abs(apply_superoperator(model, proj))) < 1e-12


def test_pure_dephasing_rates_are_exact():
    # H = 0, diagonal L: |mu><nu| decays at (gamma/2)(k_mu - k_nu)^2
    kappa = np.array([0.3, -1.1, 0.8, 2.0])
    gamma = 1.6
    model = LindbladModel(np.zeros((4, 4)), [(np.diag(kappa), gamma)])
    rho = np.zeros((4, 4), dtype=complex)
    rho[1, 3] = 1.0
    out = apply_superoperator(model, rho)
    expect = -(gamma / 2.0) * (kappa[1] - kappa[3]) ** 2 * rho
    assert np.max(np.abs(out - expect)) < 1e-12


def test_trace_and_hermiticity_preserved():
    rng = np.random.default_rng(3)
    model = _model(16, 0.2, 1.4, 2.3, seed=4)
    for _ in range(10):
        rho = _random_hermitian(16, rng)
        out = apply_superoperator(model, rho)
        assert abs(np.trace(out)) < 1e-10
        assert np.max(np.abs(out - out.conj().T)) < 1e-10


def test_dimension_mismatch_raises():
    model = _model(8, 0.0, 0.0, 1.0, seed=5)
    with pytest.raises(ValueError):
        apply_superoperator(model, np.eye(9))


def test_model_rejects_asymmetric_jump():
    h = np.zeros((3, 3))
    l = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        LindbladModel(h, [(l, 1.0)])


# ------------------------------------------------------------ dense builders

def test_dense_two_level_dephasing():
    model = LindbladModel(np.zeros((2, 2)), [(np.diag([0.0, 1.0]), 1.0)])
    s = build_dense_superoperator(model)
    assert np.allclose(s, np.diag([0.0, -0.5, -0.5, 0.0]))


def test_dense_maps_steady_state_to_zero():
    model = _model(6, 0.4, 0.8, 1.1, seed=6)
    s = build_dense_superoperator(model)
    out = s @ (np.eye(6) / 6).flatten(order="F")
    assert np.max(np.abs(out)) < 1e-12


def test_dense_agrees_with_matrix_free():
    rng = np.random.default_rng(7)
    model = _model(8, 0.6, 1.2, 0.9, seed=8)
    s = build_dense_superoperator(model)
    for _ in range(20):
        rho = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        lhs = (s @ rho.flatten(order="F")).reshape((8, 8), order="F")
        rhs = apply_superoperator(model, rho)
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_dense_spectrum_closed_under_conjugation():
    model = _model(8, 0.0, 0.0, 0.5, seed=9)
    eigs = np.linalg.eigvals(build_dense_superoperator(model))
    assert pairing_defect(eigs) < 1e-8


def test_real_representation_matches_kron_spectrum():
    model = _model(6, 0.3, 0.7, 0.8, seed=10)
    wr = np.linalg.eigvals(build_real_superoperator(model))
    wc = np.linalg.eigvals(build_dense_superoperator(model))
    cost = np.abs(wr[:, None] - wc[None, :])
    rows, cols = linear_sum_assignment(cost)
    assert cost[rows, cols].max() < 1e-10


def test_coords_round_trip():
    rng = np.random.default_rng(11)
    rho = _random_hermitian(7, rng)
    c = coords_from_hermitian(rho)
    assert np.max(np.abs(matrix_from_coords(c, 7) - rho)) < 1e-14
    assert abs(np.vdot(rho, rho).real - np.dot(c, c)) < 1e-12


def test_dense_respects_size_gate():
    model = _model(10, 0.0, 0.0, 1.0, seed=12)
    with pytest.raises(ValueError):
        build_dense_superoperator(model, dense_limit=8)


# -------------------------------------------------------------- full spectrum

def test_full_spectrum_invariants():
    model = _model(10, 0.4, 1.0, 1.3, seed=13)
    spec = full_spectrum(model)
    assert np.sum(np.abs(spec.eigenvalues) <= 1e-8) == 1
    assert np.max(np.real(spec.eigenvalues)) <= 1e-8
    assert pairing_defect(spec.eigenvalues) < 1e-8
    mode = spec.slowest_mode
    assert abs(np.trace(mode)) < 1e-8
    assert np.linalg.norm(mode) == pytest.approx(1.0, abs=1e-10)
    assert spec.residual <= 1e-6
    assert spec.gap > 0


def test_full_spectrum_pure_dephasing_values():
    kappa = np.array([0.0, 0.4, -1.3, 2.2, 0.9])
    gamma = 1.7
    model = LindbladModel(np.zeros((5, 5)), [(np.diag(kappa), gamma)])
    expect = np.sort([-0.5 * gamma * (a - b) ** 2 for a in kappa for b in kappa])
    got = np.sort(np.real(full_spectrum(model).eigenvalues))
    assert np.max(np.abs(got - expect)) < 1e-10
    assert np.max(np.abs(np.imag(full_spectrum(model).eigenvalues))) < 1e-10


# -------------------------------------------------------------- leading modes

def test_leading_modes_matches_dense_oracle():
    for k, gamma in enumerate((0.5, 5.0, 1.0)):
        model = _model(32, 0.4, 1.1, gamma, seed=100 + 2 * k)
        dense = full_spectrum(model)
        it = leading_modes(model, count=2, tol=1e-9)
        assert it.gap == pytest.approx(dense.gap, rel=1e-6)
        assert it.residual <= 1e-9
        assert it.method == "power-iteration"
        assert abs(np.trace(it.slowest_mode)) < 1e-8


def test_leading_modes_exact_for_pure_dephasing():
    kappa = np.array([0.1, 0.9, -0.7, 1.4, -1.6, 0.5])
    gamma = 3.0
    model = LindbladModel(np.zeros((6, 6)), [(np.diag(kappa), gamma)])
    rates = sorted(0.5 * gamma * (a - b) ** 2
                   for i, a in enumerate(kappa) for j, b in enumerate(kappa)
                   if i != j)
    it = leading_modes(model, count=1, tol=1e-10)
    assert it.gap == pytest.approx(rates[0], rel=1e-8)


def test_shifted_map_variant_agrees_with_dense():
    model = _model(24, 0.0, 0.0, 8.0, seed=1)
    dense = full_spectrum(model)
    it = leading_modes(model, count=2, tol=1e-8, method="shifted",
                       max_applies=400_000)
    assert it.gap == pytest.approx(dense.gap, rel=1e-6)


def test_multi_channel_leading_modes():
    h = sample_operator(EnsembleSpec(20, 0.4, seed=30)).matrix
    l1 = sample_operator(EnsembleSpec(20, 0.9, seed=31)).matrix
    l2 = sample_operator(EnsembleSpec(20, 1.5, seed=32)).matrix
    model = LindbladModel(h, [(l1, 1.0), (l2, 0.6)])
    dense = full_spectrum(model)
    it = leading_modes(model, count=2, tol=1e-9)
    assert it.gap == pytest.approx(dense.gap, rel=1e-6)


def test_leading_modes_complex_pair(complex_pair_model):
    model, dense = complex_pair_model
    lam1 = dense.leading[0][0]
    assert abs(lam1.imag) > 1e-6      # genuinely oscillatory leading pair
    it = leading_modes(model, count=2, tol=1e-8)
    lams = sorted(it.eigenvalues, key=lambda z: z.imag)
    assert lams[0] == pytest.approx(np.conj(lams[1]), abs=1e-6)
    assert lams[0].real == pytest.approx(lams[1].real, abs=1e-6)
    assert it.gap == pytest.approx(dense.gap, rel=1e-6)


def test_leading_modes_rejects_bad_count():
    model = _model(8, 0.0, 0.0, 1.0, seed=40)
    with pytest.raises(ValueError):
        leading_modes(model, count=0)
