"""Population rate matrices: both decoherence limits and closed forms."""

import numpy as np
import pytest

from prbmlab import (EnsembleSpec, LindbladModel, OPEN, PERIODIC,
                     asymptotic_gap, chebyshev_modes, circulant_mean_field_eigs,
                     localized_limit_a0, mean_field_a0, multi_channel_rate_matrix,
                     rate_gap, sample_operator, spectrum, strong_rate_matrix,
                     tail_gap_estimate, validate_rate_matrix, weak_rate_matrix)
from prbmlab.rate_matrices import STRONG, STRONG_UNREG, WEAK


def _op(n, alpha, seed, boundary=OPEN):
    return sample_operator(EnsembleSpec(n, alpha, boundary, seed=seed))


# ----------------------------------------------------------------- weak limit

def test_weak_vanishes_for_commuting_jump():
    h = _op(12, 0.4, seed=1).matrix
    decomp = spectrum(h)
    # jump diagonal in the H eigenbasis
    jump = decomp.eigenvectors @ np.diag(np.linspace(-1, 1, 12)) @ decomp.eigenvectors.T
    rm = weak_rate_matrix(decomp, jump, 0.7)
    assert np.max(np.abs(rm.matrix)) < 1e-12


def test_weak_entry_statistics():
    # <A_ij> = gamma/2N off diagonal and <A_ii> = -gamma/2
    n, gamma = 1024, 0.4
    offs, diags = [], []
    for k in range(12):
        rm = weak_rate_matrix(spectrum(_op(n, 0.0, seed=100 + k)),
                              _op(n, 0.0, seed=200 + k), gamma)
        a = rm.matrix
        diags.append(np.mean(np.diagonal(a)))
        offs.append((np.sum(a) - np.sum(np.diagonal(a))) / (n * n - n))
    assert np.mean(offs) == pytest.approx(gamma / (2 * n), rel=0.03)
    assert np.mean(diags) == pytest.approx(-gamma / 2, rel=0.03)


@pytest.mark.slow
def test_weak_gap_approaches_half_gamma():
    rm = weak_rate_matrix(spectrum(_op(3200, 0.0, seed=1)),
                          _op(3200, 0.0, seed=2), 0.2)
    gap, _ = rate_gap(rm, want_vector=False)
    assert gap == pytest.approx(0.1, rel=0.10)


# --------------------------------------------------------------- strong limit

def test_strong_vanishes_for_commuting_hamiltonian():
    l_mat = _op(12, 0.6, seed=3).matrix
    decomp = spectrum(l_mat)
    h = decomp.eigenvectors @ np.diag(np.linspace(-1, 1, 12)) @ decomp.eigenvectors.T
    rm = strong_rate_matrix(decomp, h, 5.0)
    assert np.max(np.abs(rm.matrix)) < 1e-12


def test_strong_degenerate_kappa_regularized_entry_is_zero():
    from prbmlab.ensembles import SpectralDecomposition
    kappa = np.array([0.5, 0.5, -1.0])
    decomp = SpectralDecomposition(kappa, np.eye(3))
    h = np.array([[0.3, 0.2, 0.1], [0.2, -0.4, 0.05], [0.1, 0.05, 0.0]])
    rm = strong_rate_matrix(decomp, h, 5.0)
    assert rm.matrix[0, 1] == 0.0
    assert rm.regime == STRONG
    un = strong_rate_matrix(decomp, h, 5.0, regularized=False)
    assert un.matrix[0, 1] == 0.0
    assert un.notes["singular_entries"] == 2
    assert un.regime == STRONG_UNREG


def test_regularized_entries_bounded_by_unregularized():
    l_decomp = spectrum(_op(40, 0.8, seed=4))
    h = _op(40, 0.3, seed=5).matrix
    reg = strong_rate_matrix(l_decomp, h, 3.0).matrix.copy()
    unreg = strong_rate_matrix(l_decomp, h, 3.0, regularized=False).matrix.copy()
    np.fill_diagonal(reg, 0.0)
    np.fill_diagonal(unreg, 0.0)
    assert np.all(reg <= unreg + 1e-15)


@pytest.mark.slow
def test_strong_gap_approaches_two_over_gamma():
    gamma = 10.0
    rm = strong_rate_matrix(spectrum(_op(2000, 0.0, seed=6)),
                            _op(2000, 0.0, seed=7), gamma)
    gap, _ = rate_gap(rm, want_vector=False)
    assert gap == pytest.approx(2.0 / gamma, rel=0.10)


# ------------------------------------------------------------ localized limit

def test_localized_limit_examples():
    rm = localized_limit_a0(np.diag([1.0, -2.0, 0.5]), 2.0)
    assert np.max(np.abs(rm.matrix)) == 0.0
    c = 0.7
    rm = localized_limit_a0(np.array([[0.0, c], [c, 0.0]]), 2.0)
    assert rm.matrix[0, 1] == pytest.approx(2.0 * c * c)
    assert rm.matrix[0, 0] == pytest.approx(-2.0 * c * c)


def test_localized_limit_similar_to_weak_with_permutation_basis():
    # H eigenvectors forming a permutation matrix leave the spectrum of A0
    from prbmlab.ensembles import SpectralDecomposition
    n = 20
    l0 = _op(n, 0.9, seed=8)
    rng = np.random.default_rng(0)
    perm = np.eye(n)[rng.permutation(n)]
    decomp = SpectralDecomposition(np.sort(rng.standard_normal(n)), perm.T)
    a_weak = weak_rate_matrix(decomp, l0, 1.3).matrix
    a_loc = localized_limit_a0(l0, 1.3).matrix
    w1 = np.sort(np.linalg.eigvalsh(a_weak))
    w2 = np.sort(np.linalg.eigvalsh(a_loc))
    assert np.max(np.abs(w1 - w2)) < 1e-10


# ------------------------------------------------- mean field and closed forms

def test_mean_field_alpha_zero_entries():
    n, gamma = 16, 0.8
    rm = mean_field_a0(n, 0.0, gamma)
    off = rm.matrix[0, 1]
    assert off == pytest.approx(gamma / (2 * n), rel=1e-12)
    assert np.max(np.abs(rm.matrix.sum(axis=1))) == 0.0


def test_circulant_closed_form_matches_dense():
    for alpha in (0.0, 0.5, 1.0, 2.0):
        lam, cos_m, sin_m = circulant_mean_field_eigs(101, alpha, 0.2)
        rm = mean_field_a0(101, alpha, 0.2, PERIODIC)
        dense = np.linalg.eigvalsh(rm.matrix)
        # closed form: every nonzero level twice, plus the zero mode
        expect = np.sort(np.concatenate([[lam[0]], np.repeat(lam[1:], 2)]))
        assert np.max(np.abs(np.sort(dense) - expect)) < 1e-10
        # eigenvector check on the first harmonic pair
        a = rm.matrix
        for vec in (cos_m[:, 1], sin_m[:, 0]):
            assert np.max(np.abs(a @ vec - lam[1] * vec)) < 1e-10


def test_circulant_requires_odd_n():
    with pytest.raises(ValueError):
        circulant_mean_field_eigs(100, 1.0, 0.2)


def test_circulant_zero_mode_and_degenerate_alpha0():
    lam, cos_m, _ = circulant_mean_field_eigs(101, 0.0, 0.6)
    assert lam[0] == 0.0
    assert np.allclose(cos_m[:, 0], 1.0 / np.sqrt(101))
    assert np.max(np.abs(lam[1:] + 0.3)) < 1e-10     # all at -gamma/2


def test_asymptotic_gap_branches():
    gamma = 0.4
    # alpha_L -> 0: gap -> gamma/2
    assert asymptotic_gap(0.0, gamma, 10 ** 9) == pytest.approx(gamma / 2, rel=1e-6)
    # diffusive branch carries the stated N^-2 coefficient
    import mpmath
    alpha = 2.0
    n = 3000
    coeff = gamma * np.pi ** 2 / ((2 * alpha - 3) * (1 + float(mpmath.zeta(2 * alpha))))
    assert asymptotic_gap(alpha, gamma, n) == pytest.approx(coeff / n ** 2, rel=1e-12)
    with pytest.raises(ValueError):
        asymptotic_gap(0.5, gamma, 100)
    with pytest.raises(ValueError):
        asymptotic_gap(1.5, gamma, 100)


def test_asymptotic_gap_against_finite_circulant():
    gamma = 0.2
    for alpha in (0.25, 1.0):
        n = 10001
        lam, _, _ = circulant_mean_field_eigs(n, alpha, gamma)
        assert asymptotic_gap(alpha, gamma, n) == pytest.approx(-lam[1], rel=0.02)


def test_chebyshev_modes():
    lam, profiles = chebyshev_modes(3, 10.0)
    assert lam[0] == 0.0
    assert lam[1] == pytest.approx(-0.2)
    x = np.linspace(-1.2, 1.2, 7)
    assert np.allclose(profiles[0](x), 1.0)
    assert np.allclose(profiles[1](x), 2.0 * x / np.sqrt(2.0))


# -------------------------------------------------------------- tail estimate

def test_tail_estimate_equally_spaced_closed_form():
    from prbmlab.ensembles import SpectralDecomposition
    n = 64
    kappa = np.arange(1, n + 1) / n
    decomp = SpectralDecomposition(kappa, np.eye(n))
    est, s, filtered = tail_gap_estimate(decomp, 2.0)
    closed = n * np.sum(1.0 / np.arange(1.0, n) ** 2)
    assert s == pytest.approx(closed, abs=1e-12 * closed)
    assert est == pytest.approx(s, rel=1e-12)   # gamma = 2 makes 2/gamma = 1
    assert filtered == (s > 2.0)


@pytest.mark.slow
def test_filtered_s_scales_like_inverse_log():
    gamma = 10.0
    products = []
    for n, reps in ((400, 12), (1600, 6), (6400, 3)):
        vals = []
        for k in range(reps):
            decomp = spectrum(_op(n, 3.0, seed=300 + k))
            _, s, filtered = tail_gap_estimate(decomp, gamma)
            if not filtered:
                vals.append(s)
        products.append(np.mean(vals) * np.log(n))
    assert max(products) / min(products) < 1.35


# ------------------------------------------------------------- multi channel

def test_multi_channel_single_reduces_to_weak():
    h = _op(14, 0.3, seed=9).matrix
    l_mat = _op(14, 0.8, seed=10).matrix
    model = LindbladModel(h, [(l_mat, 0.9)])
    a1 = multi_channel_rate_matrix(model, WEAK).matrix
    a2 = weak_rate_matrix(spectrum(h), l_mat, 0.9).matrix
    assert np.max(np.abs(a1 - a2)) < 1e-14


def test_multi_channel_additivity():
    h = _op(14, 0.3, seed=11).matrix
    l_mat = _op(14, 0.8, seed=12).matrix
    split = LindbladModel(h, [(l_mat, 0.45), (l_mat, 0.45)])
    joined = LindbladModel(h, [(l_mat, 0.9)])
    a1 = multi_channel_rate_matrix(split, WEAK).matrix
    a2 = multi_channel_rate_matrix(joined, WEAK).matrix
    assert np.max(np.abs(a1 - a2)) < 1e-14


def test_multi_channel_empty_raises():
    h = _op(6, 0.0, seed=13).matrix
    model = LindbladModel(h, [(h * 0.0, 1.0)])
    model.channels = []
    with pytest.raises(ValueError):
        multi_channel_rate_matrix(model, WEAK)


@pytest.mark.slow
def test_dominant_channel_mode_concentrates_on_tail_population():
    # two channels, gamma_1 >> gamma_2: slowest mode pins to the extremal
    # population of channel 1 (IPR in the L1 basis above 0.3 at N=1600)
    iprs = []
    for r in range(3):
        h = _op(1600, 0.0, seed=100 + r).matrix
        l1 = _op(1600, 0.8, seed=200 + r).matrix
        l2 = _op(1600, 0.8, seed=300 + r).matrix
        model = LindbladModel(h, [(l1, 10.0), (l2, 1.0)])
        rm = multi_channel_rate_matrix(model, "strong-about-channel-1")
        _, vec = rate_gap(rm)
        iprs.append(float(np.sum(vec ** 4)))
    assert np.mean(iprs) > 0.3


# ------------------------------------------------------------------ rate gap

def test_rate_gap_two_state_exchange():
    from prbmlab.rate_matrices import RateMatrix
    r = 0.37
    rm = RateMatrix(np.array([[-r, r], [r, -r]]), WEAK, np.arange(2.0), 1.0)
    gap, vec = rate_gap(rm)
    assert gap == pytest.approx(2 * r, rel=1e-12)
    assert np.allclose(np.abs(vec), 1.0 / np.sqrt(2.0))


def test_rate_gap_matches_circulant_closed_form():
    lam, _, _ = circulant_mean_field_eigs(101, 1.0, 0.2)
    rm = mean_field_a0(101, 1.0, 0.2, PERIODIC)
    gap, _ = rate_gap(rm)
    assert gap == pytest.approx(-lam[1], rel=1e-10)


def test_rate_gap_iterative_path_matches_dense():
    rm = mean_field_a0(600, 1.0, 0.5, PERIODIC)
    dense_gap, _ = rate_gap(rm)
    lanczos_gap, vec = rate_gap(rm, dense_limit=100)
    assert lanczos_gap == pytest.approx(dense_gap, rel=1e-8)
    assert vec is not None


def test_weak_gap_tracks_mean_field_for_localized_hamiltonian():
    # alpha_H well inside the localized regime: the gap follows the
    # alpha_L-only mean-field curve
    gaps = []
    for r in range(6):
        h = _op(401, 2.0, seed=500 + r, boundary=PERIODIC)
        l_mat = _op(401, 0.2, seed=600 + r, boundary=PERIODIC)
        rm = weak_rate_matrix(spectrum(h), l_mat, 0.2)
        gaps.append(rate_gap(rm, want_vector=False)[0])
    lam, _, _ = circulant_mean_field_eigs(401, 0.2, 0.2)
    assert np.mean(gaps) == pytest.approx(-lam[1], rel=0.15)


# ------------------------------------------------------------------ structure

def test_structure_of_every_construction_path():
    rng = np.random.default_rng(0)
    checked = 0
    for k in range(250):
        n = int(rng.integers(4, 12))
        gamma = float(rng.uniform(0.1, 10.0))
        h = _op(n, float(rng.uniform(0, 2.5)), seed=10_000 + k)
        l_mat = _op(n, float(rng.uniform(0, 2.5)), seed=20_000 + k)
        mats = [
            weak_rate_matrix(spectrum(h), l_mat, gamma),
            strong_rate_matrix(spectrum(l_mat), h, gamma),
            strong_rate_matrix(spectrum(l_mat), h, gamma, regularized=False),
            localized_limit_a0(l_mat, gamma),
            mean_field_a0(n, float(rng.uniform(0, 2.5)), gamma),
        ]
        for rm in mats:
            validate_rate_matrix(rm)
            w = np.linalg.eigvalsh(rm.matrix)
            assert np.max(w) <= 1e-8 * max(1.0, np.max(np.abs(w)))
            assert np.max(np.abs(rm.matrix - rm.matrix.T)) == 0.0
            checked += 1
    assert checked == 1250


@pytest.mark.slow
def test_localized_weak_diagonal_statistics():
    # single-site eigenvectors, alpha_L = 1:
    # <A_ii> -> -zeta(2) gamma / (2 (1 + zeta(2)))
    import mpmath
    from prbmlab.ensembles import SpectralDecomposition
    gamma, n = 0.2, 2000
    zeta2 = float(mpmath.zeta(2.0))
    target = -zeta2 * gamma / (2.0 * (1.0 + zeta2))
    vals = []
    for k in range(3):
        l0 = _op(n, 1.0, seed=700 + k)
        decomp = SpectralDecomposition(np.arange(float(n)), np.eye(n))
        rm = weak_rate_matrix(decomp, l0, gamma)
        vals.append(np.mean(np.diagonal(rm.matrix)))
    assert np.mean(vals) == pytest.approx(target, rel=0.10)
