"""Effective classical generators for the population dynamics.

In the limits of weak and strong decoherence the slow Lindbladian modes are
captured by an ``N x N`` stochastic generator ``A`` over populations:

* weak noise (H eigenbasis):   ``A_ij = gamma |<i|L|j>|^2`` off diagonal;
* strong noise (L eigenbasis): ``A_mn = (4/gamma) |H_mn|^2 (k_m - k_n)^2 /
  [(k_m - k_n)^4 + (2/gamma)^2 (H_mm - H_nn)^2]`` with an optional
  unregularized variant that drops the second denominator term.

Row sums vanish (probability conservation), off-diagonal entries are
nonnegative, and every construction here is symmetric, so ``-A`` is a
weighted graph Laplacian with spectrum in ``(-inf, 0]``.

Closed forms for the localized / mean-field limits, the circulant
eigenpairs, the asymptotic gap branches, the coarse-grained strong-noise
Chebyshev modes, and the tail-state gap estimator live here too.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import mpmath
from scipy.integrate import quad
from scipy.special import eval_chebyu

from .ensembles import (EnsembleSpec, RandomOperator, SpectralDecomposition,
                        form_factor_matrix, normalization_constant, OPEN)

WEAK = "weak"
STRONG = "strong-regularized"
STRONG_UNREG = "strong-unregularized"
LOCALIZED = "localized-limit"
MEAN_FIELD = "mean-field"

DEFAULT_DENSE_LIMIT = 3200
HARD_DENSE_LIMIT = 12800


@dataclass
class RateMatrix:
    """Classical generator over populations, tagged with its regime."""

    matrix: np.ndarray
    regime: str
    basis_labels: np.ndarray
    gamma: float
    notes: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _as_matrix(op):
    return op.matrix if isinstance(op, RandomOperator) else np.asarray(op, dtype=float)


def _close_rows(m):
    """Set the diagonal from the row-sum constraint."""
    np.fill_diagonal(m, 0.0)
    np.fill_diagonal(m, -m.sum(axis=1))
    return m


def weak_rate_matrix(h_decomp: SpectralDecomposition, jump, gamma: float) -> RateMatrix:
    """Population generator at weak noise, in the Hamiltonian eigenbasis."""
    l_mat = _as_matrix(jump)
    v = h_decomp.eigenvectors
    if l_mat.shape != v.shape:
        raise ValueError("jump operator dimension differs from eigenbasis")
    l_h = v.T @ l_mat @ v
    a = gamma * l_h * l_h
    return RateMatrix(_close_rows(a), WEAK, h_decomp.eigenvalues.copy(), gamma)


def strong_rate_matrix(l_decomp: SpectralDecomposition, hamiltonian, gamma: float,
                       regularized: bool = True) -> RateMatrix:
    """Population generator at strong noise, in the jump-operator eigenbasis.

    The regularized form (default) keeps the Hamiltonian-induced shift of
    the coherence eigenvalues in the denominator.  In the unregularized
    variant an exactly degenerate pair ``k_m = k_n`` would divide by zero;
    such entries are set to 0 and counted in ``notes["singular_entries"]``.
    """
    h_mat = _as_matrix(hamiltonian)
    u = l_decomp.eigenvectors
    if h_mat.shape != u.shape:
        raise ValueError("hamiltonian dimension differs from eigenbasis")
    kappa = l_decomp.eigenvalues
    h_l = u.T @ h_mat @ u
    dk = kappa[:, None] - kappa[None, :]
    num = (4.0 / gamma) * (h_l * h_l) * dk * dk
    notes = {}
    if regularized:
        hd = np.diagonal(h_l)
        den = dk ** 4 + (2.0 / gamma) ** 2 * (hd[:, None] - hd[None, :]) ** 2
        np.fill_diagonal(den, 1.0)
        a = num / den
        regime = STRONG
    else:
        singular = (dk == 0.0)
        np.fill_diagonal(singular, False)
        den = np.where(dk == 0.0, 1.0, dk ** 4)
        a = np.where(singular, 0.0, num / den)
        regime = STRONG_UNREG
        if np.any(singular):
            notes["singular_entries"] = int(np.sum(singular))
    return RateMatrix(_close_rows(a), regime, kappa.copy(), gamma, notes)


def localized_limit_a0(jump, gamma: float) -> RateMatrix:
    """Position-basis generator for perfectly localized Hamiltonian
    eigenstates: ``A0 = -gamma [diag(L0^2) - L0 o L0]``."""
    l0 = _as_matrix(jump)
    a = gamma * l0 * l0
    return RateMatrix(_close_rows(a), LOCALIZED,
                      np.arange(l0.shape[0], dtype=float), gamma)


def mean_field_a0(n: int, alpha_l: float, gamma: float, boundary: str = OPEN) -> RateMatrix:
    """Ensemble average of the localized-limit generator: off-diagonal
    entries ``gamma f_ij^2 / (2 a(N, alpha_L))``."""
    f = form_factor_matrix(EnsembleSpec(n, alpha_l, boundary))
    a = gamma * f * f / (2.0 * normalization_constant(n, alpha_l))
    return RateMatrix(_close_rows(a), MEAN_FIELD, np.arange(n, dtype=float), gamma)


def circulant_mean_field_eigs(n: int, alpha_l: float, gamma: float):
    """Closed-form eigenpairs of the circulant mean-field generator.

    Returns ``(lam, cos_modes, sin_modes)`` where ``lam[k]`` for
    ``k = 0..(N-1)/2`` is

        lam_k = -(2 gamma / a) sum_{j=1}^{(N-1)/2} f_j^2 sin^2(j pi k / N),

    ``cos_modes[:, k]`` are the normalized cosine eigenvectors (constant
    vector at k = 0) and ``sin_modes[:, k-1]`` the sine partners of the
    doubly degenerate ``k >= 1`` levels.  Odd ``N`` only.
    """
    if n % 2 == 0:
        raise ValueError("closed form assumes odd N")
    half = (n - 1) // 2
    j = np.arange(1, half + 1, dtype=float)
    f2 = j ** (-2.0 * alpha_l)          # wrapped distance of j <= (N-1)/2 is j
    const = normalization_constant(n, alpha_l)
    modes = np.arange(half + 1)
    lam = -(2.0 * gamma / const) * np.sum(
        f2[None, :] * np.sin(np.pi * np.outer(modes, j) / n) ** 2, axis=1)
    sites = np.arange(n)
    cos_modes = np.cos(2.0 * np.pi * np.outer(sites, modes) / n) * np.sqrt(2.0 / n)
    cos_modes[:, 0] = 1.0 / np.sqrt(n)
    sin_modes = np.sin(2.0 * np.pi * np.outer(sites, modes[1:]) / n) * np.sqrt(2.0 / n)
    return lam, cos_modes, sin_modes


def _sin2_integral(alpha: float) -> float:
    """``int_0^{1/2} x^{-2 alpha} sin^2(pi x) dx`` by adaptive quadrature.

    The integrand is ``x^{2-2 alpha} (sin(pi x)/x)^2`` with the algebraic
    factor handled by the quadrature weight, so it converges for alpha < 3/2.
    """
    def smooth(x):
        return (np.sin(np.pi * x) / x) ** 2 if x > 0 else np.pi ** 2
    val, _ = quad(smooth, 0.0, 0.5, weight="alg", wvar=(2.0 - 2.0 * alpha, 0.0),
                  limit=200)
    return float(val)


def asymptotic_gap(alpha_l: float, gamma: float, n: int) -> float:
    """Large-N mean-field gap, by branch of alpha_L.

    * ``alpha_L < 1/2``: tends to a constant (with the leading finite-size
      correction included);
    * ``1/2 < alpha_L < 3/2``: decays as ``N^(1 - 2 alpha_L)``;
    * ``alpha_L > 3/2``: diffusive ``N^-2`` decay.

    The hypergeometric prefactor of the first two branches is evaluated by
    quadrature of the defining sine integral.  The branch points 1/2 and
    3/2 are refused.
    """
    if alpha_l in (0.5, 1.5):
        raise ValueError(f"alpha_L = {alpha_l} is a branch point of the formula")
    if alpha_l < 0:
        raise ValueError("alpha_L must be >= 0")
    zeta = float(mpmath.zeta(2.0 * alpha_l)) if alpha_l > 0 else -0.5
    if alpha_l < 0.5:
        integral = _sin2_integral(alpha_l)
        lead = gamma * (1.0 - 2.0 * alpha_l) * 2.0 ** (1.0 - 2.0 * alpha_l) * integral
        corr = 1.0 - (1.0 - 2.0 * alpha_l) * (1.0 + zeta) * (2.0 / n) ** (1.0 - 2.0 * alpha_l)
        return lead * corr
    if alpha_l < 1.5:
        integral = _sin2_integral(alpha_l)
        return gamma * integral * n ** (1.0 - 2.0 * alpha_l) / (1.0 + zeta)
    return gamma * np.pi ** 2 / ((2.0 * alpha_l - 3.0) * (1.0 + zeta)) / n ** 2


def chebyshev_modes(n_max: int, gamma: float):
    """Continuum eigenpairs of the coarse-grained strong-noise generator:
    ``lam_n = -2n/gamma`` with Chebyshev-U mode profiles ``U_n(kappa/sqrt(2))``.

    Returns ``(lam, profiles)`` with ``profiles[n]`` a callable in kappa.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    lam = -2.0 * np.arange(n_max + 1) / gamma

    def make(n):
        def profile(kappa):
            return eval_chebyu(n, np.asarray(kappa) / np.sqrt(2.0))
        return profile

    return lam, [make(n) for n in range(n_max + 1)]


def tail_gap_estimate(l_decomp: SpectralDecomposition, gamma: float,
                      filter_threshold: float = 2.0):
    """Tail-state gap estimate from inverse-square level spacings.

    ``S`` is the smaller of ``(1/N) sum_i (kappa_i - kappa_ext)^-2`` over
    the two spectral edges; the estimated decay rate of the extremal
    population is ``(2/gamma) S``.  Samples with ``S`` above the threshold
    (rare near-degenerate edges) are flagged for filtering.
    """
    kappa = np.sort(l_decomp.eigenvalues)
    n = len(kappa)
    s_low = float(np.sum((kappa[1:] - kappa[0]) ** -2.0)) / n
    s_high = float(np.sum((kappa[:-1] - kappa[-1]) ** -2.0)) / n
    s = min(s_low, s_high)
    return (2.0 / gamma) * s, s, s > filter_threshold


def multi_channel_rate_matrix(model, regime: str = WEAK) -> RateMatrix:
    """Population generator for several jump channels.

    ``regime="weak"``: channel contributions add in the Hamiltonian
    eigenbasis.  ``regime="strong-about-channel-1"``: channel 1 dominates;
    its eigenbasis hosts the Hamiltonian-induced regularized rates plus
    weak-form contributions of the remaining channels.
    """
    if not model.channels:
        raise ValueError("model has no decoherence channels")
    if regime == WEAK:
        h_decomp = _eigh_decomp(model.hamiltonian)
        total = np.zeros_like(model.hamiltonian)
        gtot = 0.0
        for op, g in model.channels:
            total += weak_rate_matrix(h_decomp, op, g).matrix
            gtot += g
        return RateMatrix(total, WEAK, h_decomp.eigenvalues.copy(), gtot,
                          {"channels": len(model.channels)})
    if regime == "strong-about-channel-1":
        op1, g1 = model.channels[0]
        l_decomp = _eigh_decomp(op1)
        out = strong_rate_matrix(l_decomp, model.hamiltonian, g1)
        for op, g in model.channels[1:]:
            out.matrix += weak_rate_matrix(l_decomp, op, g).matrix
        out.notes["channels"] = len(model.channels)
        return out
    raise ValueError(f"unknown regime {regime!r}")


def _eigh_decomp(m):
    vals, vecs = np.linalg.eigh(m)
    return SpectralDecomposition(vals, vecs)


def rate_gap(rm: RateMatrix, zero_tol: float = 1e-8,
             dense_limit: int = DEFAULT_DENSE_LIMIT, want_vector: bool = True):
    """Spectral gap of a rate matrix and its slowest population vector.

    The steady state is the algebraically largest eigenvalue (the spectrum
    is nonpositive); the gap is the next one up, skipping numerically-zero
    copies.  The skip threshold scales with the spectral radius because the
    unregularized strong form can reach enormous entries, drowning absolute
    tolerances in round-off.  Dense symmetric diagonalization up to
    ``dense_limit`` (raise it explicitly for the big sweeps, hard cap
    12800); larger sizes fall back to Lanczos at the upper spectral edge.
    Returns ``(gap, vector)``; ``vector`` is None if not requested.
    """
    a = rm.matrix
    n = a.shape[0]
    if n > HARD_DENSE_LIMIT:
        raise ValueError(f"size {n} exceeds the hard limit {HARD_DENSE_LIMIT}")
    symmetric = np.max(np.abs(a - a.T)) <= 1e-10 * max(1.0, np.max(np.abs(a)))
    if n <= dense_limit:
        if symmetric:
            if want_vector:
                w, v = np.linalg.eigh(a)
            else:
                w, v = np.linalg.eigvalsh(a), None
        else:
            wc, vc = np.linalg.eig(a)
            order = np.argsort(np.real(wc))
            w, v = np.real(wc[order]), np.real(vc[:, order])
    else:
        from scipy.sparse.linalg import eigsh
        w, v = eigsh(a, k=min(8, n - 2), which="LA")
        if not want_vector:
            v = None
    radius = float(np.max(np.abs(w)))
    skip = max(zero_tol, 16.0 * np.finfo(float).eps * radius)
    # w ascending; w[-1] is the steady state
    k = len(w) - 2
    while k > 0 and abs(w[k]) <= skip:
        k -= 1
    gap = float(abs(w[k]))
    vec = None
    if want_vector and v is not None:
        vec = np.real(v[:, k])
        vec = vec / np.linalg.norm(vec)
    return gap, vec


def validate_rate_matrix(rm: RateMatrix, tol: float = 1e-10):
    """Raise unless row sums vanish and the sign structure holds."""
    a = rm.matrix
    n = a.shape[0]
    rowsum = np.max(np.abs(a.sum(axis=1)))
    if rowsum > tol * n * max(1.0, np.max(np.abs(a))):
        raise ValueError(f"row sums do not vanish (max {rowsum})")
    off = a - np.diag(np.diagonal(a))
    if np.min(off) < -tol:
        raise ValueError("negative off-diagonal entry")
    if np.max(np.diagonal(a)) > tol:
        raise ValueError("positive diagonal entry")
