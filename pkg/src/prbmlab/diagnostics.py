"""Mode characterization: participation ratios, population content, and
finite-size phase classification.

A slowest mode ``rho_1`` (unit Frobenius norm) is profiled by

* its overlap with the population subspace of a chosen eigenbasis,
* the participation ratio of its population components,
* the real-space participation ratio weighted by the basis vectors,

and gap-versus-size series are classified as gapped / hydrodynamic /
Lifshitz by competing fits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ensembles import SpectralDecomposition
from .lindblad import SuperoperatorSpectrum, matrix_from_coords

GAPPED = "gapped"
HYDRODYNAMIC = "hydrodynamic"
LIFSHITZ = "Lifshitz"
INCONCLUSIVE = "inconclusive"


def population_components(rho, basis=None):
    """Diagonal components <i|rho|i> in the given basis (position basis
    when ``basis`` is None)."""
    rho = np.asarray(rho)
    if basis is None:
        return np.diagonal(rho).copy()
    v = basis.eigenvectors
    return np.einsum("ji,jk,ki->i", v, rho, v)




def population_overlap(rho1: np.ndarray, basis: SpectralDecomposition = None) -> float:
    """Fraction of the operator norm living in the populations subspace:
    ``sqrt(sum_i |<i|rho|i>|^2)`` for a unit-Frobenius-norm mode."""
    nrm = np.linalg.norm(rho1)
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"mode norm {nrm} is not 1 within 1e-8")
    d = population_components(rho1, basis)
    return float(np.sqrt(np.sum(np.abs(d) ** 2)))


def ipr_population(rho1: np.ndarray, basis: SpectralDecomposition = None) -> float:
    """Participation ratio of the population components,
    ``sum d_i^4 / (sum d_i^2)^2``."""
    d = np.real(population_components(rho1, basis))
    s2 = float(np.sum(d ** 2))
    if s2 < 1e-24:
        raise ValueError("mode has no population content in this basis")
    return float(np.sum(d ** 4)) / s2 ** 2


def ipr_real_space(rho1: np.ndarray, basis: SpectralDecomposition) -> float:
    """Real-space participation ratio of the projected mode:
    ``sum_i d_i^4 q_i / (sum d_i^2)^2`` with ``q_i`` the position IPR of
    basis vector i."""
    d = np.real(population_components(rho1, basis))
    s2 = float(np.sum(d ** 2))
    if s2 < 1e-24:
        raise ValueError("mode has no population content in this basis")
    q = np.sum(basis.eigenvectors ** 4, axis=0)
    return float(np.sum(d ** 4 * q)) / s2 ** 2


def population_dos(spec: SuperoperatorSpectrum, basis: SpectralDecomposition = None,
                   im_tol: float = 1e-8):
    """Population density of states from a dense spectrum with modes.

    Picks, among eigenmodes with real eigenvalues, the N whose population
    overlap in the given basis is largest, and returns their eigenvalues
    sorted ascending.  Returns fewer than N values (with a note printed by
    callers if they care) when the spectrum has fewer real-eigenvalue modes.
    """
    if spec.modes_coords is None:
        raise ValueError("need a dense spectrum computed with want_modes=True")
    eigs = spec.eigenvalues
    n2 = len(eigs)
    n = int(round(np.sqrt(n2)))
    scale = max(1.0, float(np.max(np.abs(eigs))))
    real_idx = np.where(np.abs(np.imag(eigs)) <= im_tol * scale)[0]
    overlaps = np.empty(len(real_idx))
    for pos, k in enumerate(real_idx):
        mode = matrix_from_coords(np.real(spec.modes_coords[:, k]), n)
        d = population_components(mode, basis)
        overlaps[pos] = np.sum(np.abs(d) ** 2) / np.sum(np.abs(mode) ** 2)
    take = min(n, len(real_idx))
    chosen = real_idx[np.argsort(-overlaps)[:take]]
    return np.sort(np.real(eigs[chosen]))


@dataclass
class PhaseFit:
    """Outcome of the three-way gap-scaling fit."""

    label: str
    parameters: dict
    residuals: dict
    ratio: float = np.inf     # runner-up residual / best residual


def classify_phase(series, beta_min: float = 0.2, prefer_ratio: float = 1.5) -> PhaseFit:
    """Classify a gap-versus-size series as gapped / hydrodynamic / Lifshitz.

    ``series`` holds (N, mean gap, std gap) rows spanning at least four
    sizes and one decade.  Three models are fitted to log(gap): a constant,
    a power law ``c N^-beta`` (eligible when beta > beta_min), and a
    logarithmic ``c / log N``.  The least-residual model wins when it beats
    the runner-up by ``prefer_ratio``, otherwise the series is inconclusive.
    """
    rows = [(float(n), float(g)) for n, g, *_ in series]
    if len(rows) < 4:
        raise ValueError("need at least 4 sizes")
    sizes = np.array([r[0] for r in rows])
    gaps = np.array([r[1] for r in rows])
    if np.max(sizes) / np.min(sizes) < 10.0:
        raise ValueError("sizes must span at least one decade")
    if np.any(gaps <= 0):
        raise ValueError("gaps must be positive")
    logn = np.log(sizes)
    logg = np.log(gaps)

    residuals, params = {}, {}
    const = float(np.mean(logg))
    residuals[GAPPED] = float(np.sum((logg - const) ** 2))
    params[GAPPED] = {"gap_infinity": float(np.exp(const))}

    slope, intercept = np.polyfit(logn, logg, 1)
    beta = -float(slope)
    fit = slope * logn + intercept
    residuals[HYDRODYNAMIC] = float(np.sum((logg - fit) ** 2))
    params[HYDRODYNAMIC] = {"beta": beta, "coefficient": float(np.exp(intercept))}

    logc = float(np.mean(logg + np.log(logn)))
    residuals[LIFSHITZ] = float(np.sum((logg + np.log(logn) - logc) ** 2))
    params[LIFSHITZ] = {"coefficient": float(np.exp(logc))}

    eligible = [GAPPED, LIFSHITZ]
    if beta > beta_min:
        eligible.append(HYDRODYNAMIC)
    eligible.sort(key=lambda lab: residuals[lab])
    best, runner = eligible[0], eligible[1]
    ratio = residuals[runner] / residuals[best] if residuals[best] > 0 else np.inf
    label = best if ratio >= prefer_ratio else INCONCLUSIVE
    return PhaseFit(label, params, residuals, float(ratio))
