"""Time evolution of density matrices and site-resolved relaxation fits.

Three propagation backends, all trace preserving to round-off:

* eigen-expansion of the dense superoperator (exact, default up to the
  dense size limit);
* an exponential Runge-Kutta integrator for single-channel models, working
  in the jump-operator eigenbasis where the dissipator is an elementwise
  decay (the stiff part is integrated exactly, so the step size is set by
  the Hamiltonian scale alone);
* adaptive RK45 on the matrix-free generator as the general fallback.

The relaxation protocol evolves the "hole" initial state (one site
emptied), tracks ``r_ii(t) = |rho_ii - 1/N|`` and fits exponential decay
rates over late-time windows measured in units of the inverse gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .lindblad import (LindbladModel, apply_superoperator, build_real_superoperator,
                       coords_from_hermitian, matrix_from_coords,
                       DEFAULT_DENSE_LIMIT)

RELAXED_FLOOR = 1e-13
DEFAULT_WINDOWS = ((3.0, 6.0), (6.0, 9.0), (9.0, 12.0))


class RelaxedSiteError(ValueError):
    """Raised when r_ii has decayed below the fit floor on the window."""


@dataclass
class Trajectory:
    """Site populations rho_ii(t) along one evolution."""

    times: np.ndarray
    site_populations: np.ndarray      # shape (T, N)
    model: LindbladModel
    gap: Optional[float] = None       # scale for windows in 1/Delta units
    method: str = "auto"
    states: Optional[list] = None     # full rho(t), kept on request

    @property
    def times_gap_units(self):
        if self.gap is None:
            raise ValueError("trajectory has no gap attached")
        return self.times * self.gap


def initial_state_hole(n: int) -> np.ndarray:
    """Diagonal state with site 1 emptied: rho_11 = 0, rho_ii = 1/(N-1)."""
    if n < 2:
        raise ValueError("need at least 2 sites")
    rho = np.zeros((n, n), dtype=complex)
    rho[np.diag_indices(n)] = 1.0 / (n - 1)
    rho[0, 0] = 0.0
    return rho


# -- phi functions for the exponential integrator ---------------------------

def _phis(x):
    """phi_1..3 for real nonpositive x, series below the cancellation cutoff."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.5
    xs = np.where(small, x, 1.0)
    # Horner evaluation of sum_k x^k / (k + j)! up to k = 13
    phi_small = []
    for j in (1, 2, 3):
        acc = np.zeros_like(xs)
        for k in range(13, -1, -1):
            acc = acc * xs + 1.0 / math.factorial(k + j)
        phi_small.append(acc)
    xl = np.where(small, 1.0, x)
    ex = np.exp(xl)
    p1 = (ex - 1.0) / xl
    p2 = (ex - 1.0 - xl) / xl ** 2
    p3 = (ex - 1.0 - xl - 0.5 * xl ** 2) / xl ** 3
    return (np.where(small, phi_small[0], p1),
            np.where(small, phi_small[1], p2),
            np.where(small, phi_small[2], p3))


class _EtdStepper:
    """Fourth-order exponential Runge-Kutta step for a single channel.

    State lives in the jump-operator eigenbasis; the dissipator is the
    elementwise decay ``d = -(gamma/2)(kappa_mu - kappa_nu)^2`` and the
    nonstiff part is the Hamiltonian commutator.
    """

    def __init__(self, model):
        op, g = model.channels[0]
        kappa, u = np.linalg.eigh(op)
        self.u = u
        self.h_l = u.T @ model.hamiltonian @ u
        self.decay = -0.5 * g * (kappa[:, None] - kappa[None, :]) ** 2
        self._coeff_step = None

    def to_native(self, rho):
        return self.u.T @ rho @ self.u

    def from_native(self, rho):
        return self.u @ rho @ self.u.T

    def _coeffs(self, h):
        if self._coeff_step == h:
            return self._cache
        x = h * self.decay
        e_full = np.exp(x)
        e_half = np.exp(0.5 * x)
        p1_half = _phis(0.5 * x)[0]
        p1, p2, p3 = _phis(x)
        self._cache = (e_full, e_half, 0.5 * h * p1_half,
                       h * (p1 - 3.0 * p2 + 4.0 * p3),
                       h * (p2 - 2.0 * p3),
                       h * (4.0 * p3 - p2))
        self._coeff_step = h
        return self._cache

    def _f(self, rho):
        return -1j * (self.h_l @ rho - rho @ self.h_l)

    def step(self, rho, h):
        e_full, e_half, q, f1, f2, f3 = self._coeffs(h)
        fu = self._f(rho)
        a = e_half * rho + q * fu
        fa = self._f(a)
        b = e_half * rho + q * fa
        fb = self._f(b)
        c = e_half * a + q * (2.0 * fb - fu)
        fc = self._f(c)
        return e_full * rho + f1 * fu + f2 * (fa + fb) + f3 * fc


def _evolve_etd(model, rho0, times, tol):
    stepper = _EtdStepper(model)
    rho = stepper.to_native(np.asarray(rho0, dtype=complex))
    out = [stepper.from_native(rho)]
    h = 0.05
    t = float(times[0])
    for t_next in times[1:]:
        while t < t_next - 1e-12:
            h_try = min(h, t_next - t)
            for _ in range(60):
                full = stepper.step(rho, h_try)
                half = stepper.step(stepper.step(rho, 0.5 * h_try), 0.5 * h_try)
                err = np.linalg.norm(full - half) / 15.0
                budget = 0.5 * tol * h_try
                if err <= budget or h_try < 1e-8:
                    # local Richardson extrapolation: one order beyond the
                    # error estimate
                    rho = half + (half - full) / 15.0
                    t += h_try
                    grow = 0.9 * (budget / max(err, 1e-300)) ** 0.2
                    h = h_try * min(4.0, max(0.2, grow))
                    break
                h_try *= max(0.2, 0.9 * (budget / err) ** 0.2)
            else:
                raise RuntimeError(f"step size collapsed at t={t} (h={h_try})")
        out.append(stepper.from_native(rho))
    return out


def _evolve_rk45(model, rho0, times, tol):
    n = model.dim

    def rhs(_t, y):
        return coords_from_hermitian(
            apply_superoperator(model, matrix_from_coords(y, n)))

    sol = solve_ivp(rhs, (float(times[0]), float(times[-1])),
                    coords_from_hermitian(np.asarray(rho0, dtype=complex)),
                    t_eval=np.asarray(times, dtype=float), method="RK45",
                    rtol=max(tol, 1e-12), atol=tol * 1e-3)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    return [matrix_from_coords(sol.y[:, k], n) for k in range(sol.y.shape[1])]


def _evolve_dense(model, rho0, times, dense_limit):
    n = model.dim
    s = build_real_superoperator(model, dense_limit)
    eigs, vecs = np.linalg.eig(s)
    w = np.linalg.solve(vecs, coords_from_hermitian(np.asarray(rho0, dtype=complex)))
    out = []
    for t in times:
        y = np.real(vecs @ (np.exp(eigs * t) * w))
        out.append(matrix_from_coords(y, n))
    return out


def evolve(model: LindbladModel, rho0: np.ndarray, times,
           method: str = "auto", dense_limit: int = DEFAULT_DENSE_LIMIT,
           gap: Optional[float] = None, tol: float = 1e-8,
           keep_states: bool = False) -> Trajectory:
    """Propagate ``rho0`` over an increasing time grid.

    ``method="auto"`` picks eigen-expansion when the dense representation
    fits (exact long-time behavior), the exponential integrator for larger
    single-channel models, and RK45 otherwise.  Local integration error is
    held below ``tol`` per unit time; the trace is preserved to round-off
    by construction.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 2 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("need an increasing time grid starting at t >= 0")
    if abs(np.trace(np.asarray(rho0)) - 1.0) > 1e-8:
        raise ValueError("initial state must have unit trace")
    if method == "auto":
        if model.dim <= dense_limit:
            method = "dense"
        elif len(model.channels) == 1:
            method = "etd"
        else:
            method = "rk45"
    if method == "dense":
        states = _evolve_dense(model, rho0, times, dense_limit)
    elif method == "etd":
        states = _evolve_etd(model, rho0, times, tol)
    elif method == "rk45":
        states = _evolve_rk45(model, rho0, times, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    pops = np.array([np.real(np.diagonal(rho)) for rho in states])
    return Trajectory(times=times, site_populations=pops, model=model, gap=gap,
                      method=method, states=states if keep_states else None)


@dataclass
class RelaxationFit:
    rate: float           # tau^-1, minus the log-slope of r_ii
    amplitude: float
    residual: float       # rms residual of the log-linear fit
    n_points: int


def fit_relaxation(traj: Trajectory, site: int, window,
                   gap: Optional[float] = None) -> RelaxationFit:
    """Exponential-rate fit of ``r_ii(t) = |rho_ii - 1/N|`` on a window.

    The window is given in units of the inverse gap.  Sites whose signal
    has fallen below the fit floor anywhere on the window raise
    :class:`RelaxedSiteError` (nothing left to fit but round-off).
    """
    delta = gap if gap is not None else traj.gap
    if delta is None or delta <= 0:
        raise ValueError("need a positive gap to scale the window")
    lo, hi = window
    t = traj.times
    mask = (t * delta >= lo - 1e-12) & (t * delta <= hi + 1e-12)
    if np.sum(mask) < 2:
        raise ValueError(f"window {window} contains fewer than 2 samples")
    n = traj.site_populations.shape[1]
    r = np.abs(traj.site_populations[mask, site] - 1.0 / n)
    if np.any(r <= RELAXED_FLOOR):
        raise RelaxedSiteError(
            f"site {site} is below the fit floor {RELAXED_FLOOR} on {window}")
    slope, intercept = np.polyfit(t[mask], np.log(r), 1)
    resid = np.log(r) - (slope * t[mask] + intercept)
    return RelaxationFit(rate=-float(slope), amplitude=float(np.exp(intercept)),
                         residual=float(np.sqrt(np.mean(resid ** 2))),
                         n_points=int(np.sum(mask)))


@dataclass
class RelaxationReport:
    """Per-site, per-window rates plus spatial aggregates."""

    rows: list                        # dicts: site, window, rate, rel_diff, note
    summary: dict                     # window -> (mean rel_diff, std, n_fitted)
    gap: float


def relaxation_report(traj: Trajectory, gap: Optional[float] = None,
                      windows=DEFAULT_WINDOWS) -> RelaxationReport:
    """Fit every site on every window and aggregate the relative rate
    differences ``(tau^-1 - Delta)/Delta`` spatially."""
    delta = gap if gap is not None else traj.gap
    if delta is None or delta <= 0:
        raise ValueError("need a positive gap to scale the windows")
    n = traj.site_populations.shape[1]
    rows = []
    summary = {}
    for window in windows:
        diffs = []
        for site in range(n):
            row = {"site": site, "window": window, "rate": np.nan,
                   "rel_diff": np.nan, "note": ""}
            try:
                fit = fit_relaxation(traj, site, window, gap=delta)
                row["rate"] = fit.rate
                row["rel_diff"] = (fit.rate - delta) / delta
                diffs.append(row["rel_diff"])
            except RelaxedSiteError as err:
                row["note"] = str(err)
            rows.append(row)
        diffs = np.asarray(diffs)
        summary[window] = {
            "mean_rel_diff": float(np.mean(diffs)) if len(diffs) else np.nan,
            "std_rel_diff": float(np.std(diffs)) if len(diffs) else np.nan,
            "n_fitted": int(len(diffs)),
        }
    return RelaxationReport(rows=rows, summary=summary, gap=delta)
