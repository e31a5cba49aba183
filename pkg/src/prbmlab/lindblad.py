"""Lindbladian superoperators: construction and spectral analysis.

The generator acts on density matrices as

    L rho = -i [H, rho] + sum_k gamma_k (L_k rho L_k - {L_k^2, rho}/2)

with real symmetric ``H`` and Hermitian jump operators ``L_k``.  Its
spectrum lives in the closed left half-plane; the steady state is always
the maximally mixed state ``I/N`` and the asymptotic relaxation rate is the
spectral gap ``Delta`` (smallest ``-Re`` over nonzero eigenvalues).

Two spectral backends are provided: a dense solver on the real matrix
representation of the superoperator restricted to Hermitian operators
(``N^2 x N^2``, exact), and a matrix-free deflated subspace iteration for
sizes where the dense representation is out of reach.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

DEFAULT_DENSE_LIMIT = 64
ZERO_TOL = 1e-8


class ConvergenceError(RuntimeError):
    """Iterative eigensolver ran out of budget; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass
class LindbladModel:
    """Hamiltonian plus (jump operator, strength) decoherence channels."""

    hamiltonian: np.ndarray
    channels: list

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=float)
        _check_symmetric(h, "hamiltonian")
        self.hamiltonian = h
        chans = []
        for op, strength in self.channels:
            op = np.asarray(op, dtype=float)
            if op.shape != h.shape:
                raise ValueError("jump operator dimension differs from hamiltonian")
            _check_symmetric(op, "jump operator")
            if strength < 0:
                raise ValueError("channel strength must be >= 0")
            chans.append((op, float(strength)))
        self.channels = chans
        self._jump_squares = None

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def jump_squares(self):
        if self._jump_squares is None:
            self._jump_squares = [op @ op for op, _ in self.channels]
        return self._jump_squares


def _check_symmetric(m, what):
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be square")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > 1e-10 * scale:
        raise ValueError(f"{what} is not symmetric")


@dataclass
class SuperoperatorSpectrum:
    """Eigenvalues (all of them, or a leading subset), the gap, and the
    slowest traceless mode normalized to unit Frobenius norm."""

    eigenvalues: np.ndarray
    gap: float
    slowest_mode: np.ndarray
    method: str
    leading: list = field(default_factory=list)    # (eigenvalue, mode) pairs
    residual: float = 0.0
    modes_coords: Optional[np.ndarray] = None      # dense eigenvectors, coords basis


def apply_superoperator(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """Act with the generator on ``rho`` using O(N^3) matrix products."""
    rho = np.asarray(rho)
    if rho.shape != model.hamiltonian.shape:
        raise ValueError("state dimension differs from model dimension")
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for (op, g), opsq in zip(model.channels, model.jump_squares):
        out = out + g * (op @ rho @ op - 0.5 * (opsq @ rho + rho @ opsq))
    return out


def build_dense_superoperator(model: LindbladModel,
                              dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    """Column-stacking matrix S with ``S vec(rho) = vec(L rho)``."""
    n = model.dim
    if n > dense_limit:
        raise ValueError(f"size {n} exceeds dense limit {dense_limit}")
    eye = np.eye(n)
    h = model.hamiltonian
    s = -1j * (np.kron(eye, h) - np.kron(h, eye)).astype(complex)
    for (op, g), opsq in zip(model.channels, model.jump_squares):
        s += g * (np.kron(op, op) - 0.5 * (np.kron(eye, opsq) + np.kron(opsq, eye)))
    return s


# -- real coordinates on the space of Hermitian matrices ------------------
#
# Orthonormal basis (Frobenius): E_ii, (E_ij + E_ji)/sqrt(2) and
# i(E_ij - E_ji)/sqrt(2) for i<j.  Coordinates of Hermitian rho are
# (diag, sqrt(2) Re upper, sqrt(2) Im upper); complex coordinate vectors
# describe general (non-Hermitian) matrices.

def _triu(n):
    return np.triu_indices(n, 1)


def coords_from_hermitian(rho: np.ndarray) -> np.ndarray:
    n = rho.shape[0]
    iu = _triu(n)
    up = rho[iu]
    return np.concatenate([np.real(np.diagonal(rho)),
                           np.sqrt(2.0) * np.real(up),
                           np.sqrt(2.0) * np.imag(up)])

def matrix_from_coords(c: np.ndarray, n: int) -> np.ndarray:
    c = np.asarray(c)
    iu = _triu(n)
    m = n * (n - 1) // 2
    rho = np.zeros((n, n), dtype=complex)
    rho[np.diag_indices(n)] = c[:n]
    rho[iu] = (c[n:n + m] + 1j * c[n + m:]) / np.sqrt(2.0)
    rho[(iu[1], iu[0])] = (c[n:n + m] - 1j * c[n + m:]) / np.sqrt(2.0)
    return rho


def build_real_superoperator(model: LindbladModel,
                             dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    """Real N^2 x N^2 matrix of the generator in the Hermitian-basis
    coordinates; its eigenvalues are exactly the superoperator spectrum."""
    n = model.dim
    if n > dense_limit:
        raise ValueError(f"size {n} exceeds dense limit {dense_limit}")
    dim = n * n
    s = np.empty((dim, dim))
    c = np.zeros(dim)
    for k in range(dim):
        c[k] = 1.0
        s[:, k] = coords_from_hermitian(apply_superoperator(model, matrix_from_coords(c, n)))
        c[k] = 0.0
    return s


def pairing_defect(eigenvalues: np.ndarray) -> float:
    """Max distance from any eigenvalue's conjugate to the spectrum.

    Zero (to solver accuracy) iff the multiset is closed under complex
    conjugation.  Exact nearest-neighbor search, chunked to keep the
    pairwise distance block small.
    """
    w = np.asarray(eigenvalues)
    targets = np.conj(w)
    worst = 0.0
    for lo in range(0, len(w), 512):
        block = targets[lo:lo + 512]
        dist = np.abs(block[:, None] - w[None, :]).min(axis=1)
        worst = max(worst, float(dist.max()))
    return worst


def _trace_deflate(rho):
    n = rho.shape[0]
    tr = np.trace(rho) / n
    if abs(tr) > 0:
        rho = rho - tr * np.eye(n)
    return rho


def _normalize_mode(rho):
    rho = _trace_deflate(rho)
    nrm = np.linalg.norm(rho)
    if nrm == 0:
        raise ValueError("mode collapsed to zero")
    rho = rho / nrm
    # fix the sign/phase convention: largest-magnitude diagonal entry positive
    d = np.diagonal(rho)
    k = int(np.argmax(np.abs(d)))
    if abs(d[k]) > 1e-14:
        ph = d[k] / abs(d[k])
        rho = rho / ph
    return rho


def _mode_residual(model, rho, lam):
    return float(np.linalg.norm(apply_superoperator(model, rho) - lam * rho))


def _inverse_iteration(s, lam, n, seed=7, sweeps=8):
    """Eigenvector of the real-representation matrix for eigenvalue lam."""
    dim = s.shape[0]
    real_mode = abs(np.imag(lam)) < 1e-10
    shift = np.real(lam) if real_mode else lam
    m = s.astype(complex) if not real_mode else s.copy()
    m[np.diag_indices(dim)] -= shift
    # tiny diagonal nudge keeps the factorization usable when the shift is
    # an exact eigenvalue
    m[np.diag_indices(dim)] += 1e-12 * max(1.0, abs(shift))
    lu = scipy.linalg.lu_factor(m, check_finite=False)
    rng = np.random.Generator(np.random.Philox(np.uint64(seed)))
    v = rng.standard_normal(dim)
    if not real_mode:
        v = v + 1j * rng.standard_normal(dim)
    tracedir = np.zeros(dim)
    tracedir[:n] = 1.0 / np.sqrt(n)
    for _ in range(sweeps):
        v = scipy.linalg.lu_solve(lu, v, check_finite=False)
        v -= tracedir * (tracedir @ v)
        v /= np.linalg.norm(v)
    return v


def full_spectrum(model: LindbladModel, dense_limit: int = DEFAULT_DENSE_LIMIT,
                  want_modes: bool = False, zero_tol: float = ZERO_TOL) -> SuperoperatorSpectrum:
    """All N^2 eigenvalues by dense diagonalization of the real
    representation, plus the slowest traceless mode.

    ``want_modes=True`` additionally stores every eigenvector (as columns
    of coordinates) for population density-of-states analysis.
    """
    n = model.dim
    s = build_real_superoperator(model, dense_limit)
    modes = None
    if want_modes:
        eigs, modes = np.linalg.eig(s)
    else:
        eigs = np.linalg.eigvals(s)
    nonzero = np.abs(eigs) > zero_tol
    if not np.any(nonzero):
        raise RuntimeError("no nonzero eigenvalues found")
    rates = np.where(nonzero, -np.real(eigs), np.inf)
    k = int(np.argmin(rates))
    gap = float(rates[k])
    lam1 = eigs[k]
    if want_modes:
        v = modes[:, k]
    else:
        v = _inverse_iteration(s, lam1, n)
    mode = _normalize_mode(matrix_from_coords(v, n))
    residual = _mode_residual(model, mode, lam1)
    if residual > 1e-6:
        # fall back on one more inverse-iteration pass with a refined shift
        v = _inverse_iteration(s, lam1, n, seed=11, sweeps=16)
        mode = _normalize_mode(matrix_from_coords(v, n))
        residual = _mode_residual(model, mode, lam1)
    return SuperoperatorSpectrum(eigenvalues=eigs, gap=gap, slowest_mode=mode,
                                 method="dense", leading=[(lam1, mode)],
                                 residual=residual, modes_coords=modes)


# -- matrix-free leading modes ---------------------------------------------

def _shift_bound(model):
    def onenorm(m):
        return float(np.max(np.sum(np.abs(m), axis=0)))
    b = 2.0 * onenorm(model.hamiltonian)
    for op, g in model.channels:
        b += 2.0 * g * onenorm(op) ** 2
    return b


class _ShiftedMap:
    """rho -> rho + tau * L rho with the steady state deflated; the shifted
    spectrum 1 + tau*lambda stays inside the unit disk."""

    def __init__(self, model):
        self.model = model
        self.tau = 0.5 / _shift_bound(model)
        self.advance = self.tau          # pseudo-time gained per apply

    def apply(self, rho):
        return _trace_deflate(rho + self.tau * apply_superoperator(self.model, rho))

    def exact_apply(self, rho):
        return apply_superoperator(self.model, rho)

    def to_native(self, rho):
        return rho

    def from_native(self, rho):
        return rho

    def damping_coords(self):
        return None


class _SplitPropagatorMap:
    """Strang-split propagator of the semigroup ``exp(h L)``.

    Each dissipation channel is an elementwise decay
    ``-(gamma/2)(kappa_mu - kappa_nu)^2`` in its own eigenbasis and the
    Hamiltonian step is an exact unitary, so one application advances the
    true semigroup by a full step ``h`` at O(h^3) local splitting error --
    there is no stability limit from the fast decay rates.  Single-channel
    models run natively in the jump eigenbasis (two matrix products per
    application); the exact generator used for Rayleigh-Ritz is unsplit.
    """

    def __init__(self, model, step=0.25):
        self.model = model
        self.single = len(model.channels) == 1
        if self.single:
            op, g = model.channels[0]
            kappa, u = np.linalg.eigh(op)
            self.u = u
            self.h_work = u.T @ model.hamiltonian @ u
            self.decays = [0.5 * g * (kappa[:, None] - kappa[None, :]) ** 2]
            self.rotations = [None]
        else:
            self.u = None
            self.h_work = model.hamiltonian
            self.decays = []
            self.rotations = []
            for op, g in model.channels:
                kappa, v = np.linalg.eigh(op)
                self.decays.append(0.5 * g * (kappa[:, None] - kappa[None, :]) ** 2)
                self.rotations.append(v)
        self.eps, self.q = np.linalg.eigh(self.h_work)
        self._build(step)

    def _build(self, h):
        self.step = h
        self.advance = h
        self.half_decays = [np.exp(-0.5 * h * d) for d in self.decays]
        self.unitary = (self.q * np.exp(-1j * h * self.eps)) @ self.q.T

    def _half_dissipator(self, rho, reverse=False):
        order = range(len(self.decays))
        if reverse:
            order = reversed(list(order))
        for k in order:
            v = self.rotations[k]
            if v is None:
                rho = self.half_decays[k] * rho
            else:
                rho = v @ (self.half_decays[k] * (v.T @ rho @ v)) @ v.T
        return rho

    def apply(self, rho):
        rho = self._half_dissipator(rho)
        rho = self.unitary @ rho @ self.unitary.conj().T
        rho = self._half_dissipator(rho, reverse=True)
        return _trace_deflate(rho)

    def exact_apply(self, rho):
        if self.single:
            return (-1j * (self.h_work @ rho - rho @ self.h_work)
                    - self.decays[0] * rho)
        return apply_superoperator(self.model, rho)

    def to_native(self, rho):
        return self.u.T @ rho @ self.u if self.single else rho

    def from_native(self, rho):
        return self.u @ rho @ self.u.T if self.single else rho

    def damping_coords(self):
        # Jacobi-Davidson style diagonal: in this basis the dissipator is
        # the elementwise multiplier -decay, which carries straight over to
        # the Hermitian coordinates (decay is symmetric).  Damping residual
        # expansions by roughly (decay + coupling scale) tames the fast
        # components that carry the splitting bias of the propagator.
        if not self.single:
            return None
        d = self.decays[0]
        n = d.shape[0]
        iu = _triu(n)
        return np.concatenate([np.diagonal(d), d[iu], d[iu]])

    def coupling_scale(self):
        # spread of the Hamiltonian spectrum: the scale at which the
        # commutator couples populations to coherences.  Flooring the
        # preconditioner denominator here keeps the zero-damping
        # (population) components from being amplified into the subspace.
        return float(np.std(self.eps))


class _RitzWorkspace:
    """Real search subspace with cached exact-generator images.

    Columns are coordinate vectors (native basis); ``images`` holds the
    generator applied to each column, so Rayleigh-Ritz projections and
    subspace compressions never recompute an application.
    """

    def __init__(self, mp, n):
        self.mp = mp
        self.n = n
        self.v = np.empty((n * n, 0))
        self.w = np.empty((n * n, 0))

    @property
    def size(self):
        return self.v.shape[1]

    def add(self, coords_cols):
        """Orthonormalize new columns against the basis and append them."""
        added = 0
        for col in np.atleast_2d(coords_cols.T):
            col = col.copy()
            for _ in range(2):                       # reorthogonalization
                if self.size:
                    col -= self.v @ (self.v.T @ col)
            nrm = np.linalg.norm(col)
            if nrm < 1e-10:
                continue
            col /= nrm
            img = coords_from_hermitian(
                self.mp.exact_apply(matrix_from_coords(col, self.n)))
            self.v = np.column_stack([self.v, col])
            self.w = np.column_stack([self.w, img])
            added += 1
        return added

    def ritz(self):
        t = self.v.T @ self.w
        theta, c = np.linalg.eig(t)
        return theta, c

    def compress(self, keep_coeffs):
        """Restrict the subspace to real combinations of its columns."""
        q, _ = np.linalg.qr(keep_coeffs)
        self.v = self.v @ q
        self.w = self.w @ q


def _slowest_ritz(theta, count, zero_tol):
    order = np.argsort(-np.real(theta))
    out = []
    for k in order:
        if abs(theta[k]) <= zero_tol:
            continue
        out.append(k)
        if len(out) >= count:
            break
    return out


def leading_modes(model: LindbladModel, count: int = 2, tol: float = 1e-8,
                  method: str = "auto", block: Optional[int] = None,
                  seed: int = 1234, max_applies: int = 100000,
                  zero_tol: float = ZERO_TOL) -> SuperoperatorSpectrum:
    """Leading (slowest-decaying) eigenpairs, matrix free.

    Stage one iterates a trace-deflated contraction map -- the split
    propagator by default, or the shifted map ``rho + tau L rho`` with
    ``method="shifted"`` -- to filter the fast directions out of a small
    block.  Stage two does
    Rayleigh-Ritz with the exact generator, expanding the subspace with the
    residual vectors until the ``count`` slowest Ritz pairs all satisfy
    ``|L rho - lambda rho|_F <= tol``.  Complex conjugate leading pairs are
    returned together; non-convergence raises :class:`ConvergenceError`
    carrying the last residual.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    n = model.dim
    if method == "auto":
        method = "split"
    mp = _SplitPropagatorMap(model) if method == "split" else _ShiftedMap(model)

    b = block or max(4, count + 3)
    rng = np.random.Generator(np.random.Philox(np.uint64(seed)))
    dim = n * n
    v = np.linalg.qr(rng.standard_normal((dim, b)))[0]
    vmats = [mp.to_native(_trace_deflate(matrix_from_coords(v[:, i], n)))
             for i in range(b)]

    # stage 1: geometric ramp of map applications between orthonormalizations
    applies = 0
    stage1_budget = max_applies // 3
    sweep_advance = 1.0
    while applies < stage1_budget:
        m = max(1, int(round(sweep_advance / mp.advance)))
        m = min(m, max(1, (stage1_budget - applies) // b))
        for _ in range(m):
            vmats = [mp.apply(x) for x in vmats]
        applies += m * b
        coords = np.column_stack([coords_from_hermitian(x) for x in vmats])
        q = np.linalg.qr(coords)[0]
        vmats = [matrix_from_coords(q[:, i], n) for i in range(b)]
        if sweep_advance >= 256.0 and applies > stage1_budget // 2:
            break
        sweep_advance = min(sweep_advance * 2.0, 256.0)

    # stage 2: target-locked Rayleigh-Ritz with preconditioned residual
    # expansion on the exact generator.  Populations have vanishing
    # Rayleigh quotients here (their decay is second order, through
    # coherences), so orthogonal projections produce spurious slow Ritz
    # values; tracking each mode by overlap with its previous iterate is
    # what keeps the refinement anchored to genuine eigenpairs.
    ws = _RitzWorkspace(mp, n)
    ws.add(np.column_stack([coords_from_hermitian(x) for x in vmats]))
    applies += ws.size
    damping = mp.damping_coords()
    n_track = count + 2
    theta, c = ws.ritz()
    targets = []
    for k in _slowest_ritz(theta, n_track, zero_tol):
        t = ws.v @ np.real(c[:, k])
        nrm = np.linalg.norm(t)
        if nrm > 1e-12:
            targets.append(t / nrm)
    while len(targets) < n_track:
        t = _coords_of_random_traceless(rng, n)
        targets.append(t / np.linalg.norm(t))

    best_worst = np.inf
    while applies < max_applies:
        if ws.size >= max(6 * b, 48):
            _compress_toward(ws, targets, keep=3 * b)
        theta, c = ws.ritz()
        ritz_mat = ws.v @ c
        norms = np.linalg.norm(ritz_mat, axis=0)
        pairs = []
        new_cols = []
        taken = set()
        for t in targets:
            overlap = np.abs(t @ ritz_mat) / norms
            for k in np.argsort(-overlap):
                if k not in taken:
                    break
            taken.add(int(k))
            lam = complex(theta[k])
            coef = np.real(c[:, k]) if abs(lam.imag) < 1e-12 else c[:, k]
            if abs(lam.imag) < 1e-12:
                lam = complex(lam.real)
            vec = ws.v @ coef
            nrm = np.linalg.norm(vec)
            vec = vec / nrm
            resid_vec = (ws.w @ coef) / nrm - lam * vec
            res = float(np.linalg.norm(resid_vec))
            pairs.append((lam, vec, res))
            if res > tol:
                if damping is not None:
                    resid_vec = resid_vec / (damping + max(abs(lam), 1e-12))
                if np.iscomplexobj(resid_vec) and \
                        np.max(np.abs(np.imag(resid_vec))) > 1e-14:
                    new_cols.extend([np.real(resid_vec), np.imag(resid_vec)])
                else:
                    new_cols.append(np.real(resid_vec))
        targets = [np.real(vec) / max(np.linalg.norm(np.real(vec)), 1e-300)
                   for _, vec, _ in pairs]

        converged = _distinct_converged(pairs, tol)
        if len(converged) >= count:
            # guard: adopt any slower converged Ritz pair missed by tracking
            slowest = max(lam.real for lam, _, _ in converged[:count])
            adopted = False
            for k in _slowest_ritz(theta, 3 * n_track, zero_tol):
                if np.real(theta[k]) <= slowest + 1e-14 or k in taken:
                    continue
                lam = complex(theta[k])
                coef = np.real(c[:, k]) if abs(lam.imag) < 1e-12 else c[:, k]
                vec = ws.v @ coef
                nrm = np.linalg.norm(vec)
                res = float(np.linalg.norm((ws.w @ coef) / nrm - lam * vec / nrm))
                if res <= tol:
                    targets.append(np.real(vec) / np.linalg.norm(np.real(vec)))
                    targets = targets[-n_track:]
                    adopted = True
                    break
            if not adopted:
                chosen = converged[:count]
                worst = max(res for _, _, res in chosen)
                leading = []
                for lam, vec, _ in chosen:
                    mode = matrix_from_coords(vec, n)
                    leading.append((lam, _normalize_mode(mp.from_native(mode))))
                leading.sort(key=lambda p: -p[0].real)
                gap = min(-lam.real for lam, _ in leading)
                return SuperoperatorSpectrum(
                    eigenvalues=np.array([lam for lam, _ in leading]),
                    gap=float(gap), slowest_mode=leading[0][1],
                    method="power-iteration", leading=leading, residual=worst)
        best_worst = min(best_worst, max(res for _, _, res in pairs))
        added = ws.add(np.column_stack(new_cols)) if new_cols else 0
        applies += added
        if added == 0:
            extra = _coords_of_random_traceless(rng, n)
            applies += max(1, ws.add(extra[:, None]))

    raise ConvergenceError(
        f"leading modes did not reach residual {tol} within {max_applies} "
        f"applications (best residual {best_worst:.3e})",
        residual=best_worst)


def _distinct_converged(pairs, tol):
    """Converged tracked pairs, slowest first, duplicates collapsed."""
    converged = [p for p in pairs if p[2] <= tol]
    converged.sort(key=lambda p: -p[0].real)
    out = []
    for lam, vec, res in converged:
        dup = any(abs(lam - lam2) < 1e-10 * max(1.0, abs(lam))
                  and abs(np.vdot(vec2, vec)) > 0.99
                  for lam2, vec2, _ in out)
        if not dup:
            out.append((lam, vec, res))
    return out


def _coords_of_random_traceless(rng, n):
    mat = _trace_deflate(matrix_from_coords(rng.standard_normal(n * n), n))
    return coords_from_hermitian(mat)


def _compress_toward(ws, targets, keep):
    """Shrink the workspace to the Ritz directions most aligned with the
    tracked targets, padded with the slowest remaining ones."""
    theta, c = ws.ritz()
    ritz_mat = ws.v @ c
    norms = np.linalg.norm(ritz_mat, axis=0)
    score = np.zeros(len(theta))
    for t in targets:
        score = np.maximum(score, np.abs(t @ ritz_mat) / norms)
    by_score = list(np.argsort(-score)[:keep // 2])
    by_slow = [k for k in np.argsort(-np.real(theta)) if k not in by_score]
    chosen = by_score + by_slow[:keep - len(by_score)]
    cols = []
    for k in chosen:
        if abs(np.imag(theta[k])) < 1e-12:
            cols.append(np.real(c[:, k]))
        else:
            cols.extend([np.real(c[:, k]), np.imag(c[:, k])])
    ws.compress(np.column_stack(cols))
