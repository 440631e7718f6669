"""Quantum-channel spectra, expander constants and commutant spectral gaps.

The symmetrized channel ``Phi(A) = (1/2d) sum_j (U_j A U_j^* + U_j^* A U_j)``
is HS-self-adjoint, unital and maps Hermitian matrices to Hermitian matrices.
Top eigenvalues on the HS-orthocomplement of a commutant basis are found
matrix-free (Lanczos or power iteration) on the real space of Hermitian
matrices whenever the basis is Hermitian; dense matricizations serve as the
small-n oracle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .haar import RngStream, UnitaryTuple, mix
from .linalg import as_matrix, commutator, gram_schmidt, hs_inner, hs_norm2

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 5000
RESIDUAL_TOL = 1e-7
COMMUTANT_TOL = 1e-10
DENSE_MAX_N = 12
DENSE_SOLVE_DIM = 9  # below this many real dimensions, materialize instead of Lanczos


@dataclass
class ChannelSpectrum:
    lambda2: float
    iterations: int
    residual: float
    restricted_space_dim: int
    converged: bool = True
    lambda_next: float | None = None
    multiplicity_warning: bool = False


@dataclass
class GapReport:
    epsilon: float
    constant_C: float
    lambda2_sym: float
    certified: bool
    d: int
    n: int
    residual: float = 0.0
    iterations: int = 0
    multiplicity_warning: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class DoublingReport:
    eps_sg: float
    eps_qe: float
    discrepancy: float
    lambda_top: float
    max_abs_lambda: float
    d: int
    n: int
    notes: list[str] = field(default_factory=list)


# -- channel maps ---------------------------------------------------------------

def channel_apply(t: UnitaryTuple, A, symmetrized: bool = True) -> np.ndarray:
    A = as_matrix(A)
    if A.shape != (t.n, t.n):
        raise ValueError(f"dimension mismatch: matrix {A.shape} vs tuple size {t.n}")
    return _phi_sym(t.unitaries, A) if symmetrized else _psi(t.unitaries, A) / t.d


def _phi_sym(us, A):
    out = np.zeros_like(A)
    for U in us:
        Uh = U.conj().T
        out += U @ A @ Uh
        out += Uh @ A @ U
    return out / (2 * len(us))


def _psi(us, A):
    out = np.zeros_like(A)
    for U in us:
        out += U @ A @ U.conj().T
    return out


def _psi_adj(us, A):
    out = np.zeros_like(A)
    for U in us:
        out += U.conj().T @ A @ U
    return out


def _tt(us, A):
    """T^*T for T(a) = ([u_1, a], ..., [u_d, a])."""
    return 2 * len(us) * A - 2 * len(us) * _phi_sym(us, A)


# -- restricted top eigenvalue ------------------------------------------------------

def _realify(n):
    def to_mat(x):
        M = x.reshape(n, n)
        return (M + M.T) / 2 + 1j * (M - M.T) / 2

    def to_vec(H):
        return (H.real + H.imag).ravel()

    return to_mat, to_vec


def _complexify(n):
    def to_mat(x):
        return x.reshape(n, n)

    def to_vec(A):
        return A.ravel()

    return to_mat, to_vec


def _is_hermitian(A) -> bool:
    return np.allclose(A, A.conj().T, atol=1e-14, rtol=0)


@dataclass
class _TopEigen:
    value: float
    next_value: float | None
    vector: np.ndarray
    iterations: int
    residual: float
    converged: bool
    restricted_dim: int


def restricted_top_eigen(apply: Callable[[np.ndarray], np.ndarray], n: int,
                         basis: Sequence = (), *, hermitian: bool = True, shift: float = 0.0,
                         tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                         seed: int = 0, method: str = "lanczos") -> _TopEigen:
    """Largest eigenvalue of the HS-self-adjoint map ``apply`` on ``span(basis)^perp``.

    ``shift`` must make the restricted operator nonnegative so that the
    projected-out directions (eigenvalue ``0`` after projection) never win.
    ``hermitian`` restricts to Hermitian matrices; valid when ``apply``
    preserves Hermiticity and the basis is Hermitian.
    """
    Q = gram_schmidt(basis) if len(basis) else []
    if hermitian and not all(_is_hermitian(B) for B in Q):
        hermitian = False
    to_mat, to_vec = _realify(n) if hermitian else _complexify(n)
    dtype = np.float64 if hermitian else np.complex128
    N = n * n
    rdim = N - len(Q)
    if rdim <= 0:
        raise ValueError("restricted space is empty")

    def proj(A):
        for B in Q:
            A = A - hs_inner(B, A) * B
        return A

    calls = [0]

    def matvec(x):
        calls[0] += 1
        A = proj(to_mat(np.asarray(x).ravel()))
        return to_vec(proj(apply(A)) + shift * A)

    rng = RngStream(seed, mix(n, 0x5EED, len(Q))).generator()
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    v0 = to_vec(proj((G + G.conj().T) / 2 if hermitian else G))

    converged = True
    if N < DENSE_SOLVE_DIM or method == "dense":
        M = np.column_stack([matvec(e) for e in np.eye(N, dtype=dtype)])
        w, V = np.linalg.eigh((M + M.conj().T) / 2)
        vals, vec = w[::-1], V[:, -1]
    elif method == "lanczos":
        k = 2 if N >= 4 else 1
        ncv = min(N - 1, 40)
        try:
            w, V = eigsh(LinearOperator((N, N), matvec=matvec, dtype=dtype), k=k, which="LA",
                         tol=tol, maxiter=max_iter, v0=v0, ncv=ncv)
        except ArpackNoConvergence as exc:
            converged = False
            w, V = exc.eigenvalues, exc.eigenvectors
            if len(w) == 0:
                w, V = np.array([np.vdot(v0, matvec(v0)).real / np.vdot(v0, v0).real]), v0[:, None]
        order = np.argsort(w)[::-1]
        vals, vec = np.asarray(w)[order], V[:, order[0]]
    elif method == "power":
        vals, vec, converged = _power_iteration(matvec, v0, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")

    A = proj(to_mat(vec))
    A = A / hs_norm2(A)
    lam = float(vals[0]) - shift
    residual = hs_norm2(proj(apply(A)) - lam * A)
    nxt = float(vals[1]) - shift if len(vals) > 1 and rdim > 1 else None
    return _TopEigen(lam, nxt, A, calls[0], residual, converged, rdim)


def _power_iteration(matvec, x0, tol, max_iter):
    x = x0 / np.linalg.norm(x0)
    lam_old = None
    for _ in range(max_iter):
        y = matvec(x)
        lam = float(np.vdot(x, y).real)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return np.array([0.0]), x, True
        x = y / ny
        if lam_old is not None and abs(lam - lam_old) <= tol * max(abs(lam), 1e-300):
            r = np.linalg.norm(matvec(x) - lam * x)
            if r <= RESIDUAL_TOL:
                return np.array([lam]), x, True
        lam_old = lam
    return np.array([lam_old if lam_old is not None else 0.0]), x, False


def _start_seed(t: UnitaryTuple) -> int:
    return mix(t.seed, t.n, t.d)


# -- public spectra -------------------------------------------------------------------

def lambda2(t: UnitaryTuple, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
            method: str = "lanczos") -> ChannelSpectrum:
    """Second eigenvalue of the symmetrized channel (top eigenvalue off the identity)."""
    if t.n < 2:
        raise ValueError("n must be >= 2: the traceless subspace of M_1 is empty")
    eye = np.eye(t.n, dtype=np.complex128)
    top = restricted_top_eigen(lambda A: _phi_sym(t.unitaries, A), t.n, [eye], shift=1.0,
                               tol=tol, max_iter=max_iter, seed=_start_seed(t), method=method)
    return _spectrum(top, tol)


def _spectrum(top: _TopEigen, tol: float) -> ChannelSpectrum:
    warn = top.next_value is not None and abs(top.value - top.next_value) < 10 * tol
    return ChannelSpectrum(lambda2=top.value, iterations=top.iterations, residual=top.residual,
                           restricted_space_dim=top.restricted_dim,
                           converged=top.converged and top.residual <= RESIDUAL_TOL,
                           lambda_next=top.next_value, multiplicity_warning=warn)


def expander_norm(t: UnitaryTuple, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                  method: str = "lanczos") -> tuple[float, ChannelSpectrum]:
    """Largest singular value of ``A -> sum_j U_j A U_j^*`` on traceless matrices."""
    if t.n < 2:
        raise ValueError("n must be >= 2: the traceless subspace of M_1 is empty")
    us = t.unitaries
    eye = np.eye(t.n, dtype=np.complex128)
    top = restricted_top_eigen(lambda A: _psi_adj(us, _psi(us, A)), t.n, [eye], shift=0.0,
                               tol=tol, max_iter=max_iter, seed=_start_seed(t), method=method)
    return float(np.sqrt(max(top.value, 0.0))), _spectrum(top, tol)


def expander_epsilon(t: UnitaryTuple, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER, method: str = "lanczos") -> float:
    """Largest ``eps`` with ``||sum_j U_j A_0 U_j^*||_2 <= (d - eps) ||A_0||_2`` on traceless A_0."""
    s, spec = expander_norm(t, tol, max_iter, method)
    if not spec.converged:
        log.warning("expander norm did not converge (residual %.3g)", spec.residual)
    return t.d - s


def commutant_violation(t: UnitaryTuple, B) -> float:
    """``sum_j ||[U_j, B]||_2^2``."""
    return float(sum(hs_norm2(commutator(U, B)) ** 2 for U in t.unitaries))


def commutant_gap(t: UnitaryTuple, commutant_basis: Sequence, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER, method: str = "lanczos") -> GapReport:
    """Smallest eigenvalue of T^*T off ``span(commutant_basis)``, via ``2d(1 - lambda_top)``."""
    basis = [as_matrix(B) for B in commutant_basis]
    for B in basis:
        if B.shape != (t.n, t.n):
            raise ValueError(f"dimension mismatch: basis element {B.shape} vs tuple size {t.n}")
        if commutant_violation(t, B) > COMMUTANT_TOL * max(hs_norm2(B) ** 2, 1.0):
            raise ValueError("basis element not in commutant of the tuple")
    if len(basis) >= t.n * t.n:
        raise ValueError("restricted space is empty")
    top = restricted_top_eigen(lambda A: _phi_sym(t.unitaries, A), t.n, basis, shift=1.0,
                               tol=tol, max_iter=max_iter, seed=_start_seed(t), method=method)
    spec = _spectrum(top, tol)
    eps = max(0.0, 2 * t.d * (1.0 - top.value))
    return GapReport(epsilon=eps, constant_C=(1.0 / eps if eps > 0 else float("inf")),
                     lambda2_sym=top.value, certified=spec.converged, d=t.d, n=t.n,
                     residual=top.residual, iterations=top.iterations,
                     multiplicity_warning=spec.multiplicity_warning)


# -- dense matricization oracles -------------------------------------------------------------

def superoperator_matrix(fn: Callable[[np.ndarray], np.ndarray], n: int) -> np.ndarray:
    """Matrix of a linear map on M_n in the row-major vec basis, column by column."""
    cols = []
    for k in range(n * n):
        E = np.zeros(n * n, dtype=np.complex128)
        E[k] = 1.0
        cols.append(np.asarray(fn(E.reshape(n, n))).ravel())
    return np.column_stack(cols)


def complement_basis(n: int, basis: Sequence = ()) -> np.ndarray:
    """Orthonormal (Euclidean) columns spanning the vec-orthocomplement of ``basis``."""
    if not len(basis):
        return np.eye(n * n, dtype=np.complex128)
    rows = np.array([np.asarray(B, dtype=np.complex128).ravel().conj() for B in basis])
    return scipy.linalg.null_space(rows)


def restricted_eigvalsh(M: np.ndarray, n: int, basis: Sequence = ()) -> np.ndarray:
    Q = complement_basis(n, basis)
    R = Q.conj().T @ M @ Q
    return np.linalg.eigvalsh((R + R.conj().T) / 2)


def _check_dense(n: int) -> None:
    if n > DENSE_MAX_N:
        raise ValueError(f"dense matricization limited to n <= {DENSE_MAX_N}, got {n}")


def dense_lambda2(t: UnitaryTuple) -> float:
    _check_dense(t.n)
    M = superoperator_matrix(lambda A: _phi_sym(t.unitaries, A), t.n)
    return float(restricted_eigvalsh(M, t.n, [np.eye(t.n)])[-1])


def dense_commutant_epsilon(t: UnitaryTuple, basis: Sequence) -> float:
    """min eig of T^*T on the complement, with T^*T = sum_j C_j^* C_j built from commutators."""
    _check_dense(t.n)
    TT = 0
    for U in t.unitaries:
        C = superoperator_matrix(lambda A, U=U: U @ A - A @ U, t.n)
        TT = TT + C.conj().T @ C
    return float(restricted_eigvalsh(TT, t.n, basis)[0])


def dense_expander_epsilon(t: UnitaryTuple) -> float:
    _check_dense(t.n)
    Psi = superoperator_matrix(lambda A: _psi(t.unitaries, A), t.n)
    Q = complement_basis(t.n, [np.eye(t.n)])
    s = np.linalg.norm(Q.conj().T @ Psi @ Q, 2)
    return float(t.d - s)


def verify_gap_equivalence(t: UnitaryTuple, basis: Sequence, tol: float = DEFAULT_TOL,
                           max_iter: int = DEFAULT_MAX_ITER) -> float:
    """|direct min eig of T^*T - 2d(1 - lambda_top)|; both restricted to the complement."""
    _check_dense(t.n)
    direct = dense_commutant_epsilon(t, basis)
    via_channel = 2 * t.d * (1.0 - commutant_gap(t, basis, tol, max_iter).lambda2_sym)
    return abs(direct - via_channel)


def verify_corollary_doubling(t: UnitaryTuple, tol: float = DEFAULT_TOL,
                              max_iter: int = DEFAULT_MAX_ITER) -> DoublingReport:
    """Compare the commutant gap of ``t`` with the expander constant of the doubled tuple.

    The doubled map is ``2d * Phi``; its norm on traceless matrices sees
    ``max(lambda_top, -lambda_min)``, so ``eps_qe <= eps_sg`` always, with
    equality exactly when the top eigenvalue dominates the bottom one.
    """
    if t.n > 128:
        raise ValueError("doubling check limited to n <= 128")
    eye = np.eye(t.n, dtype=np.complex128)
    gap = commutant_gap(t, [eye], tol, max_iter)
    eps_qe = expander_epsilon(t.doubled(), tol, max_iter)
    d2 = 2 * t.d
    rep = DoublingReport(eps_sg=gap.epsilon, eps_qe=eps_qe, discrepancy=abs(gap.epsilon - eps_qe),
                         lambda_top=gap.lambda2_sym, max_abs_lambda=1.0 - eps_qe / d2, d=t.d, n=t.n)
    if rep.max_abs_lambda > rep.lambda_top + 1e-8:
        rep.notes.append("bottom eigenvalue dominates: norm-based constant is smaller")
    return rep
