"""Dense linear-algebra kernels.

Matrices are plain 2-D ``float64`` numpy arrays. Every public function
validates its inputs (shape, finiteness) and never mutates them.

The Sylvester equation ``A W + W B = C`` is solved in two independent ways:

* :func:`solve_sylvester_sym` diagonalises the symmetric ``A`` and ``B`` and
  divides in the eigenbasis. This is the path used for fitting.
* :func:`solve_sylvester_kron` vectorises the equation into a
  ``(k*m) x (k*m)`` linear system and runs Gaussian elimination. It is slow
  and only meant as a cross-check on small instances.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from . import _backend
from .errors import (
    DimensionMismatch,
    NoConvergence,
    NonFinite,
    NotSPD,
    NotSquare,
    NotSymmetric,
    SingularNormalEquations,
    TooLarge,
    ZeroMatrix,
)

__all__ = [
    "EigenDecomposition",
    "SylvesterSolution",
    "as_matrix",
    "concat_rows",
    "frobenius_norm",
    "matmul",
    "ridge_solve",
    "slice_rows",
    "solve_spd",
    "solve_sylvester_kron",
    "solve_sylvester_sym",
    "spectral_norm",
    "sym_eigendecompose",
    "transpose",
]

KRON_MAX_UNKNOWNS = 400


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float64 array (no copy when possible)."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise NonFinite(f"{name} contains NaN or Inf")
    return arr


def _require_symmetric(M: np.ndarray, tol: float, name: str) -> None:
    if M.shape[0] != M.shape[1]:
        raise NotSquare(f"{name} is {M.shape[0]}x{M.shape[1]}, expected square")
    asym = np.linalg.norm(M - M.T)
    if asym > tol * (1.0 + np.linalg.norm(M)):
        raise NotSymmetric(f"{name} asymmetry {asym:.3e} exceeds tolerance {tol:g}")


# -- plumbing -----------------------------------------------------------------

def matmul(A, B) -> np.ndarray:
    A, B = as_matrix(A, "A"), as_matrix(B, "B")
    if A.shape[1] != B.shape[0]:
        raise DimensionMismatch(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def transpose(M) -> np.ndarray:
    return np.ascontiguousarray(as_matrix(M).T)


def frobenius_norm(M) -> float:
    return float(np.linalg.norm(as_matrix(M)))


def concat_rows(top, bottom) -> np.ndarray:
    """Stack ``top`` above ``bottom``; both need the same column count."""
    top, bottom = as_matrix(top, "top"), as_matrix(bottom, "bottom")
    if top.shape[1] != bottom.shape[1]:
        raise DimensionMismatch(
            f"column counts differ: {top.shape[1]} vs {bottom.shape[1]}")
    return np.vstack([top, bottom])


def slice_rows(M, start: int, stop: int) -> np.ndarray:
    M = as_matrix(M)
    if not 0 <= start <= stop <= M.shape[0]:
        raise DimensionMismatch(f"row range {start}:{stop} outside 0:{M.shape[0]}")
    return M[start:stop].copy()


# -- eigen / Sylvester --------------------------------------------------------

@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in descending order and matching orthonormal eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def sym_eigendecompose(M, sym_tol: float = 1e-10) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    M : array_like, shape (n, n)
        Symmetric up to ``sym_tol * (1 + ||M||_F)`` in Frobenius norm. Only
        the symmetric part is decomposed.
    sym_tol : float
        Relative asymmetry tolerance.

    Returns
    -------
    EigenDecomposition
        ``values`` sorted descending, ``vectors`` as columns.
    """
    M = as_matrix(M, "M")
    _require_symmetric(M, sym_tol, "M")
    values, vectors = np.linalg.eigh(0.5 * (M + M.T))
    return EigenDecomposition(values[::-1].copy(), np.ascontiguousarray(vectors[:, ::-1]))


@dataclass(frozen=True)
class SylvesterSolution:
    W: np.ndarray
    nullified_modes: int
    residual: float


def sylvester_residual(A, B, C, W) -> float:
    return float(np.linalg.norm(A @ W + W @ B - C))


def solve_sylvester_sym(A, B, C, eps: float | None = None,
                        sym_tol: float = 1e-10) -> SylvesterSolution:
    """Solve ``A W + W B = C`` for symmetric ``A`` (k x k) and ``B`` (m x m).

    With ``A = U diag(lam) U^T`` and ``B = V diag(mu) V^T`` the solution is
    ``U (U^T C V / (lam_i + mu_j)) V^T``. Modes with ``|lam_i + mu_j| <= eps``
    have no unique coefficient; they are set to zero and counted in
    ``nullified_modes``.

    Parameters
    ----------
    A : array_like, shape (k, k)
    B : array_like, shape (m, m)
    C : array_like, shape (k, m)
    eps : float, optional
        Defaults to ``1e-10 * (max|lam| + max|mu|)``.
    sym_tol : float
        Relative asymmetry tolerated in ``A`` and ``B``.

    Returns
    -------
    SylvesterSolution
    """
    A, B, C = as_matrix(A, "A"), as_matrix(B, "B"), as_matrix(C, "C")
    _require_symmetric(A, sym_tol, "A")
    _require_symmetric(B, sym_tol, "B")
    if C.shape != (A.shape[0], B.shape[0]):
        raise DimensionMismatch(
            f"C is {C.shape}, expected {(A.shape[0], B.shape[0])} from A and B")
    if eps is not None and eps < 0:
        raise ValueError("eps must be non-negative")

    ea = sym_eigendecompose(A, sym_tol)
    eb = sym_eigendecompose(B, sym_tol)
    lam, U = ea.values, ea.vectors
    mu, V = eb.values, eb.vectors
    if eps is None:
        top = (np.abs(lam).max() if lam.size else 0.0) + (np.abs(mu).max() if mu.size else 0.0)
        eps = 1e-10 * top

    denom = lam[:, None] + mu[None, :]
    dead = np.abs(denom) <= eps
    Ct = U.T @ C @ V
    Wt = np.divide(Ct, denom, out=np.zeros_like(Ct), where=~dead)
    W = U @ Wt @ V.T
    return SylvesterSolution(W, int(dead.sum()), sylvester_residual(A, B, C, W))


def solve_sylvester_kron(A, B, C) -> np.ndarray:
    """Solve ``A W + W B = C`` through ``(I kron A + B^T kron I) vec W = vec C``.

    Dense Gaussian elimination with partial pivoting on ``k*m`` unknowns;
    refuses systems with more than 400 unknowns.
    """
    A, B, C = as_matrix(A, "A"), as_matrix(B, "B"), as_matrix(C, "C")
    k, m = A.shape[0], B.shape[0]
    if A.shape != (k, k) or B.shape != (m, m):
        raise NotSquare("A and B must be square")
    if C.shape != (k, m):
        raise DimensionMismatch(f"C is {C.shape}, expected {(k, m)}")
    if k * m > KRON_MAX_UNKNOWNS:
        raise TooLarge(f"{k * m} unknowns exceeds the oracle limit of {KRON_MAX_UNKNOWNS}")
    K = np.kron(np.eye(m), A) + np.kron(B.T, np.eye(k))
    rhs = C.reshape(-1, 1, order="F")
    x = _backend.gauss_solve(np.ascontiguousarray(K), np.ascontiguousarray(rhs))
    return x.reshape((k, m), order="F")


def gauss_solve(M, rhs) -> np.ndarray:
    """General square solve by partial-pivoting elimination (oracle helper)."""
    M = as_matrix(M, "M")
    rhs = np.asarray(rhs, dtype=np.float64)
    vector = rhs.ndim == 1
    rhs = as_matrix(rhs.reshape(-1, 1) if vector else rhs, "rhs")
    if M.shape[0] != M.shape[1]:
        raise NotSquare(f"M is {M.shape}")
    if rhs.shape[0] != M.shape[0]:
        raise DimensionMismatch(f"rhs has {rhs.shape[0]} rows, M has {M.shape[0]}")
    x = _backend.gauss_solve(np.ascontiguousarray(M), np.ascontiguousarray(rhs))
    return x[:, 0] if vector else x


# -- SPD / ridge --------------------------------------------------------------

def solve_spd(M, rhs, sym_tol: float = 1e-10) -> np.ndarray:
    """Solve ``M X = rhs`` for symmetric positive definite ``M`` via Cholesky."""
    M = as_matrix(M, "M")
    rhs = np.asarray(rhs, dtype=np.float64)
    vector = rhs.ndim == 1
    rhs = as_matrix(rhs.reshape(-1, 1) if vector else rhs, "rhs")
    _require_symmetric(M, sym_tol, "M")
    if rhs.shape[0] != M.shape[0]:
        raise DimensionMismatch(f"rhs has {rhs.shape[0]} rows, M has {M.shape[0]}")
    try:
        factor = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSPD(f"Cholesky failed: {exc}") from None
    x = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    return x[:, 0] if vector else x


def ridge_solve(Xp, S, lam: float) -> np.ndarray:
    """Closed-form ridge map ``W = Xp S^T (S S^T + lam I)^-1``.

    ``Xp`` is (m, n), ``S`` is (k, n); the result is (m, k). ``lam = 0`` is
    accepted only when ``S S^T`` is nonsingular.
    """
    Xp, S = as_matrix(Xp, "Xp"), as_matrix(S, "S")
    if Xp.shape[1] != S.shape[1]:
        raise DimensionMismatch(f"Xp has {Xp.shape[1]} samples, S has {S.shape[1]}")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    G = S @ S.T
    G = 0.5 * (G + G.T)
    if lam == 0:
        ev = np.linalg.eigvalsh(G)
        if ev.size and ev[0] <= G.shape[0] * np.finfo(float).eps * max(ev[-1], 0.0):
            raise SingularNormalEquations("S S^T is rank-deficient and lambda = 0")
    G[np.diag_indices_from(G)] += lam
    try:
        Wt = solve_spd(G, S @ Xp.T)
    except NotSPD as exc:
        raise SingularNormalEquations(str(exc)) from None
    return np.ascontiguousarray(Wt.T)


# -- spectral norm ------------------------------------------------------------

POWER_BLOCK = 8


def _top_eigenvalue(apply: Callable[[np.ndarray], np.ndarray], n: int,
                    tol: float, max_iter: int) -> float:
    """Largest eigenvalue of a symmetric PSD operator by block power iteration.

    ``apply`` maps an (n, b) block to its image. The block starts from the
    normalised all-ones vector plus ``POWER_BLOCK - 1`` seeded columns, and
    each sweep extracts the top Ritz pair, so clustered leading eigenvalues
    only slow convergence when more than a block's worth of them crowd the
    top. Converges when ``||T v - rho v|| <= tol * rho``. A stagnating run
    (quotient flat while the residual stays above ``tol``) is restarted once
    from a perturbed block and the larger estimate kept.
    """
    b = min(n, POWER_BLOCK)
    rng = np.random.default_rng(0)
    start = np.empty((n, b))
    start[:, 0] = 1.0 / np.sqrt(n)
    start[:, 1:] = rng.standard_normal((n, b - 1))

    def iterate(V, budget):
        Q = np.linalg.qr(V)[0]
        rho_prev, flat = None, 0
        for _ in range(budget):
            TQ = apply(Q)
            R = Q.T @ TQ
            vals, vecs = np.linalg.eigh(0.5 * (R + R.T))
            rho = float(vals[-1])
            if rho <= 0.0:
                return 0.0, Q, False
            y = vecs[:, -1]
            if np.linalg.norm(TQ @ y - rho * (Q @ y)) <= tol * rho:
                return rho, Q, False
            # the quotient can settle at the rounding floor before the residual does
            if rho_prev is not None and abs(rho - rho_prev) <= 1e-3 * tol * rho:
                flat += 1
                if flat >= 50:
                    return rho, Q, True
            else:
                flat = 0
            rho_prev = rho
            Q = np.linalg.qr(TQ @ vecs[:, ::-1])[0]
        raise NoConvergence(f"power iteration did not converge in {max_iter} iterations")

    rho, Q, stalled = iterate(start, max_iter)
    if stalled:
        rho2, _, _ = iterate(Q + 1e-3 * rng.standard_normal(Q.shape), max_iter)
        rho = max(rho, rho2)
    return rho


def spectral_norm(M, tol: float = 1e-12, max_iter: int = 20000) -> float:
    """Largest singular value of ``M`` (relative accuracy about ``tol``)."""
    M = as_matrix(M, "M")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not M.any():
        raise ZeroMatrix("spectral norm of a zero matrix is not computed")
    if M.shape[0] < M.shape[1]:
        rho = _top_eigenvalue(lambda V: M @ (M.T @ V), M.shape[0], tol, max_iter)
    else:
        rho = _top_eigenvalue(lambda V: M.T @ (M @ V), M.shape[1], tol, max_iter)
    return float(np.sqrt(rho))


def operator_norm_psd(apply: Callable[[np.ndarray], np.ndarray], n: int,
                      tol: float = 1e-12, max_iter: int = 20000) -> float:
    """Spectral norm of an implicit symmetric PSD ``n x n`` operator."""
    return _top_eigenvalue(apply, n, tol, max_iter)
