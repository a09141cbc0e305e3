"""Small dense linear algebra kernel.

Matrices are plain float64 numpy arrays. Every problem in this package is at
most 24x24, so everything here is dense and direct.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import NoConvergence, NotSymmetric, SingularMatrix

PIVOT_RTOL = 1e-12
SYMMETRY_TOL = 1e-9
JACOBI_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def as_matrix(A, square: bool = True) -> np.ndarray:
    M = np.asarray(A, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {M.shape}")
    if square and M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def lu_factor(A) -> tuple:
    """Row-pivoted LU factorization with a relative pivot floor.

    Raises SingularMatrix when any pivot magnitude drops below
    ``PIVOT_RTOL`` times the largest entry of ``A``.
    """
    M = as_matrix(A)
    scale = np.abs(M).max()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or pivots.min() < PIVOT_RTOL * scale:
        k = int(np.argmin(pivots))
        raise SingularMatrix(f"pivot {k} has magnitude {pivots[k]:.3e} (matrix scale {scale:.3e})")
    return lu, piv


def solve_linear(A, rhs) -> np.ndarray:
    """Solve ``A x = rhs``; ``rhs`` may be a vector or an n-by-k block."""
    factors = lu_factor(A)
    b = np.asarray(rhs, dtype=float)
    n = factors[0].shape[0]
    if b.shape[0] != n:
        raise ValueError(f"rhs has {b.shape[0]} rows, matrix is {n}x{n}")
    if not np.all(np.isfinite(b)):
        raise ValueError("rhs has non-finite entries")
    return scipy.linalg.lu_solve(factors, b, check_finite=False)


def invert(A) -> np.ndarray:
    M = as_matrix(A)
    return solve_linear(M, np.eye(M.shape[0]))


def solve_batch(stack, rhs) -> np.ndarray:
    """Solve a stack of systems ``stack[k] @ x[k] = rhs[k]`` in one LAPACK call.

    Used by the subset enumeration, where thousands of small systems share a
    shape. ``rhs`` has shape (k, n) or (n,) broadcast over the stack.
    """
    S = np.asarray(stack, dtype=float)
    b = np.broadcast_to(np.asarray(rhs, dtype=float), S.shape[:-1])
    try:
        return np.linalg.solve(S, b[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc


def is_symmetric(A, tol: float = SYMMETRY_TOL) -> bool:
    M = np.asarray(A, dtype=float)
    return M.shape[0] == M.shape[1] and float(np.abs(M - M.T).max()) <= tol


def _jacobi_eigenvalues(M: np.ndarray) -> np.ndarray:
    # Cyclic-by-row Jacobi rotations.
    A = M.copy()
    n = A.shape[0]
    target = JACOBI_RTOL * np.linalg.norm(A)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= target:
            return np.sort(np.diag(A))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                # A subnormal apq overflows tau to inf, which correctly gives t = 0.
                with np.errstate(over="ignore"):
                    tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, tau) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
    raise NoConvergence(f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps")


def sym_eigenvalues(A, method: str = "qr") -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending.

    ``method="qr"`` uses LAPACK's tridiagonal QR driver; ``method="jacobi"``
    runs the in-house cyclic Jacobi iteration (slow, kept as an independent
    route for cross-checks).
    """
    M = as_matrix(A)
    if not is_symmetric(M):
        raise NotSymmetric(f"asymmetry {np.abs(M - M.T).max():.3e} exceeds {SYMMETRY_TOL}")
    M = 0.5 * (M + M.T)
    if method == "qr":
        return scipy.linalg.eigh(M, eigvals_only=True, driver="ev", check_finite=False)
    if method == "jacobi":
        return _jacobi_eigenvalues(M)
    raise ValueError(f"unknown eigenvalue method {method!r}")


def spectral_norm(M) -> float:
    """Largest singular value, computed as sqrt(lambda_max(M^T M))."""
    A = as_matrix(M)
    if not A.any():
        return 0.0
    if is_symmetric(A, 0.0):
        return float(np.abs(sym_eigenvalues(A)).max())
    lam = sym_eigenvalues(A.T @ A)[-1]
    return float(np.sqrt(max(lam, 0.0)))


def is_strictly_diag_dominant(A) -> bool:
    M = as_matrix(A)
    diag = np.abs(np.diag(M))
    off = np.abs(M).sum(axis=1) - diag
    return bool(np.all(diag > off))
