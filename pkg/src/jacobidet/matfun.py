"""Small dense real linear algebra.

Everything here works on plain ``numpy`` arrays of modest size (a few
dozen rows at most).  The symmetric eigensolver is a cyclic Jacobi
rotation scheme; large Galerkin matrices go through LAPACK instead (see
``spectral``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NotPositiveDefiniteError, SymmetryError

_FLOOR = 1e-300
JACOBI_TOL = 1e-14
EXPM_ORDER = 13


@dataclass(frozen=True)
class SymEigen:
    values: np.ndarray   # ascending
    vectors: np.ndarray  # orthonormal columns

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def _square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def check_symmetric(S, tol: float = 1e-10) -> np.ndarray:
    S = _square(S)
    scale = max(np.linalg.norm(S), _FLOOR)
    if np.linalg.norm(S - S.T) > tol * scale:
        raise SymmetryError("matrix is not symmetric")
    return S


def check_antisymmetric(M, tol: float = 1e-10) -> np.ndarray:
    M = _square(M)
    scale = max(np.linalg.norm(M), _FLOOR)
    if np.linalg.norm(M + M.T) > tol * scale:
        raise SymmetryError("matrix is not antisymmetric")
    return M


def sym_eigen(S, tol: float = JACOBI_TOL, max_sweeps: int = 100) -> SymEigen:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm falls below
    ``tol * ||S||_F``.
    """
    S = check_symmetric(S)
    n = S.shape[0]
    # work at unit scale: norms of tiny or huge entries under/overflow
    unit = float(np.max(np.abs(S))) if S.size else 0.0
    if unit == 0.0:
        return SymEigen(np.zeros(n), np.eye(n))
    A = 0.5 * (S + S.T) / unit
    V = np.eye(n)
    scale = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= _FLOOR:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                colp, colq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp, rowq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    values = np.diag(A) * unit
    order = np.argsort(values, kind="stable")
    return SymEigen(values[order], V[:, order])


def sym_apply(S, f) -> np.ndarray:
    """Apply a scalar function to a symmetric matrix through its eigenbasis."""
    eig = sym_eigen(S)
    fv = np.array([f(x) for x in eig.values], dtype=float)
    out = (eig.vectors * fv) @ eig.vectors.T
    return 0.5 * (out + out.T)


def sym_sqrt(S) -> np.ndarray:
    S = check_symmetric(S)
    eig = sym_eigen(S)
    scale = max(np.max(np.abs(eig.values)), _FLOOR)
    if eig.values[0] <= 1e-14 * scale:
        raise NotPositiveDefiniteError(
            f"smallest eigenvalue {eig.values[0]:.3e} is not positive")
    R = (eig.vectors * np.sqrt(eig.values)) @ eig.vectors.T
    return 0.5 * (R + R.T)


def expm(M) -> np.ndarray:
    """Matrix exponential: scaling and squaring around a degree-13 Taylor sum."""
    M = _square(M)
    n = M.shape[0]
    norm = np.linalg.norm(M, 1)
    k = 0 if norm <= 0.5 else int(math.ceil(math.log2(norm / 0.5)))
    A = M / (2.0 ** k)
    E = np.eye(n)
    for j in range(EXPM_ORDER, 0, -1):
        E = np.eye(n) + (A @ E) / j
    for _ in range(k):
        E = E @ E
    return E


def psi(mu: float, t: float) -> float:
    """Value at time t of y'' = mu*y, y(0)=0, y'(0)=1."""
    x = mu * t * t
    if abs(x) < 1e-6:
        return t * (1.0 + x / 6.0 + x * x / 120.0)
    if mu > 0:
        w = math.sqrt(mu)
        return math.sinh(w * t) / w
    w = math.sqrt(-mu)
    return math.sin(w * t) / w


def osc_solution(S, t: float) -> np.ndarray:
    """V(t) for V'' = S V, V(0) = 0, V'(0) = I (S symmetric, any signature)."""
    S = check_symmetric(S)
    return sym_apply(S, lambda mu: psi(mu, t))


def antisym_positive_sum(M) -> float:
    """Sum of the positive eigenvalues of iM for antisymmetric M.

    The spectrum of iM is {+z_j, -z_j, 0...}; the singular values of M are
    the z_j each repeated twice, hence the factor one half.
    """
    M = check_antisymmetric(M)
    if M.size == 0:
        return 0.0
    return 0.5 * float(np.sum(np.linalg.svd(M, compute_uv=False)))


def neg_inv_sqrt_stack(H: np.ndarray) -> np.ndarray:
    """(-H)^{-1/2} for a stack of symmetric negative-definite matrices."""
    w, V = np.linalg.eigh(-H)
    return np.einsum("...ik,...k,...jk->...ij", V, 1.0 / np.sqrt(w), V)
