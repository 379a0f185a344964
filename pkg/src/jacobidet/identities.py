"""Closed-form Euler-type product and sum identities.

Each check evaluates a truncated series (with a first-order tail
correction) against a closed form, for the time-invariant family
x' = Ax + u, cost |u|^2 - <x, Rx>, A and R symmetric:

    prod_n det(I - R (A^2 + (pi n)^2)^{-1})  =  det(Q_1 Gamma_1^{-1})
    sum_n tr(R (A^2 + (pi n)^2)^{-1})        =  triple simplex integral

The scalar case A = a, R = a^2 + b^2 gives a sin b / (b sinh a).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CommutativityError, DimensionError
from .matfun import check_symmetric, osc_solution, sym_eigen


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: float
    rhs: float
    n_terms: int

    @property
    def abs_gap(self) -> float:
        return abs(self.lhs - self.rhs)


def _pair(A, R) -> tuple:
    A = check_symmetric(A)
    R = check_symmetric(R)
    if A.shape != R.shape:
        raise DimensionError(f"A is {A.shape} but R is {R.shape}")
    return A, R


def sinc(x: float) -> float:
    return 1.0 - x * x / 6.0 if abs(x) < 1e-4 else math.sin(x) / x


def shc(x: float) -> float:
    """sinh(x) / x."""
    return 1.0 + x * x / 6.0 if abs(x) < 1e-4 else math.sinh(x) / x


def euler_interp(a: float, b: float, n_terms: int) -> IdentityCheck:
    if n_terms < 1:
        raise ValueError("n_terms must be positive")
    c = a * a + b * b
    n = np.arange(1, n_terms + 1, dtype=float)
    factors = 1.0 - c / (a * a + (math.pi * n) ** 2)
    lhs = float(np.prod(factors)) * math.exp(-c / (math.pi ** 2 * n_terms))
    rhs = sinc(b) / shc(a)
    return IdentityCheck("euler_interp", lhs, rhs, n_terms)


def _tail_trace(Rp_diag: np.ndarray, n_terms: int) -> float:
    return float(np.sum(Rp_diag)) / (math.pi ** 2 * n_terms)


def prop2_det_lhs(A, R, n_terms: int) -> float:
    A, R = _pair(A, R)
    eig = sym_eigen(A)
    a, U = eig.values, eig.vectors
    Rp = U.T @ R @ U
    m = a.size
    n = np.arange(1, n_terms + 1, dtype=float)
    Dinv = 1.0 / (a[None, :] ** 2 + (math.pi * n[:, None]) ** 2)   # (n_terms, m)
    # I - R' D_n^{-1} in the eigenbasis of A
    M = np.eye(m)[None] - Rp[None] * Dinv[:, None, :]
    sign, logdet = np.linalg.slogdet(M)
    tail = _tail_trace(np.diag(Rp), n_terms)
    total = float(np.sum(logdet)) - tail
    return float(np.prod(sign)) * math.exp(total)


def prop2_det_rhs(A, R) -> float:
    """det(2 V Sinh(A)^{-1}) with V = osc_solution(A^2 - R, 1), Sinh(A) = int_{-1}^{1} e^{tA} dt.

    Equals det(Q_1 Gamma_1^{-1}); V realises sin(sqrt(R - A^2)) / sqrt(R - A^2)
    for any signature of R - A^2.
    """
    A, R = _pair(A, R)
    m = A.shape[0]
    V = osc_solution(A @ A - R, 1.0)
    a = sym_eigen(A).values
    # int_{-1}^{1} e^{ta} dt = 2 sinh(a) / a
    det_int = float(np.prod([2.0 * shc(x) for x in a]))
    return float(np.linalg.det(2.0 * V)) / det_int if m else 1.0


def prop2_det(A, R, n_terms: int) -> IdentityCheck:
    return IdentityCheck("prop2_det", prop2_det_lhs(A, R, n_terms),
                         prop2_det_rhs(A, R), n_terms)


def prop2_trace_series(A, R, n_terms: int) -> float:
    A, R = _pair(A, R)
    eig = sym_eigen(A)
    a, U = eig.values, eig.vectors
    Rd = np.diag(U.T @ R @ U)
    n = np.arange(1, n_terms + 1, dtype=float)
    terms = Rd[None, :] / (a[None, :] ** 2 + (math.pi * n[:, None]) ** 2)
    return float(np.sum(terms)) + _tail_trace(Rd, n_terms)


def _expm_sym(a: np.ndarray, U: np.ndarray, t: np.ndarray) -> np.ndarray:
    """e^{tA} for each t, A = U diag(a) U^T."""
    return (U[None] * np.exp(np.outer(t, a))[:, None, :]) @ U.T


def prop2_trace_quadrature(A, R, nq: int = 4096) -> float:
    """tr( iiint_{s1<=s2<=t} e^{(s2-2t)A} R e^{(s2-2 s1)A} (int_0^1 e^{-2tA} dt)^{-1} ).

    The inner integrals are nested cumulative integrals on a uniform grid of
    nq cells (trapezoid rule), so the cost is O(nq m^3).
    """
    A, R = _pair(A, R)
    eig = sym_eigen(A)
    a, U = eig.values, eig.vectors
    t = np.linspace(0.0, 1.0, nq + 1)
    h = 1.0 / nq

    def cumtrapz(f):
        out = np.zeros_like(f)
        out[1:] = np.cumsum(0.5 * h * (f[1:] + f[:-1]), axis=0)
        return out

    Em2 = _expm_sym(a, U, -2.0 * t)          # e^{-2tA}
    E1 = _expm_sym(a, U, t)                  # e^{tA}
    inner1 = cumtrapz(Em2)                   # int_0^{s2} e^{-2 s1 A} ds1
    g = E1 @ R @ E1 @ inner1                 # e^{s2 A} R e^{s2 A} inner1(s2)
    inner2 = cumtrapz(g)                     # int_0^t g(s2) ds2
    outer = Em2 @ inner2                     # e^{-2tA} inner2(t)
    T = 0.5 * h * (outer[0] + outer[-1] + 2.0 * np.sum(outer[1:-1], axis=0))
    Gamma = 0.5 * h * (Em2[0] + Em2[-1] + 2.0 * np.sum(Em2[1:-1], axis=0))
    return float(np.trace(T @ np.linalg.inv(Gamma)))


def prop2_trace(A, R, n_terms: int, nq: int = 4096) -> IdentityCheck:
    return IdentityCheck("prop2_trace", prop2_trace_series(A, R, n_terms),
                         prop2_trace_quadrature(A, R, nq), n_terms)


def _coth_kernel(x: float) -> float:
    """(x coth x - 1) / x^2, continuous at 0 with value 1/3."""
    if abs(x) < 0.05:
        x2 = x * x
        return 1.0 / 3.0 + x2 * (-1.0 / 45.0 + x2 * (2.0 / 945.0 + x2 * (-1.0 / 4725.0 + x2 * 2.0 / 93555.0)))
    return (x / math.tanh(x) - 1.0) / (x * x)


def prop2_trace_commutative(A, R) -> float:
    """(1/2) tr(R (A coth A - I) A^{-2}) for commuting A and R."""
    A, R = _pair(A, R)
    scale = max(np.linalg.norm(A) * np.linalg.norm(R), 1e-300)
    if np.linalg.norm(A @ R - R @ A) >= 1e-10 * scale and np.linalg.norm(A @ R - R @ A) > 0:
        raise CommutativityError("A and R do not commute")
    eig = sym_eigen(A)
    Rd = np.diag(eig.vectors.T @ R @ eig.vectors)
    return 0.5 * float(sum(r * _coth_kernel(x) for r, x in zip(Rd, eig.values)))
