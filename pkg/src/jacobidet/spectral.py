"""Galerkin discretisation of K and everything computed from its spectrum.

Basis: for each of N uniform cells and each control coordinate a, the
L2-normalised indicator sqrt(N) 1_cell e_a.  Coefficients are sampled at the
cell midpoints and held constant on the cell, which makes every entry of
the quadratic form

    <Kv|v> = int_0^1 < J Z_t v(t), int_0^t Z_s v(s) ds > dt

exact for that data.  Off-diagonal cell blocks are Delta * (J Z_i)^T Z_j; a
diagonal block only sees the triangle s < t of its own cell and gets half of
that, and since (J Z_i)^T Z_i is antisymmetric it vanishes after
symmetrisation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.linalg import blas

from .errors import DimensionError, NonRegularPointError, RangeError
from .matfun import antisym_positive_sum, check_symmetric, sym_eigen
from .model import Problem, normalize

NOISE_FLOOR = 1e-12
PV_TOL = 1e-4
PV_POINTS = 32
TIE_RTOL = 1e-9  # magnitudes this close count as equal when truncating
CSV_HEADER = ("n", "alpha", "branch")


@dataclass
class GalerkinSystem:
    N: int
    m: int
    form: np.ndarray                    # (mN, mN), symmetrised
    constraint: np.ndarray              # (d, mN)
    mass: Optional[np.ndarray] = None   # block-diag(-H_i); None means identity


@dataclass(frozen=True)
class SpectrumReport:
    pos: np.ndarray   # alpha_1 >= alpha_2 >= ... > 0
    neg: np.ndarray   # alpha_{-1} <= alpha_{-2} <= ... < 0
    N: Optional[int] = None

    def values(self) -> np.ndarray:
        return np.concatenate([self.pos, self.neg])

    def alpha(self, n: int) -> float:
        """Naturally ordered eigenvalue alpha_n, n = +-1, +-2, ..."""
        if n > 0:
            return float(self.pos[n - 1])
        if n < 0:
            return float(self.neg[-n - 1])
        raise RangeError("n = 0 is not an index of the natural ordering")

    def rows(self):
        for k, a in enumerate(self.pos, 1):
            yield k, float(a), "pos"
        for k, a in enumerate(self.neg, 1):
            yield -k, float(a), "neg"

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for n, a, b in self.rows():
            w.writerow((n, repr(a), b))


@dataclass(frozen=True)
class PrincipalValue:
    estimate: float
    eps: np.ndarray
    partial: np.ndarray
    converged: bool

    @property
    def status(self) -> str:
        return "plateau" if self.converged else "inconclusive"


@dataclass(frozen=True)
class ZetaProfile:
    t: np.ndarray
    values: np.ndarray
    integral: float


@dataclass(frozen=True)
class CapacityEstimate:
    integral_zeta: float
    fitted_slope_pos: float
    fitted_slope_neg: float
    window: tuple
    hypothesis_checked: bool = True

    @property
    def capacity(self) -> float:
        return self.integral_zeta / math.pi


def _cell_data(p: Problem, N: int):
    t, H, Y, X = p.path.midpoints(N)
    return H, Y, X


def assemble(p: Problem, N: int) -> GalerkinSystem:
    d, m = p.d, p.m
    if N < 4 * d:
        raise DimensionError(f"need N >= 4d = {4 * d}, got {N}")
    H, Y, X = _cell_data(p, N)
    n = N * m
    # rows of U are (J Z_i e_a)^T, rows of V are (Z_i e_a)^T
    U = np.concatenate([-X, Y], axis=1).transpose(0, 2, 1).reshape(n, 2 * d)
    V = np.concatenate([Y, X], axis=1).transpose(0, 2, 1).reshape(n, 2 * d)
    F = U @ V.T
    cell = np.arange(n) // m
    half_delta = 0.5 / N
    chunk = max(1, 4_000_000 // n)
    for r in range(0, n, chunk):
        sl = slice(r, min(r + chunk, n))
        F[sl] *= half_delta * np.sign(cell[sl, None] - cell[None, :])
    constraint = X.transpose(1, 0, 2).reshape(d, n) / math.sqrt(N)
    mass = None
    if not p.normalized:
        mass = scipy.linalg.block_diag(*(-H))
    return GalerkinSystem(N, m, F, constraint, mass)


def _householders(C: np.ndarray) -> list:
    """Reflectors whose product Q has range(C^T) as its first d columns."""
    A = np.array(C.T, dtype=float)
    n, d = A.shape
    scale = max(np.linalg.norm(A), 1e-300)
    vs = []
    for k in range(d):
        x = A[k:, k]
        nx = np.linalg.norm(x)
        if nx < 1e-10 * scale:
            raise NonRegularPointError(
                "constraint map is rank-deficient; not a regular point")
        v = np.zeros(n)
        v[k:] = x
        v[k] += math.copysign(nx, x[0]) if x[0] != 0 else nx
        v /= np.linalg.norm(v)
        A -= 2.0 * np.outer(v, v @ A)
        vs.append(v)
    return vs


def _reflect_inplace(M: np.ndarray, v: np.ndarray) -> None:
    """M <- (I - 2vv^T) M (I - 2vv^T) for symmetric M, lower triangle kept."""
    Mf = M.T  # Fortran-contiguous view; its upper triangle is M's lower
    w = blas.dsymv(1.0, Mf, v, lower=0)
    c = float(v @ w)
    u = 2.0 * (w - c * v)
    blas.dsyr2(-1.0, v, u, a=Mf, lower=0, overwrite_a=1)


def null_basis(C: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of ker C."""
    d, n = C.shape
    vs = _householders(C)
    B = np.eye(n)[:, d:]
    for v in reversed(vs):
        B -= 2.0 * np.outer(v, v @ B)
    return B


def restrict(sys: GalerkinSystem, overwrite: bool = False) -> tuple:
    """Matrices of the form (and mass) on ker(constraint).

    Returns (F_r, M_r) with M_r None for the identity mass; only the lower
    triangles of the returned views are meaningful when ``overwrite`` is set.
    """
    d = sys.constraint.shape[0]
    vs = _householders(sys.constraint)
    F = sys.form if overwrite else sys.form.copy()
    for v in vs:
        _reflect_inplace(F, v)
    Fr = F[d:, d:]
    Mr = None
    if sys.mass is not None:
        M = sys.mass.copy()
        for v in vs:
            _reflect_inplace(M, v)
        Mr = np.tril(M[d:, d:])
        Mr = Mr + np.tril(Mr, -1).T
    if not overwrite:
        Fr = np.tril(Fr)
        Fr = Fr + np.tril(Fr, -1).T
    return Fr, Mr


def split_spectrum(values, N: Optional[int] = None) -> SpectrumReport:
    values = np.asarray(values, dtype=float)
    values = values[np.abs(values) >= NOISE_FLOOR]
    pos = np.sort(values[values > 0])[::-1]
    neg = np.sort(values[values < 0])
    return SpectrumReport(pos.copy(), neg.copy(), N)


def spectrum(p: Problem, N: int) -> SpectrumReport:
    sys = assemble(p, N)
    Fr, Mr = restrict(sys, overwrite=True)
    if Mr is None:
        w = scipy.linalg.eigh(Fr, eigvals_only=True, lower=True,
                              overwrite_a=True, check_finite=False)
    else:
        w = scipy.linalg.eigh(Fr, Mr, eigvals_only=True, lower=True)
    return split_spectrum(w, N)


def closed_spectrum_lti(A, R, n_max: int) -> SpectrumReport:
    """Exact spectrum of K for the time-invariant problem with symmetric A.

    alpha = -s where R x = s (A^2 + (pi n)^2) x, n = 1..n_max.
    """
    A = check_symmetric(A)
    R = check_symmetric(R)
    if A.shape != R.shape:
        raise DimensionError("A and R must have the same size")
    eig = sym_eigen(A)
    a, U = eig.values, eig.vectors
    Rp = U.T @ R @ U
    tol = 1e-14 * max(np.linalg.norm(R), 1e-300)
    out = []
    for n in range(1, n_max + 1):
        dinv = 1.0 / np.sqrt(a * a + (math.pi * n) ** 2)
        M = dinv[:, None] * Rp * dinv[None, :]
        s = sym_eigen(M).values
        out.extend(-s[np.abs(s) > tol])
    return split_spectrum(out, None)


def default_schedule(rep: SpectrumReport, points: int = PV_POINTS) -> np.ndarray:
    """|alpha| of the k-th largest magnitude for log-uniformly spaced k."""
    mags = np.sort(np.abs(rep.values()))[::-1]
    if mags.size == 0:
        return mags
    idx = np.unique(np.round(np.geomspace(1, mags.size, points)).astype(int))
    eps = mags[idx - 1]
    keep = np.concatenate([[True], eps[1:] < eps[:-1] * (1.0 - TIE_RTOL)])
    return eps[keep]


def _principal(rep: SpectrumReport, eps_schedule, cumulative, identity: float,
               tol: float) -> PrincipalValue:
    vals = rep.values()
    eps = default_schedule(rep) if eps_schedule is None else np.asarray(eps_schedule, float)
    if vals.size == 0 or eps.size == 0:
        return PrincipalValue(identity, eps, np.full(eps.size, identity), True)
    if np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise ValueError("eps schedule must be positive and strictly decreasing")
    order = np.argsort(-np.abs(vals), kind="stable")
    vals = vals[order]
    acc = cumulative(vals)
    mags = np.abs(vals)[::-1]  # ascending
    counts = mags.size - np.searchsorted(mags, eps * (1.0 - TIE_RTOL), side="left")
    partial = np.where(counts > 0, acc[np.maximum(counts - 1, 0)], identity)
    diffs = np.abs(np.diff(partial))
    ok = diffs <= tol * np.maximum(np.abs(partial[1:]), 1.0)
    if not np.any(ok):
        return PrincipalValue(float(partial[-1]), eps, partial, False)
    last = int(np.nonzero(ok)[0][-1]) + 1
    return PrincipalValue(float(partial[last]), eps, partial, True)


def pv_trace(rep: SpectrumReport, eps_schedule=None, tol: float = PV_TOL) -> PrincipalValue:
    """Partial sums of sum_{|alpha| >= eps} alpha along a decreasing eps schedule."""
    return _principal(rep, eps_schedule, np.cumsum, 0.0, tol)


def pv_det(rep: SpectrumReport, eps_schedule=None, tol: float = PV_TOL) -> PrincipalValue:
    """Partial products of prod_{|alpha| >= eps} (1 + alpha)."""
    return _principal(rep, eps_schedule, lambda v: np.cumprod(1.0 + v), 1.0, tol)


def zeta_bar(p: Problem, nt: int) -> ZetaProfile:
    """Midpoint profile of the positive-eigenvalue sum of i Z^T J Z (H = -I)."""
    q = normalize(p)
    t, _, Y, X = q.path.midpoints(nt)
    W = np.swapaxes(X, -1, -2) @ Y
    ZJZ = W - np.swapaxes(W, -1, -2)   # Z^T J Z = X^T Y - Y^T X
    vals = np.array([antisym_positive_sum(a) for a in ZJZ])
    return ZetaProfile(t, vals, float(np.mean(vals)))


def capacity_fit(rep: SpectrumReport, window: Optional[Sequence[int]] = None,
                 integral_zeta: float = 0.0, size: Optional[int] = None,
                 hypothesis_checked: bool = True) -> CapacityEstimate:
    """Median of pi * n * alpha_n over an index window on each branch.

    A branch shorter than the window is padded with zeros (a finite branch
    has zero capacity).  ``size`` is the dimension of the discretised space;
    windows reaching past it are rejected.
    """
    N = rep.N
    if window is None:
        if N is None:
            raise RangeError("no window given and the report has no N")
        window = (max(1, N // 16), max(1, N // 8))
    lo, hi = int(window[0]), int(window[1])
    limit = size if size is not None else N
    if lo < 1 or hi < lo or (limit is not None and hi > limit):
        raise RangeError(f"window {window} outside the available indices")
    n = np.arange(lo, hi + 1)

    def branch(vals):
        padded = np.zeros(hi)
        k = min(vals.size, hi)
        padded[:k] = vals[:k]
        return float(np.median(math.pi * n * padded[lo - 1:hi]))

    slope_pos = branch(rep.pos)
    slope_neg = branch(-rep.neg)  # pi * n * alpha_n with n, alpha_n both negative
    return CapacityEstimate(float(integral_zeta), slope_pos, slope_neg, (lo, hi),
                            hypothesis_checked)
