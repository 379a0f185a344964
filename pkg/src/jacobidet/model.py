"""Linear-quadratic problem data (H_t, Y_t, X_t) on the unit interval.

The state space is R^d x R^d with coordinates (p, q); the control space is
R^m.  Z_t v = (Y_t v, X_t v) is stored through its two d x m blocks.

Two kinds of coefficient paths exist:

* ``closed-form``: a vectorised evaluator ``t -> (H, Y, X)``;
* ``sampled``: one value per uniform cell of [0, 1].  The value is held
  constant over the cell, so a sampled path and its normalisation describe
  the same operator exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, LegendreConditionError, SymmetryError
from .matfun import check_symmetric, neg_inv_sqrt_stack, sym_eigen

Evaluator = Callable[[np.ndarray], tuple]

EPS_H = 1e-8
_PROBE = 257


def _check_H_stack(H: np.ndarray, eps_H: float, where: str) -> None:
    asym = np.linalg.norm(H - np.swapaxes(H, -1, -2), axis=(-2, -1))
    scale = np.maximum(np.linalg.norm(H, axis=(-2, -1)), 1e-300)
    bad = np.nonzero(asym > 1e-10 * scale)[0]
    if bad.size:
        raise SymmetryError(f"H not symmetric at {where} {bad[0]}")
    top = np.linalg.eigvalsh(0.5 * (H + np.swapaxes(H, -1, -2)))[..., -1]
    bad = np.nonzero(top >= -eps_H)[0]
    if bad.size:
        raise LegendreConditionError(
            f"H not negative-definite at {where} {bad[0]}: Legendre condition "
            f"(largest eigenvalue {top[bad[0]]:.3e})")


@dataclass(frozen=True)
class CoefficientPath:
    d: int
    m: int
    kind: str
    H: Optional[np.ndarray] = field(default=None, repr=False)
    Y: Optional[np.ndarray] = field(default=None, repr=False)
    X: Optional[np.ndarray] = field(default=None, repr=False)
    evaluator: Optional[Evaluator] = field(default=None, repr=False)
    eps_H: float = EPS_H

    @classmethod
    def sampled(cls, H, Y, X, eps_H: float = EPS_H) -> "CoefficientPath":
        H = np.asarray(H, dtype=float)
        Y = np.asarray(Y, dtype=float)
        X = np.asarray(X, dtype=float)
        if H.ndim != 3 or Y.ndim != 3 or X.ndim != 3:
            raise DimensionError("sampled H, Y, X must be stacks of matrices")
        nt, m, m2 = H.shape
        if nt == 0:
            raise DimensionError("sampled path needs at least one cell")
        if m != m2 or Y.shape[0] != nt or X.shape[0] != nt:
            raise DimensionError("inconsistent sample counts or non-square H")
        d = Y.shape[1]
        if Y.shape[1:] != (d, m) or X.shape[1:] != (d, m):
            raise DimensionError(f"Y and X must be {d}x{m} in every cell")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(Y)) and np.all(np.isfinite(X))):
            raise ValueError("sampled path has non-finite entries")
        _check_H_stack(H, eps_H, "cell")
        return cls(d, m, "sampled", H, Y, X, None, eps_H)

    @classmethod
    def closed_form(cls, d: int, m: int, evaluator: Evaluator,
                    eps_H: float = EPS_H, check: bool = True) -> "CoefficientPath":
        path = cls(d, m, "closed-form", evaluator=evaluator, eps_H=eps_H)
        if check:
            t = np.linspace(0.0, 1.0, _PROBE)
            H, Y, X = path.at(t)
            if H.shape != (_PROBE, m, m) or Y.shape != (_PROBE, d, m) or X.shape != (_PROBE, d, m):
                raise DimensionError("evaluator returned inconsistent shapes")
            _check_H_stack(H, eps_H, "probe point")
        return path

    @property
    def nt(self) -> Optional[int]:
        return None if self.H is None else self.H.shape[0]

    def cell_index(self, t) -> np.ndarray:
        nt = self.nt
        return np.clip(np.floor(np.asarray(t) * nt).astype(int), 0, nt - 1)

    def at(self, t) -> tuple:
        """(H, Y, X) stacked along the leading axis of ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == "sampled":
            i = self.cell_index(t)
            return self.H[i], self.Y[i], self.X[i]
        return self.evaluator(t)

    def rk4_nodes(self, steps: int) -> tuple:
        """Coefficients at (t_k, t_k + h/2, t_k + h) for each of ``steps`` steps.

        Sampled paths return the value of the cell containing the step's
        midpoint at all three nodes; callers keep steps a multiple of nt so
        that no step straddles a cell boundary.
        """
        h = 1.0 / steps
        t0 = np.arange(steps) * h
        if self.kind == "sampled":
            H, Y, X = self.at(t0 + 0.5 * h)
            rep = lambda a: np.repeat(a[:, None], 3, axis=1)
            return rep(H), rep(Y), rep(X)
        t = np.stack([t0, t0 + 0.5 * h, t0 + h], axis=1).ravel()
        H, Y, X = self.evaluator(t)
        return (H.reshape(steps, 3, self.m, self.m),
                Y.reshape(steps, 3, self.d, self.m),
                X.reshape(steps, 3, self.d, self.m))

    def midpoints(self, n: int) -> tuple:
        t = (np.arange(n) + 0.5) / n
        return (t,) + tuple(self.at(t))

    def aligned_steps(self, steps: int) -> int:
        if self.kind == "sampled":
            nt = self.nt
            return -(-steps // nt) * nt
        return steps


@dataclass(frozen=True)
class Problem:
    path: CoefficientPath
    normalized: bool = False
    label: str = ""

    @property
    def d(self) -> int:
        return self.path.d

    @property
    def m(self) -> int:
        return self.path.m


def sampled_problem(H, Y, X, label: str = "sampled", eps_H: float = EPS_H) -> Problem:
    path = CoefficientPath.sampled(H, Y, X, eps_H)
    eye = np.eye(path.m)
    normalized = bool(np.all(np.abs(path.H + eye) <= 1e-10))
    return Problem(path, normalized, label)


def normalize(p: Problem) -> Problem:
    """Change variables so that H_t = -I (v -> (-H)^{1/2} v, Z -> Z (-H)^{-1/2})."""
    if p.normalized:
        return p
    path = p.path
    m = path.m
    if path.kind == "sampled":
        G = neg_inv_sqrt_stack(path.H)
        H = np.broadcast_to(-np.eye(m), path.H.shape).copy()
        new = replace(path, H=H, Y=path.Y @ G, X=path.X @ G)
        return Problem(new, True, p.label)

    inner = path.evaluator

    def evaluator(t):
        H, Y, X = inner(t)
        _check_H_stack(H, path.eps_H, "time index")
        G = neg_inv_sqrt_stack(H)
        return np.broadcast_to(-np.eye(m), H.shape).copy(), Y @ G, X @ G

    new = CoefficientPath.closed_form(path.d, m, evaluator, path.eps_H, check=False)
    return Problem(new, True, p.label)


def _const(t, M):
    return np.broadcast_to(M, (t.shape[0],) + M.shape).copy()


def build_oscillator(r: float) -> Problem:
    """Harmonic oscillator: H = -1, Y_t = t r, X_t = 1 (d = m = 1)."""
    r = float(r)

    def evaluator(t):
        k = t.shape[0]
        return -np.ones((k, 1, 1)), (t * r).reshape(k, 1, 1), np.ones((k, 1, 1))

    return Problem(CoefficientPath.closed_form(1, 1, evaluator, check=False),
                   True, f"oscillator(r={r:g})")


def build_magnetic(r: float) -> Problem:
    """Charged particle in a constant magnetic field (d = m = 2)."""
    r = float(r)
    Y = np.array([[0.0, r], [-r, 0.0]])
    I2 = np.eye(2)

    def evaluator(t):
        return _const(t, -I2), _const(t, Y), _const(t, I2)

    return Problem(CoefficientPath.closed_form(2, 2, evaluator, check=False),
                   True, f"magnetic(r={r:g})")


def build_lti(A, R) -> Problem:
    """Linear system x' = Ax + u with cost |u|^2 - <x, Rx>, A and R symmetric.

    X_t = e^{-tA} and Y_t = (int_0^t e^{sA} R e^{sA} ds) e^{-tA}, the p-part of
    the lifted control field; both are evaluated exactly in the eigenbasis of
    A.  A = 0 recovers the oscillator (Y_t = tR, X_t = I).
    """
    A = check_symmetric(A)
    R = check_symmetric(R)
    if A.shape != R.shape:
        raise DimensionError(f"A is {A.shape} but R is {R.shape}")
    m = A.shape[0]
    eig = sym_eigen(A)
    a, U = eig.values, eig.vectors
    Rp = U.T @ R @ U
    c = a[:, None] + a[None, :]

    def evaluator(t):
        ct = c[None] * t[:, None, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(c[None] == 0.0, t[:, None, None], np.expm1(ct) / c[None])
        X = (U[None] * np.exp(-np.outer(t, a))[:, None, :]) @ U.T
        Y = U @ (Rp[None] * g) @ U.T @ X
        return _const(t, -np.eye(m)), Y, X

    label = f"lti(m={m})"
    return Problem(CoefficientPath.closed_form(m, m, evaluator, check=False), True, label)
