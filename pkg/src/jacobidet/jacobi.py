"""Jacobi system, Gram matrix and the determinant/trace identities.

The parametrised Jacobi system on R^d x R^d (coordinates (p, q)) is

    eta' = Z^s G Z^s^T J eta,    Z^s = [s Y; X],  G = (-H)^{-1},
    J = [[0, -I], [I, 0]],

integrated with fixed-step classical RK4.  Q_1^s is read from the q-rows of
the columns started at (e_i, 0).  det Q_1^s = det(Gamma_1) det(I + sK), so
the real zeros s of the characteristic function give the eigenvalues
-1/s of K.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import NonRegularPointError
from .matfun import sym_eigen
from .model import Problem

DEFAULT_STEPS = 4096
ROOT_XTOL = 1e-10
KERNEL_RTOL = 1e-6
_CHUNK_DOUBLES = 20_000_000


def symplectic_J(d: int) -> np.ndarray:
    J = np.zeros((2 * d, 2 * d))
    J[:d, d:] = -np.eye(d)
    J[d:, :d] = np.eye(d)
    return J


@dataclass(frozen=True)
class FlowState:
    Phi: np.ndarray
    s: float
    t: float = 1.0

    @property
    def d(self) -> int:
        return self.Phi.shape[0] // 2

    def symplectic_defect(self) -> float:
        J = symplectic_J(self.d)
        return float(np.linalg.norm(self.Phi.T @ J @ self.Phi - J))


@dataclass(frozen=True)
class JacobiReport:
    Q1s: np.ndarray
    Gamma1: np.ndarray
    det_IplusK: float
    tr_K: float
    s: float = 1.0


@dataclass(frozen=True)
class CharRoot:
    s: float
    alpha: float
    multiplicity: int


@dataclass
class RootScan:
    roots: list = field(default_factory=list)
    advisories: list = field(default_factory=list)

    def eigenvalues(self) -> list:
        return [(r.alpha, r.multiplicity) for r in self.roots]


class _Blocks:
    """P_yy = Y G Y^T, P_yx = Y G X^T, P_xx = X G X^T at every RK4 node."""

    def __init__(self, p: Problem, steps: int):
        if steps < 16:
            raise ValueError("at least 16 integration steps are required")
        steps = p.path.aligned_steps(steps)
        H, Y, X = p.path.rk4_nodes(steps)
        if p.normalized:
            GYt, GXt = np.swapaxes(Y, -1, -2), np.swapaxes(X, -1, -2)
        else:
            GYt = np.linalg.solve(-H, np.swapaxes(Y, -1, -2))
            GXt = np.linalg.solve(-H, np.swapaxes(X, -1, -2))
        self.steps = steps
        self.h = 1.0 / steps
        self.d = p.d
        self.Pyy = Y @ GYt
        self.Pyx = Y @ GXt
        self.Pxx = X @ GXt
        self.Pxy = np.swapaxes(self.Pyx, -1, -2)

    def generators(self, s: np.ndarray) -> np.ndarray:
        """Z^s G Z^s^T J for each s, shape (steps, 3, ns, 2d, 2d)."""
        d = self.d
        s = np.asarray(s, dtype=float)[None, None, :, None, None]
        ex = lambda a: a[:, :, None]
        A = np.empty((self.steps, 3, s.shape[2], 2 * d, 2 * d))
        A[..., :d, :d] = s * ex(self.Pyx)
        A[..., :d, d:] = -(s * s) * ex(self.Pyy)
        A[..., d:, :d] = ex(self.Pxx)
        A[..., d:, d:] = -s * ex(self.Pxy)
        return A


def _rk4(A: np.ndarray, h: float, Phi: np.ndarray) -> np.ndarray:
    for Ak in A:
        A0, Am, A1 = Ak
        k1 = A0 @ Phi
        k2 = Am @ (Phi + 0.5 * h * k1)
        k3 = Am @ (Phi + 0.5 * h * k2)
        k4 = A1 @ (Phi + h * k3)
        Phi = Phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Phi


def _propagate(blocks: _Blocks, s) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    n = 2 * blocks.d
    chunk = max(1, _CHUNK_DOUBLES // (blocks.steps * 3 * n * n))
    out = []
    for i in range(0, s.size, chunk):
        sc = s[i:i + chunk]
        Phi0 = np.broadcast_to(np.eye(n), (sc.size, n, n)).copy()
        out.append(_rk4(blocks.generators(sc), blocks.h, Phi0))
    return np.concatenate(out)


def flow(p: Problem, s: float, steps: int = DEFAULT_STEPS) -> FlowState:
    """Fundamental matrix Phi_1^s of the Jacobi system."""
    Phi = _propagate(_Blocks(p, steps), s)[0]
    return FlowState(Phi, float(s))


def extract_Q(fs: FlowState) -> np.ndarray:
    d = fs.d
    return fs.Phi[d:, :d].copy()


def _check_regular(Gamma: np.ndarray) -> None:
    w = sym_eigen(Gamma).values
    if w[-1] <= 0 or w[0] < 1e-10 * w[-1]:
        raise NonRegularPointError(
            f"Gram matrix is singular (eigenvalues {w[0]:.3e} .. {w[-1]:.3e}); "
            "the reference control is not a regular point")


def _gram(blocks: _Blocks) -> np.ndarray:
    P = blocks.Pxx
    G = (blocks.h / 6.0) * np.sum(P[:, 0] + 4.0 * P[:, 1] + P[:, 2], axis=0)
    return 0.5 * (G + G.T)


def gram(p: Problem, nq: int = DEFAULT_STEPS) -> np.ndarray:
    """Gamma_1 = -int_0^1 X H^{-1} X^T dt by composite Simpson on nq cells.

    Uses the same nodes as the RK4 flow, so Gamma_1 agrees with Q_1^0 to
    rounding.
    """
    G = _gram(_Blocks(p, nq))
    _check_regular(G)
    return G


def char_fn(p: Problem, s, steps: int = DEFAULT_STEPS):
    """det Q_1^s; scalar in, scalar out, array in, array out."""
    scalar = np.ndim(s) == 0
    Phi = _propagate(_Blocks(p, steps), s)
    d = p.d
    vals = np.linalg.det(Phi[:, d:, :d])
    return float(vals[0]) if scalar else vals


def det_identity(p: Problem, steps: int = DEFAULT_STEPS) -> float:
    """det(I + K) = det(Q_1 Gamma_1^{-1})."""
    blocks = _Blocks(p, steps)
    Gamma = _gram(blocks)
    _check_regular(Gamma)
    d = p.d
    Q = _propagate(blocks, 1.0)[0][d:, :d]
    return float(np.linalg.det(Q) / np.linalg.det(Gamma))


def _trace_integral(blocks: _Blocks) -> np.ndarray:
    """int_0^1 int_0^t X_t G_t Z_t^T J Z_s G_s X_s^T ds dt in one pass.

    W(t) = int_0^t Z G X^T is carried alongside as an RK4 quadrature state.
    """
    h = blocks.h
    g = np.concatenate([blocks.Pyx, blocks.Pxx], axis=-2)  # Z G X^T, (steps,3,2d,d)
    d = blocks.d
    incr = (h / 6.0) * (g[:, 0] + 4.0 * g[:, 1] + g[:, 2])
    W0 = np.concatenate([np.zeros((1,) + incr.shape[1:]), np.cumsum(incr, axis=0)[:-1]])

    def F(j, W):
        # X G Z^T J W with J W = (-W_q, W_p)
        return -blocks.Pxy[:, j] @ W[:, d:] + blocks.Pxx[:, j] @ W[:, :d]

    k1 = F(0, W0)
    k2 = F(1, W0 + 0.5 * h * g[:, 0])
    k3 = F(1, W0 + 0.5 * h * g[:, 1])
    k4 = F(2, W0 + h * g[:, 1])
    return (h / 6.0) * np.sum(k1 + 2.0 * k2 + 2.0 * k3 + k4, axis=0)


def trace_identity(p: Problem, steps: int = DEFAULT_STEPS) -> float:
    """tr K = tr( int int_{s<t} X_t H_t^-1 Z_t^T J Z_s H_s^-1 X_s^T ds dt  Gamma_1^{-1} )."""
    blocks = _Blocks(p, steps)
    Gamma = _gram(blocks)
    _check_regular(Gamma)
    T = _trace_integral(blocks)
    return float(np.trace(np.linalg.solve(Gamma.T, T.T).T))


def jacobi_report(p: Problem, steps: int = DEFAULT_STEPS, s: float = 1.0) -> JacobiReport:
    blocks = _Blocks(p, steps)
    Gamma = _gram(blocks)
    _check_regular(Gamma)
    d = p.d
    Q = _propagate(blocks, s)[0][d:, :d]
    Q1 = Q if s == 1.0 else _propagate(blocks, 1.0)[0][d:, :d]
    det = float(np.linalg.det(Q1) / np.linalg.det(Gamma))
    T = _trace_integral(blocks)
    tr = float(np.trace(np.linalg.solve(Gamma.T, T.T).T))
    return JacobiReport(Q, Gamma, det, tr, float(s))


def _golden_min(f, a: float, b: float, xtol: float) -> tuple:
    g = 0.5 * (np.sqrt(5.0) - 1.0)
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _kernel_dim(Q: np.ndarray, scale: float) -> int:
    sv = np.linalg.svd(Q, compute_uv=False)
    return int(np.sum(sv < KERNEL_RTOL * max(scale, 1e-300)))


def spectrum_via_roots(p: Problem, s_lo: float, s_hi: float,
                       steps: int = DEFAULT_STEPS, grid: int = 512) -> RootScan:
    """Eigenvalues of K from the real zeros of s -> det Q_1^s on [s_lo, s_hi].

    Odd-multiplicity zeros are bracketed by sign changes and refined by
    Brent's method; even-multiplicity zeros show up as local minima of
    |det Q| and are refined by minimising the smallest singular value of
    Q_1^s.  Multiplicity is the numerical kernel dimension of Q_1^s,
    measured against the size of Q at the bracketing grid points.
    """
    if s_lo >= s_hi:
        raise ValueError("need s_lo < s_hi")
    blocks = _Blocks(p, steps)
    d = p.d
    S = np.linspace(s_lo, s_hi, grid)
    Qs = _propagate(blocks, S)[:, d:, :d]
    f = np.linalg.det(Qs)
    qn = np.linalg.norm(Qs, ord=2, axis=(1, 2))

    def Q_at(s):
        return _propagate(blocks, s)[0][d:, :d]

    def det_at(s):
        return float(np.linalg.det(Q_at(s)))

    scan = RootScan()
    found = []
    sign_iv = set()
    for i in range(grid - 1):
        if f[i] == 0.0:
            found.append((S[i], i, i))
            sign_iv.update({i - 1, i})
        elif f[i] * f[i + 1] < 0:
            s0 = brentq(det_at, S[i], S[i + 1], xtol=ROOT_XTOL)
            found.append((s0, i, i + 1))
            sign_iv.add(i)
    if f[-1] == 0.0:
        found.append((S[-1], grid - 1, grid - 1))

    af = np.abs(f)
    for i in range(1, grid - 1):
        if not (af[i] < af[i - 1] and af[i] <= af[i + 1]):
            continue
        if (i - 1) in sign_iv or i in sign_iv or f[i] == 0.0:
            continue
        x, fx = _golden_min(lambda s: np.linalg.svd(Q_at(s), compute_uv=False)[-1],
                            S[i - 1], S[i + 1], ROOT_XTOL)
        scale = max(qn[i - 1], qn[i + 1])
        if fx < KERNEL_RTOL * scale:
            found.append((x, i - 1, i + 1))

    for s0, i, j in sorted(found):
        if s0 == 0.0:
            continue
        scale = max(qn[max(i - 1, 0)], qn[min(j + 1, grid - 1)], qn[i], qn[j])
        mult = max(1, _kernel_dim(Q_at(s0), scale))
        scan.roots.append(CharRoot(float(s0), float(-1.0 / s0), mult))

    tol = 1e-8 * max(float(np.max(af)), 1e-300)
    for edge, nb in ((0, 1), (grid - 1, grid - 2)):
        near = any(min(i, j) <= 0 for _, i, j in found) if edge == 0 else \
            any(max(i, j) >= grid - 1 for _, i, j in found)
        if af[edge] <= tol or af[edge] < af[nb] or near:
            msg = (f"possible root near the scan edge s={S[edge]:.6g}; "
                   "widen the interval")
            scan.advisories.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return scan


def lemma1_sides(p: Problem, s: float, steps: int = DEFAULT_STEPS,
                 h: float = 1e-5) -> tuple:
    """Both sides of <J eta(1), d_s eta(1)> = int_0^1 |Z^T J eta|_G^2 dt.

    eta solves eta' = s Z G Z^T J eta with eta(0) = (e_i, 0); returns the two
    length-d vectors (one entry per basis initial condition).
    """
    blocks = _Blocks(p, steps)
    d = blocks.d
    J = symplectic_J(d)
    # the rescaled system eta' = s Z G Z^T J eta is the s=1 generator times s
    A1 = blocks.generators(np.array([1.0]))[:, :, 0]
    P = np.empty_like(A1)
    P[..., :d, :d] = blocks.Pyy
    P[..., :d, d:] = blocks.Pyx
    P[..., d:, :d] = blocks.Pxy
    P[..., d:, d:] = blocks.Pxx

    def run(sv, with_integral=False):
        Phi = np.eye(2 * d)[:, :d]
        C = np.zeros((d, d))
        hh = blocks.h
        for k in range(blocks.steps):
            A = sv * A1[k]

            def rhs(j, F):
                JF = J @ F
                return A[j] @ F, JF.T @ P[k, j] @ JF

            a1, c1 = rhs(0, Phi)
            a2, c2 = rhs(1, Phi + 0.5 * hh * a1)
            a3, c3 = rhs(1, Phi + 0.5 * hh * a2)
            a4, c4 = rhs(2, Phi + hh * a3)
            Phi = Phi + (hh / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
            if with_integral:
                C = C + (hh / 6.0) * (c1 + 2 * c2 + 2 * c3 + c4)
        return Phi, C

    Phi, C = run(s, True)
    dPhi = (run(s + h)[0] - run(s - h)[0]) / (2.0 * h)
    lhs = np.einsum("ij,ij->j", J @ Phi, dPhi)
    return lhs, np.diag(C).copy()


def lemma1_defect(p: Problem, s: float, steps: int = DEFAULT_STEPS,
                  h: float = 1e-5) -> float:
    lhs, rhs = lemma1_sides(p, s, steps, h)
    return float(np.max(np.abs(lhs - rhs)))
