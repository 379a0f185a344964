"""Acceptance criteria 1-10, one PASS/FAIL line each.

Every test records its verdict before asserting, so a failing criterion
still prints its measured numbers.
"""
import math
import time

import numpy as np
import pytest

from jacobidet import (build_lti, build_magnetic, build_oscillator, capacity_fit,
                       det_identity, euler_interp, flow, lemma1_defect, normalize,
                       prop2_det, prop2_trace, prop2_trace_commutative, pv_det,
                       pv_trace, spectrum, spectrum_via_roots, trace_identity, zeta_bar)
from jacobidet.identities import prop2_trace_quadrature, prop2_trace_series

from conftest import magnetic_spectrum, oscillator_spectrum, random_sampled

A8 = np.diag([1.0, 2.0])
R8 = np.array([[2.0, 1.0], [1.0, 3.0]])


def test_c1_oscillator_det(verdict):
    p = build_oscillator(1.0)
    t0 = time.perf_counter()
    val = det_identity(p, steps=4096)
    dt = time.perf_counter() - t0
    err = abs(val - math.sin(1.0))
    ok = err < 1e-8 and dt < 1.0
    verdict(1, "oscillator det(I+K) = sin 1 at 4096 steps, < 1 s", ok,
            f"err={err:.2e} time={dt:.3f}s")
    assert ok


def test_c2_oscillator_trace(verdict):
    err = abs(trace_identity(build_oscillator(1.0), steps=4096) + 1.0 / 6.0)
    verdict(2, "oscillator tr K = -1/6", err < 1e-8, f"err={err:.2e}")
    assert err < 1e-8


def test_c3_oscillator_galerkin(verdict):
    t0 = time.perf_counter()
    rep = spectrum(build_oscillator(1.0), 1024)
    dt = time.perf_counter() - t0
    k = np.arange(1, 6)
    exact = -1.0 / (math.pi * k) ** 2
    rel = float(np.max(np.abs(rep.neg[:5] - exact) / np.abs(exact)))
    pv = pv_det(oscillator_spectrum(1.0, 4096))
    pv_err = abs(pv.estimate - math.sin(1.0))
    ok = rel < 1e-2 and dt < 30.0 and pv.converged and pv_err < 1e-3
    verdict(3, "oscillator Galerkin: first 5 eigenvalues, pv det at N=4096, < 30 s", ok,
            f"max_rel={rel:.2e} time={dt:.2f}s pv_err={pv_err:.2e} status={pv.status}")
    assert ok


def test_c4_magnetic_pairs(verdict):
    rep = magnetic_spectrum(1.0, 4096)
    k = np.arange(1, 6)
    pos_gap = np.abs(rep.pos[0:10:2] - rep.pos[1:10:2])
    neg_gap = np.abs(rep.neg[0:10:2] - rep.neg[1:10:2])
    gap = float(max(pos_gap.max(), neg_gap.max()))
    # pairs sit near +-1/(pi k); 2e-2 relative leaves room for discretisation
    near = float(np.max(np.abs(rep.pos[0:10:2] * math.pi * k - 1.0)))
    d = pv_det(rep)
    t = pv_trace(rep)
    d_err = abs(d.estimate - math.sin(1.0) ** 2)
    t_err = abs(t.estimate)
    ok = gap < 1e-6 and near < 2e-2 and d_err < 1e-3 and t_err < 1e-6
    verdict(4, "magnetic pairs +-1/(pi n) x2, pv det = sin^2 1, pv trace = 0", ok,
            f"pair_gap={gap:.2e} rel_to_1/(pi n)={near:.2e} det_err={d_err:.2e} trace={t_err:.2e}")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_c5_capacity(verdict, r):
    p = build_magnetic(r)
    N = 4096
    rep = magnetic_spectrum(r, N)
    integral = zeta_bar(p, 1024).integral
    cap = capacity_fit(rep, integral_zeta=integral, size=p.m * N - p.d)
    gaps = [abs(cap.fitted_slope_pos - 2 * r) / (2 * r), abs(cap.fitted_slope_neg - 2 * r) / (2 * r)]
    ok = abs(integral - 2 * r) < 1e-12 and max(gaps) < 0.05
    verdict(5, f"magnetic r={r:g} capacity slopes within 5% of 2r", ok,
            f"slope_pos={cap.fitted_slope_pos:.4f} slope_neg={cap.fitted_slope_neg:.4f} "
            f"int_zeta={integral:.4f} window={cap.window}")
    assert ok


def test_c6_characteristic_roots(verdict):
    p = build_oscillator(1.0)
    scan = spectrum_via_roots(p, 1.0, 15.0, steps=4096, grid=256)
    first = scan.roots[0]
    gal = oscillator_spectrum(1.0, 1024).neg[0]
    err = abs(first.s - math.pi ** 2)
    rel = abs(first.alpha - gal) / abs(gal)
    ok = err < 1e-6 and first.multiplicity == 1 and rel < 1e-2
    verdict(6, "first root of det Q_1^s = pi^2, simple, matches Galerkin", ok,
            f"err={err:.2e} mult={first.multiplicity} rel_vs_galerkin={rel:.2e}")
    assert ok


def test_c7_euler_interpolation(verdict):
    chk = euler_interp(1.0, 1.0, 100_000)
    target = math.sin(1.0) / math.sinh(1.0)
    ok = abs(chk.rhs - target) < 1e-15 and chk.abs_gap < 1e-4
    verdict(7, "Euler interpolation a=b=1, 1e5 terms", ok, f"gap={chk.abs_gap:.2e}")
    assert ok


def test_c8_prop2_det(verdict):
    chk = prop2_det(A8, R8, 100_000)
    jac = det_identity(build_lti(A8, R8), steps=4096)
    cross = abs(chk.rhs - jac)
    ok = chk.abs_gap < 1e-4 and cross < 1e-6
    verdict(8, "determinant identity series = closed form = Jacobi route", ok,
            f"series_gap={chk.abs_gap:.2e} rhs_vs_jacobi={cross:.2e} value={chk.rhs:.10f}")
    assert ok


def test_c9_prop2_trace_commutative(verdict):
    A, R = np.array([[1.0]]), np.array([[2.0]])
    series = prop2_trace_series(A, R, 100_000)
    quad = prop2_trace_quadrature(A, R, 4096)
    closed = prop2_trace_commutative(A, R)
    exact = 1.0 / math.tanh(1.0) - 1.0
    vals = [series, quad, closed]
    gap = max(abs(x - y) for x in vals for y in vals)
    ok = gap < 1e-5 and abs(closed - exact) < 1e-12
    verdict(9, "trace identity A=1, R=2: series, quadrature, coth 1 - 1", ok,
            f"max_pairwise={gap:.2e} closed_err={abs(closed - exact):.1e}")
    assert ok


def _examples():
    return [build_oscillator(1.0), build_magnetic(1.0), build_lti(A8, R8), random_sampled()]


def test_c10_properties(verdict):
    worst_sympl = 0.0
    worst_lemma = 0.0
    for p in _examples():
        for s in np.linspace(-5.0, 5.0, 11):
            worst_sympl = max(worst_sympl, flow(p, float(s), steps=1024).symplectic_defect())
        for s in (-2.0, 0.5, 3.0):
            worst_lemma = max(worst_lemma, lemma1_defect(p, s, steps=1024))
    p = random_sampled()
    q = normalize(p)
    det_gap = abs(det_identity(p, 1024) - det_identity(q, 1024))
    tr_gap = abs(trace_identity(p, 1024) - trace_identity(q, 1024))
    a, b = spectrum(p, 128), spectrum(q, 128)
    spec_gap = float(max(np.max(np.abs(a.pos - b.pos)), np.max(np.abs(a.neg - b.neg))))
    ok = worst_sympl < 1e-9 and worst_lemma < 1e-6 and max(det_gap, tr_gap, spec_gap) < 1e-9
    verdict(10, "symplecticity, variation identity, normalisation invariance", ok,
            f"sympl={worst_sympl:.1e} lemma={worst_lemma:.1e} det={det_gap:.1e} "
            f"trace={tr_gap:.1e} spectrum={spec_gap:.1e}")
    assert ok
