"""Error of each route against the exact oscillator values as resolution grows.

RK4 errors should fall by about 16x per doubling; Galerkin eigenvalue
errors by about 4x.  The oscillator trace integrand is polynomial in t,
so its Simpson error is zero at every resolution.
"""
import math

import numpy as np

from jacobidet import build_oscillator, det_identity, pv_det, spectrum, trace_identity

p = build_oscillator(1.0)

print("Jacobi route")
print(f"{'steps':>6} {'det err':>10} {'trace err':>10}")
for steps in (16, 32, 64, 128, 256, 512):
    e_det = abs(det_identity(p, steps) - math.sin(1.0))
    e_tr = abs(trace_identity(p, steps) + 1.0 / 6.0)
    print(f"{steps:>6} {e_det:>10.2e} {e_tr:>10.2e}")

print("\nGalerkin route")
print(f"{'N':>6} {'alpha_1 rel':>12} {'alpha_5 rel':>12} {'pv det err':>11} status")
exact = -1.0 / (math.pi * np.arange(1, 6)) ** 2
for N in (64, 128, 256, 512, 1024, 2048):
    rep = spectrum(p, N)
    rel = np.abs(rep.neg[:5] - exact) / np.abs(exact)
    pv = pv_det(rep)
    print(f"{N:>6} {rel[0]:>12.2e} {rel[4]:>12.2e} {abs(pv.estimate - math.sin(1)):>11.2e} {pv.status}")
