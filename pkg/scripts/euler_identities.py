"""Series against closed forms for the Euler-type identities.

Prints the tail-corrected partial products and sums at growing n_terms,
then the three routes to det(I+K) for a time-invariant example.
"""
import argparse
import math

import numpy as np

from jacobidet import build_lti, det_identity, euler_interp, prop2_det, trace_identity
from jacobidet.identities import (prop2_trace_commutative, prop2_trace_quadrature,
                                  prop2_trace_series)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, default=1.0)
    ap.add_argument("--b", type=float, default=1.0)
    args = ap.parse_args()

    print(f"euler_interp a={args.a} b={args.b}")
    print(f"{'n_terms':>9} {'lhs':>20} {'gap':>10}")
    for n in (10, 100, 1_000, 10_000, 100_000):
        chk = euler_interp(args.a, args.b, n)
        print(f"{n:>9} {chk.lhs:>20.15f} {chk.abs_gap:>10.2e}")
    print(f"{'closed':>9} {chk.rhs:>20.15f}")

    A = np.diag([1.0, 2.0])
    R = np.array([[2.0, 1.0], [1.0, 3.0]])
    p = build_lti(A, R)
    det = prop2_det(A, R, 100_000)
    print("\ndet(I+K), A=diag(1,2), R=[[2,1],[1,3]]")
    print(f"  series      {det.lhs:.12f}")
    print(f"  closed form {det.rhs:.12f}")
    print(f"  Jacobi      {det_identity(p):.12f}")
    print("tr K")
    print(f"  series      {-prop2_trace_series(A, R, 100_000):.12f}")
    print(f"  quadrature  {-prop2_trace_quadrature(A, R):.12f}")
    print(f"  Jacobi      {trace_identity(p):.12f}")

    A1, R1 = np.array([[1.0]]), np.array([[2.0]])
    print("\ncommuting case A=1, R=2 (target coth 1 - 1)")
    print(f"  series      {prop2_trace_series(A1, R1, 100_000):.12f}")
    print(f"  quadrature  {prop2_trace_quadrature(A1, R1):.12f}")
    print(f"  closed form {prop2_trace_commutative(A1, R1):.12f}")
    print(f"  coth 1 - 1  {1 / math.tanh(1) - 1:.12f}")


if __name__ == "__main__":
    main()
