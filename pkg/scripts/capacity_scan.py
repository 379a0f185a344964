"""Capacity of the magnetic spectrum: fitted slopes of pi n alpha_n against 2r."""
import argparse
import time

from jacobidet import build_magnetic, capacity_fit, spectrum, zeta_bar


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=1024)
    ap.add_argument("--r", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    args = ap.parse_args()

    print(f"N={args.N}")
    print(f"{'r':>5} {'int zeta':>9} {'slope+':>9} {'slope-':>9} {'rel gap':>9} {'secs':>6}")
    for r in args.r:
        p = build_magnetic(r)
        t0 = time.perf_counter()
        rep = spectrum(p, args.N)
        integral = zeta_bar(p, 256).integral
        cap = capacity_fit(rep, integral_zeta=integral, size=p.m * args.N - p.d)
        gap = max(abs(cap.fitted_slope_pos - integral), abs(cap.fitted_slope_neg - integral)) / integral
        print(f"{r:>5g} {integral:>9.4f} {cap.fitted_slope_pos:>9.4f} "
              f"{cap.fitted_slope_neg:>9.4f} {gap:>9.2e} {time.perf_counter() - t0:>6.1f}")


if __name__ == "__main__":
    main()
