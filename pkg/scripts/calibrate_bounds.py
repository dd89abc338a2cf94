"""Measure the geometric-domination constants of the collision expansions.

For E Z^2 = 1 + sum_n T_n and E K^2 = N^2 (1 + sum_n T_n / N^2), the n-th
order term is bounded by (A s)^n with s = c^2 sqrt(N) (d=1) or c^2 ln N
(d=2).  This prints the smallest A that dominates the computed totals and
the largest per-order constant max_n (T_n)^{1/n} / s, along the scaling
rule's own grid.  Both should stay O(1) and s A < 1 for the series to close.

    python scripts/calibrate_bounds.py --dim 1 --eps 0.05 --grid 64 256 1024
"""

import argparse
import sys

from polymer_lab import fluctuation, moments


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--eps", type=float, default=0.05)
    ap.add_argument("--grid", type=int, nargs="+", default=[64, 256, 1024])
    args = ap.parse_args()

    rule = fluctuation.scaling(args.dim, args.eps)
    rows = moments.bound_calibration(args.dim, args.grid, rule)
    print(f"# d={args.dim} eps={args.eps}")
    print("#    N        c        s     A_tot(Z2)  A_ord(Z2)  A_tot(K2)  A_ord(K2)")
    for r in rows:
        print(
            f"{r.N:6d}  {r.c:.5f}  {r.s:.5f}  {r.a_total_z2:9.4f}  {r.a_order_z2:9.4f}"
            f"  {r.a_total_k2:9.4f}  {r.a_order_k2:9.4f}"
        )
    worst = max(max(r.s * r.a_order_z2, r.s * r.a_order_k2) for r in rows)
    print(f"# worst s*A_order = {worst:.4f} (must stay < 1)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
