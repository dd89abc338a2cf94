"""Fluctuation diagnostics: limit variance drift and normality metrics.

Part 1 needs no sampling: the exact sigma^2(N) = a^2 c^2 sum_k p0(2k, 0)
along a dyadic grid, with the d=2 target 1/pi.  Part 2 (optional, --replicas)
samples a_N (Z - 1) and prints moment/KS diagnostics for the centered sum,
its linear chaos part and the remainder.

    python scripts/run_clt.py --dim 2 --grid-pow 6 12
    python scripts/run_clt.py --dim 2 --eps 0.25 --replicas 2000 --N 256
"""

import argparse
import math
import sys

from polymer_lab import fluctuation, harness


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--eps", type=float, default=0.25)
    ap.add_argument("--grid-pow", type=int, nargs=2, default=[6, 12])
    ap.add_argument("--replicas", type=int, default=0)
    ap.add_argument("--N", type=int, default=256)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    target = fluctuation.SIGMA2_LIMIT[args.dim]
    print(f"# sigma^2(N) drift, d={args.dim}, target {target:.6f}")
    lo, hi = args.grid_pow
    for p in range(lo, hi + 1):
        n = 2 ** p
        s2 = fluctuation.limit_variance(args.dim, n)
        print(f"2^{p:<3d} {s2:.6f}  |sigma2-target| {abs(s2 - target):.6f}")

    if args.replicas > 0:
        config = harness.ExperimentConfig(
            d=args.dim,
            eps=args.eps,
            n_grid=(args.N,),
            replicas=args.replicas,
            master_seed=args.seed,
            workers=args.workers,
        )
        results = harness.run_replicas(config)
        for row in harness.normality_report(results, config.rule()):
            print(f"\n# N={row.N} c={row.c:.5f} a={row.a:.4f} R={row.count}")
            for part in ("centered", "linear", "remainder"):
                m = row.metrics[part]
                ks = "-" if m["ks"] is None else f"{m['ks']:.4f}"
                print(
                    f"{part:>9s}: var {m['variance']:.4f} (target {m['sigma2_target']:.4f})"
                    f"  skew {m['skewness']:+.3f}  exkurt {m['excess_kurtosis']:+.3f}  KS {ks}"
                )
    return 0


if __name__ == "__main__":
    sys.exit(main())
