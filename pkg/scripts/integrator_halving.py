"""Coefficient-Euler vs multiplicative discrepancy over a range of seeds.

Prints the ratio of mean squared discrepancies at dt and dt/2 per seed.
"""

import argparse

from sle_lab.suites import HALVING_RATIO, check_integrator_halving


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kappa", type=float, default=2.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--T", type=float, default=0.25)
    ap.add_argument("--paths", type=int, default=1000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()
    lo, hi = HALVING_RATIO
    print(f"accepted ratio range [{lo}, {hi}]")
    for seed in args.seeds:
        r = check_integrator_halving(args.kappa, args.dt, args.T, args.paths, seed)
        print(f"seed {seed}: ratio {r.detail['ratio']:.3f} per-coefficient {r.detail['per_coefficient']} "
              f"{'ok' if r.passed else 'outside range'} ({r.seconds:.0f}s)")


if __name__ == "__main__":
    main()
