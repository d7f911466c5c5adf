"""Relative error of the kappa = 0 run against sqrt(z^2 + 4t) for both Loewner schemes.

Writes a CSV (scheme, dt, max_rel_error) to stdout.
"""

import argparse
import csv
import sys

from sle_lab.suites import check_kappa_zero


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, default=0.25)
    ap.add_argument("--dts", type=float, nargs="+", default=[4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4, 1e-4])
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["scheme", "dt", "max_rel_error"])
    for scheme in ("euler", "trapezoid"):
        for dt in args.dts:
            r = check_kappa_zero(T=args.T, dt=dt, scheme=scheme)
            w.writerow([scheme, dt, f"{r.detail['max_rel_error']:.3e}"])


if __name__ == "__main__":
    main()
