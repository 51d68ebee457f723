"""Run the identity suites over several seeds and report the worst residual per suite.

Usage: python3 scripts/run_identities.py [--seeds 0 1 2] [--points N]
"""
import argparse
import math

from fmorph import identities


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--points", type=int, default=200)
    args = ap.parse_args()
    worst = {s: 0.0 for s in identities.SUITES}
    failures = []
    for seed in args.seeds:
        for row in identities.run("all", seed, args.points):
            if row.status == "FAIL":
                failures.append((seed, row))
            if not math.isnan(row.residual):
                worst[row.suite] = max(worst[row.suite], row.residual)
    for suite, value in worst.items():
        print(f"{suite:<5} worst residual {value:.3e} over seeds {args.seeds}")
    for seed, row in failures:
        print(f"FAIL seed {seed}: {row.suite} {row.case} {row.residual:.3e}")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
