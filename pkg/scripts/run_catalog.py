"""Classify every catalog map and print one summary line per entry.

Usage: python3 scripts/run_catalog.py [--points N] [--seed S] [--out DIR]
With --out, each Verdict is also written as DIR/<key>.json.
"""
import argparse
from pathlib import Path

from fmorph.verifier import SamplerConfig, run_catalog


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()
    cfg = SamplerConfig(count=args.points, seed=args.seed)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    print(f"{'entry':<22} {'tau_f resid':>11} {'hwc resid':>11} {'f-harm':>7} {'hwc':>5} {'morph':>6}  match")
    for entry, verdict, matched in run_catalog(cfg):
        a = verdict.aggregate
        print(f"{entry.key:<22} {a['max_f_tension_residual']:>11.2e} {a['max_hwc_residual']:>11.2e} "
              f"{a['is_f_harmonic']!s:>7} {a['is_hwc']!s:>5} {a['is_f_harmonic_morphism']!s:>6}  {matched}")
        if out:
            (out / f"{entry.key}.json").write_text(verdict.to_json())


if __name__ == "__main__":
    main()
