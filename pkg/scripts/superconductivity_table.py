"""Status, size, online time and speedup for the three superconductivity splittings.

    python3 scripts/superconductivity_table.py --level 6 --out results/superconductivity.csv
"""
import argparse
import csv
import sys
from pathlib import Path

from egfem.bench import BenchConfig, run_benchmark

METHODS = {
    "a": ("sga", "gfem", "egfem-p2", "egfem-i4"),
    "b": ("sga", "gfem", "egfem-p3", "egfem-i4"),
    "c": ("sga", "gfem", "egfem-p3", "egfem-i4"),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--level", type=int, default=6)
    ap.add_argument("--nus", default="1,1e-2,1e-3")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--out", default="results/superconductivity.csv")
    args = ap.parse_args(argv)

    rows = []
    for form, methods in METHODS.items():
        for nu in (float(v) for v in args.nus.split(",")):
            cfg = BenchConfig("superconductivity", methods, (args.level,), repeats=args.repeats,
                              params={"nu": nu, "formulation": form})
            for r in run_benchmark(cfg).rows:
                ok = r.status == "converged"
                speed = f"{r.speedup_vs_sga:.2f}" if ok and r.speedup_vs_sga else "-"
                rows.append([form, nu, r.method, r.system_size, r.status, r.iterations,
                             f"{r.online_s:.4f}" if ok else "-", speed])
                print(" ".join(str(c) for c in rows[-1]), file=sys.stderr)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["formulation", "nu", "method", "size", "status", "iterations", "online_s", "speedup"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
