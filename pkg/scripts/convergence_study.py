"""Error and online-time sweep over mesh levels for one problem and several methods.

    python3 scripts/convergence_study.py quadratic --levels 3-6
    python3 scripts/convergence_study.py biochemical --methods sga,gfem,egfem-p0,egfem-p2,egfem-i2
"""
import argparse
import math
from pathlib import Path

from egfem.bench import BenchConfig, emit_report, parse_levels, run_benchmark
from egfem.problems import get_problem

DEFAULT_METHODS = {
    "quadratic": "sga,tensor-sga,gfem,egfem-p2,egfem-i3",
    "quadratic-trig": "sga,tensor-sga,gfem,egfem-p2,egfem-i3",
    "burgers": "sga,tensor-sga,gfem,egfem-p2,egfem-i3",
    "superconductivity": "sga,gfem,egfem-p2,egfem-i4",
    "biochemical": "sga,gfem,egfem-p0,egfem-p2,egfem-i2",
    "plaplace": "sga,egfem-p0,egfem-i1",
    "minimal-surface": "sga,egfem-p0,egfem-i1",
}


def observed_orders(report, method):
    rows = sorted(report.by(method), key=lambda r: r.level)
    return [math.log2(a.rel_l2_error / b.rel_l2_error) for a, b in zip(rows, rows[1:])]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem")
    ap.add_argument("--methods", default=None)
    ap.add_argument("--levels", default="3-6")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)

    spec = get_problem(args.problem)
    methods = (args.methods or DEFAULT_METHODS[args.problem]).split(",")
    cfg = BenchConfig(args.problem, tuple(methods), parse_levels(args.levels), repeats=args.repeats)
    report = run_benchmark(cfg)
    out = Path(args.out or f"results/convergence_{args.problem}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_report(report, out)

    print(f"{spec.name}: rows written to {out}")
    print(f"{'method':<12}{'level':>6}{'size':>8}{'iters':>6}{'online_s':>11}{'speedup':>9}{'rel_l2':>12}")
    for r in report.rows:
        speed = f"{r.speedup_vs_sga:.2f}" if r.speedup_vs_sga else "-"
        print(f"{r.method:<12}{r.level:>6}{r.system_size:>8}{r.iterations:>6}"
              f"{r.online_s:>11.4f}{speed:>9}{r.rel_l2_error:>12.4e}")
    for m in methods:
        orders = observed_orders(report, m)
        if orders:
            print(f"observed order {m}: " + ", ".join(f"{o:.2f}" for o in orders))


if __name__ == "__main__":
    main()
