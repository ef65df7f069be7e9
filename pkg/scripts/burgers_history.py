"""Relative L2 error over time for every Burgers variant.

    python3 scripts/burgers_history.py --level 5 --out results/burgers_history.csv
"""
import argparse
import csv
from pathlib import Path

from egfem.bench import compute_l2_error
from egfem.elements import P1, build_space
from egfem.problems import burgers_problem
from egfem.solver import semi_implicit_burgers

VARIANTS = [("sga", "sga", None), ("tensor-sga", "tensor-sga", None), ("gfem", "gfem", None),
            ("egfem-p2", "egfem", "P2"), ("egfem-i3", "egfem", "I3")]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--level", type=int, default=5)
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--dt", type=float, default=1e-2)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--every", type=int, default=10, help="record every n-th step")
    ap.add_argument("--out", default="results/burgers_history.csv")
    args = ap.parse_args(argv)

    problem = burgers_problem(args.nu, args.T, args.dt)
    V = build_space(problem.mesh(args.level), P1)
    table = {}
    for name, variant, W in VARIANTS:
        traj = semi_implicit_burgers(variant, problem, V, W=W, keep_states=True)
        for n in range(0, len(traj.times), args.every):
            t = traj.times[n]
            exact = lambda x, t=t: problem.exact(x, t)  # noqa: E731
            table.setdefault(round(t, 12), {})[name] = compute_l2_error(traj.states[n], V, exact).absolute
        print(f"{name}: online {traj.timings['online']:.3f}s")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    names = [v[0] for v in VARIANTS]
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + names)
        for t in sorted(table):
            w.writerow([f"{t:g}"] + [format(table[t][n], ".6e") for n in names])
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
