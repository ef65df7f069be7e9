"""Iteration histories of Picard and Newton on the extended formulation.

    python3 scripts/newton_vs_picard.py minimal-surface --space I1 --level 5
"""
import argparse

from egfem.elements import P1, build_space
from egfem.problems import get_problem
from egfem.solver import build_forms, newton_egfem, picard

DEFAULT_SPACE = {"quadratic": "P2", "superconductivity": "P2", "biochemical": "P0",
                 "plaplace": "P0", "minimal-surface": "I1"}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem", choices=sorted(DEFAULT_SPACE))
    ap.add_argument("--space", default=None)
    ap.add_argument("--level", type=int, default=5)
    args = ap.parse_args(argv)

    problem = get_problem(args.problem)
    W = args.space or DEFAULT_SPACE[args.problem]
    V = build_space(problem.mesh(args.level), P1)
    forms = build_forms(problem, V, f"egfem-{W.lower()}")
    p = picard(forms)
    n = newton_egfem(problem, V, W, forms=forms)
    print(f"{problem.name}, W={W}, N_u={V.n_dofs}, extended size={forms.size}")
    print(f"picard: {p.status.value} after {p.iterations} iterations, {p.timings['online']:.3f}s")
    print(f"newton: {n.status.value} after {n.iterations} iterations, {n.timings['online']:.3f}s")
    print(f"{'it':>4}{'picard':>12}{'newton':>12}")
    for i in range(max(len(p.history), len(n.history))):
        a = f"{p.history[i]:.3e}" if i < len(p.history) else ""
        b = f"{n.history[i]:.3e}" if i < len(n.history) else ""
        print(f"{i + 1:>4}{a:>12}{b:>12}")


if __name__ == "__main__":
    main()
