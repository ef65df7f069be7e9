"""Command-line entry point: ``bench``, ``mesh-info`` and ``verify``."""
from __future__ import annotations

import argparse
import os
import sys

THREADS_ENV = "EGFEM_NUM_THREADS"
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _configure_threads():
    # must run before numpy/scipy load their BLAS
    n = os.environ.get(THREADS_ENV)
    if n:
        if not n.isdigit() or int(n) < 1:
            raise SystemExit(f"{THREADS_ENV} must be a positive integer, got {n!r}")
        for var in _THREAD_VARS:
            os.environ[var] = n


def _bench(args) -> int:
    from .bench import BenchConfig, emit_report, format_report, parse_levels, run_benchmark

    params = {k: getattr(args, k) for k in ("nu", "formulation", "p", "sigma", "k", "dt", "T")
              if getattr(args, k) is not None}
    cfg = BenchConfig(
        problem=args.problem,
        methods=tuple(m.strip() for m in args.method.split(",") if m.strip()),
        levels=parse_levels(args.levels),
        tol=args.tol,
        max_iter=args.max_iter,
        quad_degree=args.quad_degree,
        repeats=args.repeats,
        params=params,
        out=args.out,
        fmt=args.format,
    )

    def progress(row):
        speed = "" if row.speedup_vs_sga is None else f" x{row.speedup_vs_sga:.2f}"
        print(f"{row.problem} {row.method} level={row.level} size={row.system_size} "
              f"iters={row.iterations} {row.status} online={row.online_s:.4f}s "
              f"err={row.rel_l2_error:.3e}{speed}", file=sys.stderr)

    report = run_benchmark(cfg, progress=None if args.quiet else progress)
    if args.out:
        emit_report(report, args.out, args.format)
    else:
        sys.stdout.write(format_report(report, args.format))
    return 0


def _mesh_info(args) -> int:
    from .mesh import DIRICHLET, NEUMANN, check_mesh, generate_unit_disk, generate_unit_square, read_msh

    if args.msh:
        mesh = read_msh(args.msh, neumann_groups=tuple(args.neumann or ()))
    elif args.disk is not None:
        mesh = generate_unit_disk(args.disk)
    else:
        mesh = generate_unit_square(args.square)
    check_mesh(mesh)
    tags = list(mesh.boundary_tags)
    print(f"vertices        {mesh.n_vertices}")
    print(f"triangles       {mesh.n_triangles}")
    print(f"edges           {mesh.n_edges}")
    print(f"boundary edges  {len(tags)} ({tags.count(DIRICHLET)} {DIRICHLET}, {tags.count(NEUMANN)} {NEUMANN})")
    print(f"area            {mesh.total_area():.17g}")
    print(f"min cell area   {mesh.areas.min():.6g}")
    return 0


def _verify(args) -> int:
    from .verify import CHECKS, run_all

    names = args.only.split(",") if args.only else None
    if names:
        unknown = set(names) - set(CHECKS)
        if unknown:
            raise SystemExit(f"unknown check(s) {sorted(unknown)}; choose from {sorted(CHECKS)}")
    results = run_all(names)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="egfem", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a method x level sweep and write a CSV/JSON report")
    b.add_argument("--problem", required=True)
    b.add_argument("--method", required=True, help="comma-separated method ids")
    b.add_argument("--levels", required=True, help='"5", "3,4,5" or "3-6"')
    b.add_argument("--tol", type=float, default=1e-12)
    b.add_argument("--max-iter", type=int, default=500)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--quad-degree", type=int, default=None)
    b.add_argument("--out", default=None)
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--nu", type=float)
    b.add_argument("--formulation", choices=("a", "b", "c"))
    b.add_argument("--p", type=float)
    b.add_argument("--sigma", type=float)
    b.add_argument("--k", type=float)
    b.add_argument("--dt", type=float)
    b.add_argument("--T", type=float)
    b.add_argument("--quiet", action="store_true")
    b.set_defaults(func=_bench)

    m = sub.add_parser("mesh-info", help="summarize a mesh")
    g = m.add_mutually_exclusive_group(required=True)
    g.add_argument("--msh", help="Gmsh 2.2 ASCII file")
    g.add_argument("--square", type=int, help="structured unit square with n x n cells")
    g.add_argument("--disk", type=int, help="unit disk at refinement level")
    m.add_argument("--neumann", action="append", type=int, help="physical group id tagged Neumann")
    m.set_defaults(func=_mesh_info)

    v = sub.add_parser("verify", help="run the oracle suites")
    v.add_argument("--only", help="comma-separated subset of checks")
    v.set_defaults(func=_verify)
    return p


def main(argv=None) -> int:
    _configure_threads()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
