"""Benchmark harness: method x problem x mesh-level sweeps with offline/online timing."""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .assembly import _points, _rule, _values, _weights
from .elements import P1, ElementFamily, FunctionSpace, build_space
from .problems import ProblemSpec, get_problem
from .solver import (
    BURGERS_VARIANTS,
    IterOptions,
    Status,
    TimeSteppingError,
    build_forms,
    picard,
    semi_implicit_burgers,
)

METHODS = (
    "sga",
    "tensor-sga",
    "gfem",
    "egfem-p0",
    "egfem-p2",
    "egfem-p3",
    "egfem-i1",
    "egfem-i2",
    "egfem-i3",
    "egfem-i4",
)

COLUMNS = (
    "problem",
    "method",
    "level",
    "system_size",
    "iterations",
    "status",
    "offline_s",
    "online_s",
    "total_s",
    "speedup_vs_sga",
    "rel_l2_error",
)


class L2Error(NamedTuple):
    absolute: float
    relative: float
    relative_defined: bool


def compute_l2_error(u, V: FunctionSpace, exact, quad_degree: int = 6) -> L2Error:
    """``||u_h - exact||`` over the mesh and its ratio to ``||exact||``.

    When the exact solution has zero norm the relative error is reported as
    the absolute one and ``relative_defined`` is False.
    """
    rule = _rule(quad_degree, V)
    u = np.asarray(u, dtype=float)
    uq = u[V.cell_dofs] @ _values(V, rule).T
    ex = np.broadcast_to(exact(_points(V, rule)), uq.shape)
    w = _weights(V, rule)
    err = math.sqrt(float(np.sum(w * (uq - ex) ** 2)))
    norm = math.sqrt(float(np.sum(w * ex**2)))
    if norm == 0.0:
        return L2Error(err, err, False)
    return L2Error(err, err / norm, True)


@dataclass(frozen=True)
class BenchConfig:
    problem: str
    methods: tuple
    levels: tuple
    tol: float = 1e-12
    max_iter: int = 500
    quad_degree: Optional[int] = None
    repeats: int = 5
    params: dict = field(default_factory=dict)
    out: Optional[str] = None
    fmt: str = "csv"

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(m.lower() for m in self.methods))
        object.__setattr__(self, "levels", tuple(int(level) for level in self.levels))
        if not self.methods or not self.levels:
            raise ValueError("at least one method and one level are required")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if self.fmt not in ("csv", "json"):
            raise ValueError(f"unknown format {self.fmt!r}")
        if any(level < 0 for level in self.levels):
            raise ValueError("levels must be non-negative")
        spec = self.problem_spec()
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
            if m == "gfem" and not spec.gfem_applicable:
                raise ValueError(f"gfem is not applicable to {spec.name}")
        IterOptions(tol=self.tol, max_iter=self.max_iter)

    def problem_spec(self) -> ProblemSpec:
        return get_problem(self.problem, **self.params)


@dataclass
class BenchRow:
    problem: str
    method: str
    level: int
    system_size: int
    iterations: int
    status: str
    offline_s: float
    online_s: float
    total_s: float
    speedup_vs_sga: Optional[float]
    rel_l2_error: float


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    config: Optional[dict] = None

    def __eq__(self, other):
        if not isinstance(other, BenchReport) or len(self.rows) != len(other.rows):
            return False
        return all(_row_equal(a, b) for a, b in zip(self.rows, other.rows))

    def by(self, method: str, level: Optional[int] = None) -> list:
        return [r for r in self.rows if r.method == method and (level is None or r.level == level)]


def _row_equal(a: BenchRow, b: BenchRow) -> bool:
    for f in fields(BenchRow):
        x, y = getattr(a, f.name), getattr(b, f.name)
        if isinstance(x, float) and isinstance(y, float) and math.isnan(x) and math.isnan(y):
            continue
        if x != y:
            return False
    return True


def _median(values):
    return float(statistics.median(values))


def _run_stationary(spec, V, method, cfg):
    opts = IterOptions(tol=cfg.tol, max_iter=cfg.max_iter)
    offline, online, result, size = [], [], None, V.n_dofs
    for rep in range(cfg.repeats + 1):  # run 0 is a discarded warm-up
        t0 = time.perf_counter()
        forms = build_forms(spec, V, method, cfg.quad_degree)
        t_off = time.perf_counter() - t0
        result = picard(forms, opts)
        size = forms.size
        if rep:
            offline.append(t_off)
            online.append(result.timings["online"])
    return result.u, result.status.value, result.iterations, size, offline, online


def _burgers_variant(method):
    if method in ("sga", "tensor-sga", "gfem"):
        return method, None
    return "egfem", method[6:].upper()


def _run_burgers(spec, V, method, cfg):
    variant, W = _burgers_variant(method)
    offline, online, traj = [], [], None
    status = Status.CONVERGED.value
    for rep in range(cfg.repeats + 1):
        try:
            traj = semi_implicit_burgers(variant, spec, V, W=W, quad_degree=cfg.quad_degree)
        except TimeSteppingError:
            return np.full(V.n_dofs, np.nan), Status.DIVERGED.value, 0, V.n_dofs, [0.0], [0.0]
        if rep:
            offline.append(traj.timings["offline"])
            online.append(traj.timings["online"])
    steps = int(round(traj.times[-1] / spec.params["dt"]))
    size = V.n_dofs
    if variant in ("gfem", "egfem"):
        size += V.n_dofs if W is None else build_space(V.mesh, _family(W)).n_dofs
    return traj.final, status, steps, size, offline, online


def _family(label):
    return ElementFamily.parse(label)


def run_benchmark(cfg: BenchConfig, progress=None) -> BenchReport:
    """Run every (level, method) pair; failures are recorded in the row status."""
    spec = cfg.problem_spec()
    rows = []
    for level in cfg.levels:
        V = build_space(spec.mesh(level), P1)
        exact = spec.exact
        if spec.time_dependent and exact is not None:
            T = spec.params["T"]
            exact = lambda x, _e=spec.exact, _T=T: _e(x, _T)  # noqa: E731
        for method in cfg.methods:
            runner = _run_burgers if spec.time_dependent else _run_stationary
            try:
                u, status, iters, size, off, on = runner(spec, V, method, cfg)
            except ValueError as exc:
                rows.append(BenchRow(spec.name, method, level, 0, 0, f"error: {exc}",
                                     math.nan, math.nan, math.nan, None, math.nan))
                continue
            err = compute_l2_error(u, V, exact).relative if exact is not None else math.nan
            t_off, t_on = _median(off), _median(on)
            row = BenchRow(spec.name, method, level, int(size), int(iters), status,
                           t_off, t_on, t_off + t_on, None, float(err))
            rows.append(row)
            if progress is not None:
                progress(row)
    for row in rows:
        base = [r for r in rows if r.method == "sga" and r.level == row.level]
        if base and row.online_s > 0 and not math.isnan(row.online_s):
            row.speedup_vs_sga = base[0].online_s / row.online_s
    config = asdict(cfg)
    config["methods"], config["levels"] = list(cfg.methods), list(cfg.levels)
    return BenchReport(rows, config)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def format_report(report: BenchReport, fmt: str = "csv") -> str:
    """Serialize as CSV (header always present) or JSON (rows plus config echo)."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in report.rows:
            w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        rows = [{c: _json_value(getattr(r, c)) for c in COLUMNS} for r in report.rows]
        return json.dumps({"config": report.config, "rows": rows}, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_report(report: BenchReport, path, fmt: str = "csv") -> Path:
    path = Path(path)
    path.write_text(format_report(report, fmt))
    return path


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


_INT_COLS = ("level", "system_size", "iterations")
_FLOAT_COLS = ("offline_s", "online_s", "total_s", "rel_l2_error")


def _parse_row(raw: dict) -> BenchRow:
    vals = {}
    for c in COLUMNS:
        v = raw[c]
        if c in _INT_COLS:
            vals[c] = int(v)
        elif c in _FLOAT_COLS:
            vals[c] = float(v)
        elif c == "speedup_vs_sga":
            vals[c] = None if v in ("", None) else float(v)
        else:
            vals[c] = str(v)
    return BenchRow(**vals)


def read_report(path) -> BenchReport:
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        return BenchReport([_parse_row(r) for r in data["rows"]], data.get("config"))
    reader = csv.DictReader(text.splitlines())
    if tuple(reader.fieldnames or ()) != COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    return BenchReport([_parse_row(r) for r in reader])


def parse_levels(text: str) -> Sequence[int]:
    """``"5"``, ``"3,4,5"`` or ``"3-6"`` (inclusive)."""
    text = text.strip()
    if "-" in text:
        lo, hi = (int(t) for t in text.split("-", 1))
        if hi < lo:
            raise ValueError(f"empty level range {text!r}")
        return tuple(range(lo, hi + 1))
    return tuple(int(t) for t in text.split(",") if t.strip())


__all__ = [
    "METHODS",
    "COLUMNS",
    "L2Error",
    "compute_l2_error",
    "BenchConfig",
    "BenchRow",
    "BenchReport",
    "run_benchmark",
    "format_report",
    "emit_report",
    "read_report",
    "parse_levels",
]
