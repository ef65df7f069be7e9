import json
import math
import os
import subprocess
import sys
import tempfile

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from egfem.bench import (
    COLUMNS,
    BenchConfig,
    BenchReport,
    BenchRow,
    compute_l2_error,
    emit_report,
    format_report,
    parse_levels,
    read_report,
    run_benchmark,
)
from egfem.cli import main
from egfem.elements import P1, build_space
from egfem.mesh import generate_unit_square


def sin_exact(x):
    return np.sin(2 * np.pi * x[..., 0]) * np.sin(2 * np.pi * x[..., 1])


def test_l2_error_examples():
    V = build_space(generate_unit_square(4), P1)
    lin = lambda x: 1 + x[..., 0] - 2 * x[..., 1]  # noqa: E731
    assert compute_l2_error(V.interpolate(lin), V, lin).absolute <= 1e-14
    e = compute_l2_error(np.zeros(V.n_dofs), V, lambda x: np.ones(x.shape[:-1]))
    assert e.absolute == pytest.approx(1.0, abs=1e-14) and e.relative_defined
    z = compute_l2_error(np.ones(V.n_dofs), V, lambda x: np.zeros(x.shape[:-1]))
    assert not z.relative_defined and z.relative == z.absolute == pytest.approx(1.0)


def test_interpolation_error_is_second_order():
    errs = []
    for n in (8, 16, 32, 64):
        V = build_space(generate_unit_square(n), P1)
        errs.append(compute_l2_error(V.interpolate(sin_exact), V, sin_exact).absolute)
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios >= 3.6) & (ratios <= 4.4))


def test_parse_levels():
    assert parse_levels("5") == (5,)
    assert parse_levels("3,4, 5") == (3, 4, 5)
    assert parse_levels("3-6") == (3, 4, 5, 6)
    with pytest.raises(ValueError):
        parse_levels("6-3")


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig("quadratic", ("newton",), (2,))
    with pytest.raises(ValueError):
        BenchConfig("plaplace", ("gfem",), (2,))
    with pytest.raises(ValueError):
        BenchConfig("quadratic", ("sga",), (2,), repeats=0)
    with pytest.raises(ValueError):
        BenchConfig("quadratic", ("sga",), (2,), fmt="xml")
    with pytest.raises(ValueError):
        BenchConfig("quadratic", ("sga",), (2,), tol=0)
    assert BenchConfig("quadratic", ("SGA",), ("2",)).methods == ("sga",)


@pytest.fixture(scope="module")
def quad_report():
    cfg = BenchConfig("quadratic", ("sga", "egfem-p2", "egfem-i3", "gfem"), (2, 3), repeats=1)
    return run_benchmark(cfg)


def test_report_contents(quad_report):
    rows = quad_report.rows
    assert len(rows) == 8
    sga2, p2 = quad_report.by("sga", 2)[0], quad_report.by("egfem-p2", 2)[0]
    assert sga2.system_size == 25 and p2.system_size == 25 + 81
    assert quad_report.by("gfem", 3)[0].system_size == 2 * 81
    for r in rows:
        assert r.status == "converged"
        assert r.total_s == pytest.approx(r.offline_s + r.online_s)
        base = quad_report.by("sga", r.level)[0]
        assert r.speedup_vs_sga == pytest.approx(base.online_s / r.online_s)
    for level in (2, 3):
        ref = quad_report.by("sga", level)[0].rel_l2_error
        for m in ("egfem-p2", "egfem-i3"):
            assert abs(quad_report.by(m, level)[0].rel_l2_error - ref) <= 1e-10


def test_no_speedup_without_baseline():
    report = run_benchmark(BenchConfig("linear", ("egfem-p2",), (2,), repeats=1))
    (row,) = report.rows
    assert row.speedup_vs_sga is None and row.iterations == 1
    assert row.rel_l2_error < 0.1 and row.system_size == 25


def test_superconductivity_b_fails_for_small_nu():
    cfg = BenchConfig("superconductivity", ("sga", "egfem-p3", "egfem-i4"), (3,),
                      max_iter=100, repeats=1, params={"nu": 1e-3, "formulation": "b"})
    assert all(r.status != "converged" for r in run_benchmark(cfg).rows)


def test_burgers_rows():
    cfg = BenchConfig("burgers", ("sga", "egfem-i3"), (2,), repeats=1, params={"T": 0.1})
    rows = run_benchmark(cfg).rows
    assert [r.iterations for r in rows] == [10, 10]
    assert rows[1].system_size == 25 + 32 * 4


def test_csv_round_trip(tmp_path, quad_report):
    path = emit_report(quad_report, tmp_path / "r.csv")
    assert read_report(path) == quad_report


def test_json_round_trip(tmp_path, quad_report):
    path = emit_report(quad_report, tmp_path / "r.json", "json")
    data = json.loads(path.read_text())
    assert data["config"]["problem"] == "quadratic"
    assert read_report(path) == quad_report


def test_empty_report_is_header_only():
    assert format_report(BenchReport()) == ",".join(COLUMNS) + "\n"


floats = st.floats(allow_nan=True, allow_infinity=False, width=64)


@given(st.integers(0, 9), st.integers(0, 10**6), floats, floats, st.one_of(st.none(), floats))
def test_one_row_round_trip(level, size, t, err, speed):
    row = BenchRow("quadratic", "egfem-p2", level, size, 3, "converged", t, t, t, speed, err)
    report = BenchReport([row])
    lines = format_report(report).splitlines()
    assert len(lines) == 2 and len(lines[1].split(",")) == 11
    with tempfile.TemporaryDirectory() as d:
        path = emit_report(report, os.path.join(d, "one.csv"))
        assert read_report(path) == report


def test_error_rows_do_not_stop_the_run():
    cfg = BenchConfig("superconductivity", ("tensor-sga", "sga"), (1,), repeats=1,
                      params={"formulation": "b"})
    rows = run_benchmark(cfg).rows
    assert rows[0].status.startswith("error") and rows[1].status == "converged"
    assert math.isnan(rows[0].online_s) and rows[0].speedup_vs_sga is None


# --- command line -----------------------------------------------------------------------------
def test_cli_bench_to_file(tmp_path, capsys):
    out = tmp_path / "b.json"
    rc = main(["bench", "--problem", "quadratic", "--method", "sga,egfem-p2", "--levels", "2",
               "--repeats", "1", "--out", str(out), "--format", "json", "--quiet"])
    assert rc == 0
    report = read_report(out)
    assert [r.method for r in report.rows] == ["sga", "egfem-p2"]


def test_cli_bench_stdout(capsys):
    rc = main(["bench", "--problem", "linear", "--method", "sga", "--levels", "1-2",
               "--repeats", "1", "--tol", "1e-12", "--quad-degree", "2"])
    captured = capsys.readouterr()
    assert rc == 0
    lines = captured.out.splitlines()
    assert lines[0] == ",".join(COLUMNS) and len(lines) == 3
    assert "level=2" in captured.err


def test_cli_errors(capsys):
    assert main(["bench", "--problem", "plaplace", "--method", "gfem", "--levels", "1"]) == 2
    assert "not applicable" in capsys.readouterr().err
    assert main(["mesh-info", "--msh", "/nonexistent.msh"]) == 2


def test_cli_mesh_info(tmp_path, capsys):
    msh = tmp_path / "t.msh"
    msh.write_text("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n"
                   "$EndNodes\n$Elements\n4\n1 1 2 5 1 1 2\n2 1 2 5 1 2 3\n3 1 2 6 1 3 1\n"
                   "4 2 2 1 1 1 2 3\n$EndElements\n")
    assert main(["mesh-info", "--msh", str(msh), "--neumann", "6"]) == 0
    out = capsys.readouterr().out
    assert "triangles       1" in out and "1 neumann" in out
    assert main(["mesh-info", "--square", "4"]) == 0
    assert "triangles       32" in capsys.readouterr().out


def test_cli_verify_subset(capsys):
    assert main(["verify", "--only", "tensor,quadrature"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2 and all(line.startswith("PASS") for line in out)


def test_thread_env_and_entry_point(tmp_path):
    env = dict(os.environ, EGFEM_NUM_THREADS="1")
    proc = subprocess.run([sys.executable, "-c",
                           "import os, egfem.cli as c; c._configure_threads(); "
                           "print(os.environ['OMP_NUM_THREADS'])"],
                          env=env, capture_output=True, text=True, check=True)
    assert proc.stdout.strip() == "1"
    bad = dict(os.environ, EGFEM_NUM_THREADS="zero")
    proc = subprocess.run([sys.executable, "-m", "egfem", "mesh-info", "--square", "1"],
                          env=bad, capture_output=True, text=True)
    assert proc.returncode != 0 and "EGFEM_NUM_THREADS" in proc.stderr
