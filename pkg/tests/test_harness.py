import csv
import math

import numpy as np
import pytest

from gradedcaputo import cli, harness
from gradedcaputo.harness import (
    BudgetExceededError,
    ConvergenceReport,
    SweepConfig,
    check_budget,
    compute_eoc,
    emit_error_grid,
    estimate_cost,
    load_config,
    parse_config_text,
    preset,
    resolve_M,
    resolve_sweep_beta,
    run_single,
    run_sweep,
)
from gradedcaputo.pde import SchemeKind, max_abs_error, solve
from gradedcaputo.problems import fpde2


def test_eoc_basic():
    np.testing.assert_array_equal(compute_eoc([4.0, 1.0], [8, 16]), [np.nan, 2.0])
    assert compute_eoc([1.0, 1.0], [8, 16])[1] == 0.0
    out = compute_eoc([1.0, 0.0, math.nan, 0.5], [2, 4, 8, 16])
    assert np.all(np.isnan(out))


def test_eoc_of_printed_delay_errors():
    eoc = compute_eoc([3.61e-3, 6.39e-4, 1.13e-4, 1.99e-5], [64, 128, 256, 512])
    np.testing.assert_allclose(eoc[1:], 2.5, atol=0.01)


def test_eoc_rejects_gaps():
    with pytest.raises(ValueError):
        compute_eoc([1.0, 0.1], [8, 32])
    with pytest.raises(ValueError):
        compute_eoc([1.0], [8, 16])


def test_beta_and_M_rules():
    assert resolve_sweep_beta("optimal", SchemeKind.HL1_GRADED, 0.5) == 5.0
    assert resolve_sweep_beta("optimal", SchemeKind.L1_GRADED, 0.5) == 3.0
    assert resolve_sweep_beta("optimal-L1", SchemeKind.HL1_GRADED, 0.5) == 3.0
    assert resolve_sweep_beta(2.5, SchemeKind.HL1_UNIFORM, 0.5) == 1.0
    assert resolve_sweep_beta("4", SchemeKind.L1_GRADED, 0.5) == 4.0
    assert resolve_M("N", 16) == 16 and resolve_M("N2", 16) == 256 and resolve_M(12, 16) == 12
    with pytest.raises(ValueError):
        resolve_sweep_beta("best", SchemeKind.L1_GRADED, 0.5)


def test_config_parsing(tmp_path):
    text = """
    problem = fpde2
    schemes = hl1-graded, l1-graded   # two schemes
    alphas = 0.4; 0.8
    Ns = 2^4..2^6
    M = N2
    jobs = 2
    audit = no
    """
    kw = parse_config_text("\n".join(l.strip() for l in text.splitlines()))
    assert kw["Ns"] == (16, 32, 64) and kw["alphas"] == (0.4, 0.8)
    assert kw["schemes"] == ("hl1-graded", "l1-graded") and kw["audit"] is False
    p = tmp_path / "sweep.cfg"
    p.write_text("problem = fpde2\nNs = 8, 16\n")
    cfg = load_config(p, jobs=3)
    assert cfg.Ns == (8, 16) and cfg.jobs == 3
    with pytest.raises(ValueError, match="unknown config key"):
        parse_config_text("problme = fpde2\n")
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.cfg")


@pytest.mark.parametrize("kw", [dict(problem="nope"), dict(problem="fpde2", Ns=(16, 8)),
                                dict(problem="fpde2", Ns=(12, 24)), dict(problem="fpde2", jobs=0),
                                dict(problem="fpde2", schemes=())])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SweepConfig(**kw)


def test_cost_estimate_and_budget():
    assert estimate_cost("fpde2", SchemeKind.L1_GRADED, 0.5, 64, 64) == 0.5 * 64**3
    assert estimate_cost("fpde2", SchemeKind.HL1_GRADED, 0.5, 8, 4, 5.0, Nbar=10) == \
        (50 + 8 * 18) * 4
    assert estimate_cost("fdde1", SchemeKind.HL1_UNIFORM, 0.5, 64, 999) == 0.5 * 32**2 + 64 * 96
    with pytest.raises(BudgetExceededError):
        check_budget(preset("table3", full=True))
    assert check_budget(preset("table3", full=True), force=True) > harness.DEFAULT_BUDGET


def test_presets():
    cfg = preset("table4", full=True)
    assert cfg.Ns == (16, 32, 64, 128, 256) and cfg.problem == "nlex3"
    assert preset("table1").beta == 5.0
    with pytest.raises(ValueError):
        preset("table9")


def test_single_cell_equals_direct_solve():
    err, grid = run_single("fpde2", "hl1-graded", 0.6, 16)
    direct = solve(fpde2(0.6), 16, 16)
    np.testing.assert_array_equal(grid.values, direct.values)
    assert err == max_abs_error(direct, fpde2(0.6).exact)


def test_delay_cell_uses_total_intervals():
    err, sol = run_single("fdde1", "hl1-graded", 0.5, 64, beta=5.0)
    assert sol.info["N_per_segment"] == 32 and sol.times.size == 65
    assert err == pytest.approx(4.32e-3, rel=0.01)


def test_sweep_is_deterministic(tmp_path):
    base = dict(problem="fpde2", schemes=("hl1-graded", "l1-graded"), alphas=(0.5,), Ns=(8, 16))
    r1 = run_sweep(SweepConfig(out=str(tmp_path / "a"), **base))
    r2 = run_sweep(SweepConfig(out=str(tmp_path / "b"), jobs=2, **base))
    a = (tmp_path / "a" / "convergence.csv").read_bytes()
    assert a == (tmp_path / "b" / "convergence.csv").read_bytes()
    assert r1.all_ok and r1.audits_passed()
    rows = list(csv.reader(l for l in a.decode().splitlines() if not l.startswith("#")))
    assert rows[0][:3] == ["problem", "scheme", "alpha"] and len(rows) == 5
    assert r2.select("l1-graded", 0.5)[1].eoc == pytest.approx(
        math.log2(r2.errors("l1-graded", 0.5)[0] / r2.errors("l1-graded", 0.5)[1]))


def test_timings_column(tmp_path):
    run_sweep(SweepConfig(problem="fpde2", alphas=(0.5,), Ns=(4, 8), out=str(tmp_path),
                          deterministic=False, audit=False))
    header = [l for l in (tmp_path / "convergence.csv").read_text().splitlines()
              if not l.startswith("#")][0]
    assert header.endswith(",seconds")


def test_failed_cell_is_recorded(monkeypatch):
    real = harness.run_single

    def flaky(problem, scheme, alpha, N, *a, **kw):
        if N == 16:
            raise FloatingPointError("boom")
        return real(problem, scheme, alpha, N, *a, **kw)

    monkeypatch.setattr(harness, "run_single", flaky)
    rep = run_sweep(SweepConfig(problem="fpde2", alphas=(0.5,), Ns=(8, 16, 32)))
    assert not rep.all_ok
    bad = [r for r in rep.rows if not r.ok]
    assert len(bad) == 1 and "boom" in bad[0].message
    assert np.isnan(rep.eocs("hl1-graded", 0.5)[1:]).all()
    assert "failed" in rep.format_table()


def test_report_ordering_is_stable():
    cells = [harness.CellResult(SchemeKind.L1_GRADED, 0.5, 3.0, n, n, 1.0 / n, True)
             for n in (32, 8, 16)]
    cells.insert(1, harness.CellResult(SchemeKind.HL1_GRADED, 0.5, 5.0, 8, 8, 0.1, True))
    rep = ConvergenceReport.from_cells("fpde2", cells)
    assert [(r.scheme.value, r.N) for r in rep.rows] == [
        ("hl1-graded", 8), ("l1-graded", 8), ("l1-graded", 16), ("l1-graded", 32)]
    np.testing.assert_allclose(rep.eocs("l1-graded", 0.5)[1:], 1.0)


def test_error_grid_csv(tmp_path):
    spec = fpde2(0.5)
    grid = solve(spec, 8, 6)
    path = emit_error_grid(grid, spec.exact, tmp_path / "err.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["x", "t", "abs_err"] and len(rows) - 1 == 9 * 7
    vals = np.array([float(r[2]) for r in rows[1:]])
    assert vals.max() == pytest.approx(max_abs_error(grid, spec.exact), rel=1e-15)
    zero = emit_error_grid(grid, lambda x, t: grid.values, tmp_path / "zero.csv")
    assert all(float(r[2]) == 0.0 for r in list(csv.reader(zero.open()))[1:])


# {{{ command line


def _csv_rows(path):
    return [r for r in csv.reader(path.open()) if r and not r[0].startswith("#")]


def test_cli_solve(tmp_path):
    code = cli.main(["solve", "--problem", "fpde2", "--scheme", "l1-graded", "--alpha", "0.5",
                     "--N", "8", "--M", "4", "--out", str(tmp_path)])
    assert code == 0
    sol = _csv_rows(tmp_path / "solution.csv")
    assert sol[0] == ["x", "t", "value", "abs_err"] and len(sol) == 1 + 9 * 5
    assert len(_csv_rows(tmp_path / "errors.csv")) == 1 + 9 * 5


def test_cli_solve_delay_and_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("problem = fdde1\nscheme = hl1-graded\nalpha = 0.5\nbeta = 5\nN = 16\n")
    assert cli.main(["solve", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = _csv_rows(tmp_path / "solution.csv")
    assert rows[0][:2] == ["t", "y"] and len(rows) == 1 + 17


def test_cli_converge_and_exit_codes(tmp_path):
    args = ["converge", "--problem", "fpde2", "--alphas", "0.5", "--Ns", "8,16",
            "--schemes", "hl1-graded", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    assert len(_csv_rows(tmp_path / "convergence.csv")) == 3
    assert cli.main(["converge", "--preset", "table3", "--full", "--out", str(tmp_path)]) == 2


def test_cli_stability(tmp_path):
    ok = cli.main(["stability", "--scheme", "l1-graded", "--alpha", "0.5", "--N", "8",
                   "--out", str(tmp_path)])
    assert ok == 0
    rows = _csv_rows(tmp_path / "stability.csv")
    assert rows[0] == ["j", "t_j", "ratio"] and float(rows[1][2]) == 1.0


def test_cli_weights(tmp_path):
    assert cli.main(["weights", "--N", "8", "--beta", "2", "--alpha", "0.5", "--j", "3",
                     "--out", str(tmp_path)]) == 0
    kinds = {r[0] for r in _csv_rows(tmp_path / "weights.csv")[1:]}
    assert {"zeta", "xi", "gamma", "delta", "d"} <= kinds


def test_cli_bad_input(tmp_path, capsys):
    assert cli.main(["converge", "--problem", "fpde2", "--Ns", "8,24", "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit):
        cli.main(["solve", "--scheme", "nope"])


# }}}
