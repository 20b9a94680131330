import csv
import io

import pytest

from bfpmg import analysis as an
from bfpmg.cli import ConfigError, main, parse_config_text, parse_levels
from bfpmg.fem import ProblemSpec
from bfpmg.multigrid import level_data


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_parse_levels():
    assert parse_levels("4..7") == [4, 5, 6, 7]
    assert parse_levels("1,3") == [1, 3]
    with pytest.raises(ConfigError):
        parse_levels("5..2")


def test_parse_config_text():
    cfg = parse_config_text("# comment\npde = biharmonic\n\np=3,4  # degrees\n")
    assert cfg == {"pde": "biharmonic", "p": "3,4"}
    with pytest.raises(ConfigError):
        parse_config_text("nonsense")
    with pytest.raises(ConfigError):
        parse_config_text("colour = red")


def test_quant_error_header_and_values(capsys):
    code, out, _ = run(capsys, "quant-error", "--levels", "4..5", "--set", "count=2")
    assert code == 0
    header = next(ln for ln in out.splitlines() if not ln.startswith("#"))
    assert header == "pde,p,j,i,w,E,sqrt_kappa_times_eps"
    rows = table(out)
    assert len(rows) == 2 * 2 * 3
    A = level_data(ProblemSpec("poisson", 1, 1, 5)).A_raw
    vecs = an.smallest_eigpairs(A, 2).eigenvectors
    for r in [rows[6], rows[8], rows[11]]:
        want = an.quant_error(vecs[int(r["i"]) - 1], int(r["w"]), A)
        assert r["E"] == f"{float(want):.6e}"
        assert float(r["E"]) <= 4 * float(r["sqrt_kappa_times_eps"])


def test_config_echo_and_determinism(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("pde = poisson\np = 1\nlevels = 1..5\n")
    code1, out1, _ = run(capsys, "fmg", "--config", str(cfg))
    code2, out2, _ = run(capsys, "fmg", "--config", str(cfg), "--out", str(tmp_path))
    assert code1 == code2 == 0
    assert (tmp_path / "fmg.csv").read_text() == out1
    assert any(ln.startswith("# config_sha256=") for ln in out1.splitlines())
    assert "# levels=1..5" in out1.splitlines()


def test_fmg_progressive_ratios(capsys):
    code, out, _ = run(capsys, "fmg", "--pde", "biharmonic", "--p", "3", "--levels", "1..6")
    assert code == 0
    assert all(float(r["ratio"]) <= 1.5 for r in table(out))


def test_fmg_fixed_schedule(capsys):
    code, out, _ = run(capsys, "fmg", "--levels", "1..4", "--set", "schedule=fixed",
                       "--set", "fixed_width=40")
    rows = table(out)
    assert code == 0 and {r["wcheck"] for r in rows} == {"40"}


def test_min_width_base_case(capsys):
    code, out, _ = run(capsys, "min-width", "--levels", "1..2")
    rows = table(out)
    assert code == 0
    assert [r["which"] for r in rows[:3]] == ["wcheck", "w", "wdot"]
    assert all(int(r["min_bits"]) >= 1 for r in rows)


def test_prec_est_schedule(capsys):
    code, out, _ = run(capsys, "prec-est", "--levels", "1..7", "--p", "2")
    rows = table(out)
    assert code == 0
    for r in rows:
        assert int(r["wcheck"]) >= int(r["w"]) >= int(r["wdot"])


def test_recompute_table_accounting(capsys):
    from bfpmg.cli import recompute_counts
    from bfpmg.multigrid import BfpMultigrid, estimated_schedule, solver_setup

    code, out, _ = run(capsys, "recompute-table", "--levels", "1..6", "--set", "check=false")
    assert code == 0
    rows = table(out)
    assert [r["w_add_cap"] for r in rows] == ["inf", "4", "2", "0"]
    spec = ProblemSpec("poisson", 1, 1, 6)
    h = solver_setup(spec)
    sched, _, _ = estimated_schedule(spec, hierarchy=h)
    mg = BfpMultigrid(h, sched)
    mg.fmg()
    lines = [t for t in mg.trace if t.fmg_level == 6 and t.level == 6]
    assert recompute_counts(mg.trace, 6) == (sum(t.recomputed for t in lines), len(lines))
    assert int(rows[0]["calls"]) == len(lines)


def test_error_exit_code(capsys):
    code, _, err = run(capsys, "fmg", "--set", "mode=bogus")
    assert code == 1 and "error" in err
    code, _, _ = run(capsys, "fmg", "--config", "/nonexistent/file.cfg")
    assert code == 1


def test_check_failure_exit_code(capsys):
    # an unreachable ratio target makes the built-in check fail
    code, _, err = run(capsys, "prec-est", "--levels", "1..4", "--set", "q_max=2",
                       "--set", "target=1.0001")
    assert code == 2 and "check failed" in err
