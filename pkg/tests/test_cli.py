import os

import pytest

from gfl_lvrt import cli

BAD = "name: bad\nsystem:\n  U_g: 1.1\n  Z_g: 0.2jx\n"


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        code, _, _ = run(["run", "case2_like", "-o", str(path), "--sim.t_end=0.3"], capsys)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("t,U_c,")


def test_builtin_case3_runs(tmp_path, capsys):
    code, out, _ = run(["run", "case3", "--mode", "traditional", "-o", str(tmp_path / "c3.csv"),
                        "--sim.t_end=0.35", "--fault.t_clear=0.15"], capsys)
    assert code == 0
    assert "scenario: case3" in out and "mode: traditional" in out


def test_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(BAD)
    code, _, err = run(["run", str(bad)], capsys)
    assert code == 1
    assert "system.Z_g" in err and "line 4" in err


def test_unknown_override(capsys):
    code, _, err = run(["dump", "case2_like", "--pll.K_z=1"], capsys)
    assert code == 1 and "pll.K_z" in err


def test_los_exit_code(tmp_path, capsys):
    code, out, _ = run(["run", "case4", "--mode", "traditional", "-o", str(tmp_path / "x.csv")], capsys)
    assert code == 2
    assert "status: LOS" in out


def test_compare_single_mode_is_run(tmp_path, capsys):
    code, out, _ = run(["compare", "case2_like", "--modes", "traditional", "--sim.t_end=0.4"], capsys)
    assert code == 0
    assert "[traditional]" in out and "delta_" not in out


def test_compare_two_modes(tmp_path, capsys):
    code, out, _ = run(["compare", "case2_like", "--sim.t_end=0.4", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    assert "metric,traditional,decoupled" in out
    assert (tmp_path / "case2_like_decoupled.csv").exists()
    assert (tmp_path / "compare.txt").exists()


def test_surface_node_count(tmp_path, capsys):
    code, out, _ = run(["surface", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    lines = (tmp_path / "Q_actual.csv").read_text().splitlines()
    assert len(lines) == 1 + 181
    assert len(lines[0].split(",")) == 1 + 121


def test_classify(capsys):
    code, out, _ = run(["classify", "case2_like", "--fault.Z_cf=0", "--fault.Z_f=0"], capsys)
    assert code == 0 and out.splitlines()[0] == "PCC,Negligible"
    code, out, _ = run(["classify", "casefig7"], capsys)
    assert out.splitlines()[0] == "Nearby,Decrease"


def test_domain(tmp_path, capsys):
    code, out, _ = run(["domain", "case2_like", "--n-delta", "5", "--n-omega", "3",
                        "--horizon", "0.5", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    assert {"domain_traditional.csv", "domain_decoupled.csv", "fractions.csv"} <= set(os.listdir(tmp_path))
    assert out.splitlines()[0] == "mode,stable_fraction"


def test_sweep(tmp_path, capsys):
    dest = tmp_path / "sweep.csv"
    code, _, _ = run(["sweep", "case2_like", "--param", "pll.K_p", "--values", "10,20",
                      "--modes", "traditional", "--sim.t_end=0.3", "-o", str(dest)], capsys)
    assert code == 0
    rows = dest.read_text().splitlines()
    assert rows[0].startswith("pll.K_p,mode,") and len(rows) == 3


def test_cct_command(capsys):
    code, out, _ = run(["cct", "case2_like", "--modes", "traditional", "--cct-lo", "0.01",
                        "--cct-hi", "0.02", "--horizon", "0.2", "--env-start", "0",
                        "--env-end", "0"], capsys)
    assert code == 0
    assert out.splitlines()[1] == "traditional,0.02,true"


def test_dump_round_trip(tmp_path, capsys):
    code, out, _ = run(["dump", "case3"], capsys)
    assert code == 0
    path = tmp_path / "c3.yaml"
    path.write_text(out)
    code, out2, _ = run(["dump", str(path)], capsys)
    assert out2 == out


def test_acceptance_missing_manifest(capsys):
    code, _, err = run(["acceptance", "/nonexistent.expect.yaml"], capsys)
    assert code == 1


def test_acceptance_exit_codes(tmp_path, capsys):
    good = tmp_path / "g.expect.yaml"
    good.write_text("id: g\nruns:\n  r: {scenario: case2_like, overrides: {sim.t_end: 0.3}}\n"
                    "assertions:\n  - {quantity: r.U_c0, comparator: '>', bound: 0.5, provenance: TRIVIAL}\n")
    code, out, _ = run(["acceptance", str(good)], capsys)
    assert code == 0 and "[PASS]" in out
    bad = tmp_path / "b.expect.yaml"
    bad.write_text(good.read_text().replace("'>'", "'<'"))
    code, out, _ = run(["acceptance", str(bad), "--csv", str(tmp_path / "r.csv")], capsys)
    assert code == 4 and "[FAIL]" in out
    assert (tmp_path / "r.csv").read_text().startswith("manifest,name,")


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
