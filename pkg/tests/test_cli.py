import json

import pytest

from isaacs_lab.cli import format_cell, main


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_unknown_model_lists_builtins(capsys):
    code, _, err = run(["solve", "--model", "nope"], capsys)
    assert code == 2
    assert "generic" in err and "ou" in err


def test_bad_override_names_the_key(capsys):
    code, _, err = run(["solve", "--model", "generic", "--set", "c=abc"], capsys)
    assert code == 2 and "'c'" in err


def test_solve_writes_csv_and_manifest(tmp_path, capsys):
    out = tmp_path / "v.csv"
    assert run(["solve", "--model", "generic", "--n", "21", "--out", str(out)], capsys)[0] == 0
    data = out.read_bytes()
    assert b"\r" not in data
    lines = data.decode().splitlines()
    assert lines[0].startswith("# manifest-sha256=")
    assert lines[1] == "x,v" and len(lines) == 2 + 23
    manifest = json.loads((tmp_path / "v.csv.manifest.json").read_text())
    assert manifest["manifest_sha256"] in lines[0]
    assert "wall_time_seconds" in manifest and manifest["version"]


def test_same_command_gives_identical_bytes(tmp_path, capsys):
    args = ["mc-verify", "--model", "ou", "--delta", "2", "--paths", "20", "--dt", "0.05", "--horizon", "1",
            "--seed", "9", "--estimator", "path-integral"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(args + ["--out", str(a)], capsys)[0] == 0
    assert run(args + ["--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[1]
    assert header.startswith("estimator,estimate,std_error,bound,verdict")


def test_seed_changes_manifest(tmp_path, capsys):
    base = ["mc-verify", "--model", "ou", "--delta", "2", "--paths", "4", "--dt", "0.1", "--horizon", "0.5"]
    run(base + ["--seed", "1", "--out", str(tmp_path / "a.csv")], capsys)
    run(base + ["--seed", "2", "--out", str(tmp_path / "b.csv")], capsys)
    first = lambda p: (tmp_path / p).read_text().splitlines()[0]
    assert first("a.csv") != first("b.csv")


def test_check_conditions_report_and_exit_status(tmp_path, capsys):
    ini = tmp_path / "cond.ini"
    ini.write_text("[conditions]\nchecks = coupling, ellipticity\ndelta = 0.2\ndelta1 = 0.0\nmu = 1\n"
                   "n_per_axis = 41\n")
    rep = tmp_path / "rep.txt"
    code, out, _ = run(["check-conditions", "--model", "generic", "--conditions", str(ini), "--out", str(rep)],
                       capsys)
    assert code == 0 and "all conditions satisfied" in out
    text = rep.read_text()
    assert text.startswith("# manifest-sha256=") and "satisfied = true" in text
    code, out, _ = run(["check-conditions", "--model", "expanding-drift", "--set", "b=2", "--set", "delta0=0",
                        "--check", "degeneracy-index"], capsys)
    assert code == 1 and "violated" in out


def test_conditions_file_unknown_key(tmp_path, capsys):
    ini = tmp_path / "cond.ini"
    ini.write_text("[conditions]\nbogus = 1\n")
    code, _, err = run(["check-conditions", "--model", "generic", "--conditions", str(ini)], capsys)
    assert code == 2 and "bogus" in err


def test_failed_precheck_is_a_configuration_error(capsys):
    code, _, err = run(["mc-verify", "--model", "rotating-noise", "--set", "drift=3", "--delta", "2",
                        "--paths", "4", "--dt", "0.1", "--horizon", "0.2"], capsys)
    assert code == 2 and "coupling condition" in err


def test_sweep_delta0_columns(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert run(["sweep-delta0", "--model", "expanding-drift", "--delta0", "1e-1,1e-2", "--n", "101",
                "--out", str(out)], capsys)[0] == 0
    assert out.read_text().splitlines()[1] == "param,lipschitz,exponent"


def test_interior_probe_and_penalize_sweep(tmp_path, capsys):
    assert run(["interior-probe", "--model", "generic", "--n", "51,101", "--region=-1,1",
                "--out", str(tmp_path / "p.csv")], capsys)[0] == 0
    code, out, _ = run(["penalize-sweep", "--model", "drift-sign-game", "--kmin", "4", "--kmax", "16",
                        "--n", "2001", "--out", str(tmp_path / "k.csv")], capsys)
    assert code == 0 and "verdict pass" in out
    assert (tmp_path / "k.csv").read_text().splitlines()[1].startswith("K,sup_gap,min_gap")


def test_unknown_a2_builtin(capsys):
    code, _, err = run(["penalize-sweep", "--model", "drift-sign-game", "--a2", "nope"], capsys)
    assert code == 2 and "spread" in err


def test_reproduce_list_and_unknown(capsys):
    code, out, _ = run(["reproduce", "--list"], capsys)
    assert code == 0 and "lipschitz-threshold" in out and "barrier-transform" in out
    assert run(["reproduce", "nope"], capsys)[0] == 2


def test_reproduce_recipe(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code, text, _ = run(["reproduce", "checker-fidelity", "--out", str(out)], capsys)
    assert code == 0 and "PASS" in text
    assert out.read_text().startswith("# manifest-sha256=")


def test_threads_env_does_not_change_output(tmp_path, capsys, monkeypatch):
    args = ["sweep-delta0", "--model", "expanding-drift", "--delta0", "1e-1,1e-2,1e-3", "--n", "101"]
    run(args + ["--out", str(tmp_path / "a.csv")], capsys)
    monkeypatch.setenv("ISAACS_LAB_THREADS", "3")
    run(args + ["--out", str(tmp_path / "b.csv")], capsys)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@pytest.mark.parametrize("value, text", [(0.1, "0.10000000000000001"), (3, "3"), (None, ""), (True, "true"),
                                         ("a,b", '"a,b"')])
def test_format_cell(value, text):
    assert format_cell(value) == text
