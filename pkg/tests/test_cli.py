import json

import pytest

from nls_perturb.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_gp_reports_bogoliubov_row(tmp_path, capsys):
    code, out, _ = _run(capsys, "run", "--scenario", "gp", "--alpha", "0.01", "--out", str(tmp_path))
    assert code == 0
    rows = (tmp_path / "invariants.csv").read_text().splitlines()
    assert rows[0] == "mode_index,gamma,Np,Ep,Pp_x,coeff_max"
    assert float(rows[1].split(",")[1]) == pytest.approx(3**0.5, rel=1e-12)
    doc = json.loads((tmp_path / "invariants.json").read_text())
    assert doc["alpha"] == 0.01
    for name in ("modes.csv", "identities.json", "linear_only.json"):
        assert (tmp_path / name).exists() and name in out


def test_verify_log(tmp_path, capsys):
    code, _, _ = _run(capsys, "verify", "--scenario", "log", "--out", str(tmp_path))
    assert code == 0
    ids = json.loads((tmp_path / "identities.json").read_text())
    assert ids["max"] < 1e-8
    assert not (tmp_path / "modes.csv").exists()


def test_modes_only(tmp_path, capsys):
    code, _, _ = _run(capsys, "modes", "--scenario", "log", "--out", str(tmp_path))
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["modes.csv"]


def test_evolve_from_config(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('scenario = "log"\n[evolve]\nT = 0.2\ndt = 0.002\nsample_stride = 10\n')
    code, _, err = _run(capsys, "evolve", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 0, err
    lines = (tmp_path / "o" / "timeseries.csv").read_text().splitlines()
    assert lines[0] == "t,N,E,Px,N_ansatz,E_ansatz" and len(lines) == 12
    summary = json.loads((tmp_path / "o" / "evolution.json").read_text())
    assert summary


def test_missing_config_is_config_error(tmp_path, capsys):
    code, _, err = _run(capsys, "run", "--config", str(tmp_path / "nope.toml"))
    assert code == 2 and "not found" in err


@pytest.mark.parametrize("body", ["[model]\nkind = 'cubic'\n", "[grid]\nbogus = 1\n", "alpha = -1\n",
                                  "not toml ["])
def test_bad_config_is_config_error(tmp_path, capsys, body):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(body)
    code, _, err = _run(capsys, "run", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 2 and "config error" in err


def test_custom_scenario_needs_config(capsys):
    assert _run(capsys, "run", "--scenario", "custom")[0] == 2


def test_unstable_background_is_numerical_failure(tmp_path, capsys):
    cfg = tmp_path / "attractive.toml"
    cfg.write_text("[model]\nkind = 'gp'\ng = -1.0\n[background]\nomega = -1.0\n")
    code, _, err = _run(capsys, "run", "--scenario", "custom", "--config", str(cfg),
                        "--out", str(tmp_path / "o"))
    assert code == 3 and "stage 'modes'" in err


def test_failure_removes_partial_artifacts(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    # the run writes its reports, then the time step fails the resolution check
    cfg.write_text('scenario = "log"\n[evolve]\nenabled = true\nT = 1.0\ndt = 0.1\n')
    out = tmp_path / "o"
    code, _, err = _run(capsys, "run", "--config", str(cfg), "--out", str(out))
    assert code == 3 and "stage 'evolution'" in err
    assert list(out.iterdir()) == []


def test_reports_are_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        assert _run(capsys, "run", "--scenario", "log", "--threads", "2", "--out", str(tmp_path / d))[0] == 0
    for name in ("invariants.json", "identities.json", "linear_only.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
