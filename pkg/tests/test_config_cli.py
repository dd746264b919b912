import json

import pytest

from mollified_qft import cli
from mollified_qft.config import EXPERIMENTS, ExperimentConfig, parse_config, validate, write_config
from mollified_qft.errors import UsageError


def test_round_trip_is_exact():
    cfg = ExperimentConfig()
    cfg.sweep.eps = (0.1, 0.1 / 3, 0.01, 0.007, 1e-3 / 7)
    again = parse_config(write_config(cfg))
    assert again == cfg
    assert write_config(again) == write_config(cfg)


@pytest.mark.parametrize("text,path", [
    ("[sweep]\neps =\n", "sweep.eps"),
    ("[sweep]\nbogus = 1\n", "sweep.bogus"),
    ("[nowhere]\nx = 1\n", "nowhere"),
    ("[physics]\nmass = heavy\n", "physics.mass"),
    ("[physics]\nmass = -1\n", "physics.mass"),
    ("[commutators]\nK = 4\n", "commutators.K"),
    ("[scattering]\nmax_order = 9\n", "scattering.max_order"),
    ("[sweep]\neps = 0.1, 0.1, 0.05, 0.02, 0.01\n", "sweep.eps"),
])
def test_bad_configs_name_the_field(text, path):
    with pytest.raises(UsageError) as info:
        parse_config(text)
    assert str(info.value).startswith(path)


def test_empty_eps_message():
    cfg = ExperimentConfig()
    cfg.sweep.eps = ()
    with pytest.raises(UsageError, match="sweep.eps: epsilon list is empty"):
        validate(cfg)


def test_list(capsys):
    assert cli.main(["--list"]) == 0
    names = capsys.readouterr().out.split()
    assert names == list(EXPERIMENTS) + ["all"]


def test_moments_run(tmp_path, capsys):
    out = tmp_path / "res"
    assert cli.main(["--experiment", "moments", "--out", str(out)]) == 0
    summary = json.loads((out / "moments" / "summary.json").read_text())
    assert summary["passed"]
    crit = {c["key"]: c for c in summary["criteria"]}
    assert crit["1"]["value"]["max_moment"] < 1e-8
    assert "[PASS] moments 1:" in capsys.readouterr().out


def test_zpe_sweep_passes(tmp_path):
    assert cli.main(["--experiment", "zpe-sweep", "--out", str(tmp_path)]) == 0


def test_csv_output_is_reproducible(tmp_path):
    for tag in ("a", "b"):
        assert cli.main(["--experiment", "sifting", "--out", str(tmp_path / tag)]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    assert files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_config_file_and_exit_codes(tmp_path, capsys):
    path = tmp_path / "run.ini"
    assert cli.main(["--write-default-config", str(path)]) == 0
    assert parse_config(path.read_text()) == ExperimentConfig()
    bad = tmp_path / "bad.ini"
    bad.write_text("[sweep]\neps =\n")
    assert cli.main(["--config", str(bad)]) == 2
    assert "sweep.eps" in capsys.readouterr().err
    assert cli.main(["--config", str(tmp_path / "missing.ini")]) == 2
    assert cli.main(["--experiment", "nonsense"]) == 2


def test_failed_criterion_exit_status(tmp_path):
    text = write_config(ExperimentConfig()).replace("moment_tol = 1e-08", "moment_tol = 1e-30")
    path = tmp_path / "strict.ini"
    path.write_text(text)
    assert cli.main(["--config", str(path), "--experiment", "moments", "--out", str(tmp_path / "o")]) == 1
