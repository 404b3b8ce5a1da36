import csv
import json

import pytest

from usvland.cli import main


def test_episode_writes_outputs(tmp_path, capsys):
    assert main(["episode", "--scenario", "flat", "--seed", "1", "--out", str(tmp_path)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["outcome"] == "landed"
    assert (tmp_path / "timeline_mpc_ne_1.csv").exists()
    assert (tmp_path / "episode_mpc_ne_1.json").exists()


def test_batch(tmp_path, capsys):
    rc = main(["batch", "--scenario", "calm", "--controller", "baseline", "--forecast", "truth", "--n", "2",
               "--out", str(tmp_path)])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n"] == 2
    with open(tmp_path / "episodes.csv", newline="") as fh:
        assert [int(r["seed"]) for r in csv.DictReader(fh)] == [0, 1]


def test_predict(tmp_path, capsys):
    rc = main(["predict", "--horizons", "0,1", "--duration", "40", "--out", str(tmp_path)])
    assert rc == 0
    assert set(json.loads(capsys.readouterr().out)["rmse"]) == {"0.0", "1.0"}
    assert (tmp_path / "prediction_imu.csv").exists()


def test_spectrum_from_scenario_and_log(tmp_path, capsys):
    assert main(["spectrum", "--scenario", "moderate", "--axis", "4", "--out", str(tmp_path)]) == 0
    modes = json.loads(capsys.readouterr().out)["modes"]
    assert modes and modes[0]["A"] > 0.1
    lines = (tmp_path / "spectrum_b4.csv").read_text().splitlines()
    assert lines[0] == "f,amplitude,phase"
    assert main(["spectrum", "--poses", str(tmp_path / "poses.csv"), "--axis", "4"]) == 0
    again = json.loads(capsys.readouterr().out)["modes"]
    assert again == modes


@pytest.mark.parametrize("argv", [
    ["episode", "--scenario", "nope"],
    ["batch", "--scenario", "calm", "--n", "0"],
    ["predict", "--horizons", "0,2.5"],
    ["spectrum", "--poses", "/nonexistent/poses.csv"],
    ["spectrum", "--span", "20", "--max-gap", "0.001"],
])
def test_config_errors_exit_nonzero(argv, capsys):
    assert main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_json_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["episode", "--scenario", str(p)]) == 2


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["fly"])
