import json

import pytest

from careflow.cli import main


@pytest.fixture(scope="module")
def tiny_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_tiny")
    code = main(["gen", "--out", str(out), "--seed", "13",
                 "--counties", "3", "--hospitals", "2", "--ltachs", "1",
                 "--nursing-homes", "3", "--population", "8000"])
    assert code == 0
    return out


def test_gen_from_toml_spec(tmp_path):
    spec = tmp_path / "desk.toml"
    spec.write_text("counties = 2\nhospitals = 2\nltachs = 1\n"
                    "nursing_homes = 2\npopulation = 6000\n")
    out = tmp_path / "scenario"
    assert main(["gen", "--spec", str(spec), "--out", str(out),
                 "--seed", "7"]) == 0
    assert (out / "ground_truth.json").exists()


def test_distances_written(tiny_dir, tmp_path):
    out = tmp_path / "dist"
    out.mkdir()
    assert main(["distances", "--scenario", str(tiny_dir),
                 "--out", str(out)]) == 0
    for name in ("distances_stach.csv", "distances_ltach.csv",
                 "distances_nh.csv"):
        assert (out / name).exists()


def test_run_writes_artifacts(tiny_dir, tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--scenario", str(tiny_dir), "--out", str(out),
                 "--days", "10", "--seed", "3"]) == 0
    for name in ("events.csv", "census.csv", "los_stats.csv", "moves.csv",
                 "summary.json"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["days"] == 10 and summary["seed"] == 3


def test_run_twice_identical(tiny_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--scenario", str(tiny_dir), "--out", str(a),
          "--days", "15", "--seed", "42"])
    main(["run", "--scenario", str(tiny_dir), "--out", str(b),
          "--days", "15", "--seed", "42"])
    assert (a / "events.csv").read_bytes() == (b / "events.csv").read_bytes()
    assert (a / "census.csv").read_bytes() == (b / "census.csv").read_bytes()


def test_replay_check(tiny_dir):
    assert main(["replay-check", "--scenario", str(tiny_dir),
                 "--days", "8", "--seed", "5"]) == 0


def test_validate_on_desk_run(desk_dir, desk_run, tmp_path):
    out = tmp_path / "validation"
    code = main(["validate", "--scenario", str(desk_dir),
                 "--run", str(desk_run.out_dir), "--out", str(out)])
    assert code == 0
    assert (out / "validation_summary.csv").exists()
    for name in ("pattern1.csv", "pattern2.csv", "pattern3.csv"):
        assert (out / name).exists()


def test_unknown_flag_exits_with_usage(capsys):
    with pytest.raises(SystemExit) as exit_info:
        main(["run", "--bogus"])
    assert exit_info.value.code == 2


def test_scenario_env_var_default(tiny_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("CAREFLOW_SCENARIO", str(tiny_dir))
    out = tmp_path / "env_run"
    assert main(["run", "--out", str(out), "--days", "3"]) == 0
    assert (out / "events.csv").exists()


def test_event_log_schema(tiny_dir, tmp_path):
    out = tmp_path / "schema_run"
    main(["run", "--scenario", str(tiny_dir), "--out", str(out),
          "--days", "5", "--seed", "1"])
    lines = (out / "events.csv").read_text().splitlines()
    assert lines[0] == "day,agent_id,event,from,to,detail"
    events = {line.split(",")[2] for line in lines[1:]}
    assert events <= {"admit", "discharge", "death", "turned_away",
                      "fully_turned_away"}
    assert "admit" in events


def test_validate_requires_sidecar(tiny_dir, tmp_path):
    import shutil
    bare = tmp_path / "bare"
    shutil.copytree(tiny_dir, bare)
    (bare / "ground_truth.json").unlink()
    run = tmp_path / "bare_run"
    main(["run", "--scenario", str(bare), "--out", str(run), "--days", "3"])
    assert main(["validate", "--scenario", str(bare),
                 "--run", str(run)]) == 2


def test_regeneration_clears_stale_distances(tmp_path):
    out = tmp_path / "regen"
    assert main(["gen", "--out", str(out), "--seed", "4", "--counties", "3",
                 "--hospitals", "2", "--ltachs", "1", "--nursing-homes", "3",
                 "--population", "6000"]) == 0
    assert main(["distances", "--scenario", str(out)]) == 0
    assert (out / "distances_nh.csv").exists()
    # a new world in the same directory must not inherit old matrices
    assert main(["gen", "--out", str(out), "--seed", "5", "--counties", "4",
                 "--hospitals", "2", "--ltachs", "1", "--nursing-homes", "4",
                 "--population", "6000"]) == 0
    assert not (out / "distances_nh.csv").exists()
    assert main(["replay-check", "--scenario", str(out), "--days", "3"]) == 0
