import csv
import json

import pytest

from evotree import cli

BURST = {"engine": "tree", "model": "burst_spine", "params": {"eta": 0.5, "b": 0.5}, "steps": 200,
         "prune_threshold": 0.0, "traits": ["spine", "burst", "zero_fitness"]}


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def test_tree_run_writes_csv(tmp_path):
    cfg = write(tmp_path / "c.json", BURST)
    assert cli.main(["tree", "run", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    with open(tmp_path / "a" / "trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "mean_fitness", "log_total_mass", "running_geometric_mean",
                       "truncated_share_bound", "spine", "burst", "zero_fitness"]
    assert len(rows) == 201
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["steps"] == 200


def test_runs_are_byte_identical(tmp_path):
    cfg = dict(BURST, analyses=["exponents", "geometric_floor", "concentration", "utility:log"])
    path = write(tmp_path / "c.json", cfg)
    for out in ("a", "b"):
        assert cli.main(["tree", "run", "--config", path, "--out", str(tmp_path / out)]) == 0
    for name in ("trajectory.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_zero_steps_header_only(tmp_path):
    path = write(tmp_path / "c.json", dict(BURST, steps=0))
    assert cli.main(["tree", "run", "--config", path, "--out", str(tmp_path / "z")]) == 0
    lines = (tmp_path / "z" / "trajectory.csv").read_text().splitlines()
    assert len(lines) == 1


def test_flags_override_config(tmp_path, capsys):
    assert cli.main(["tree", "run", "--model", "binary_dyadic", "--steps", "4", "--prune", "0",
                     "--trait", "subtree:1", "--analysis", "exponents"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["final"]["trait_shares"]["subtree:1"] > 0.5
    assert report["prune_threshold"] == 0.0


def test_gaussian_json(capsys):
    assert cli.main(["gaussian"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["width"] == pytest.approx(1.618034, abs=1e-6)
    assert report["eigenvalue"] == pytest.approx(0.618034, abs=1e-6)
    assert report["eigenvalue_ratio_form"] == pytest.approx(report["eigenvalue_width_form"], abs=1e-12)


def test_finite_run(tmp_path, capsys):
    doc = {"engine": "finite", "model": {"fitness": [1, 2], "mutation": [[1, 0], [0, 1]]}, "steps": 50}
    assert cli.main(["finite", "run", "--config", write(tmp_path / "f.json", doc)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["final_state"][1] == pytest.approx(1.0, abs=1e-10)


def test_lineage(capsys):
    assert cli.main(["lineage", "--model", "binary_dyadic", "--path", "11", "--steps", "10"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["closed_form_exponent"] == 2.0
    assert report["estimate"]["upper"] <= 2.0


def test_burst_sweep_matches_limits(tmp_path, capsys):
    path = write(tmp_path / "c.json", BURST)
    values = ",".join(str(b / 10) for b in range(1, 10))
    assert cli.main(["sweep", "--config", path, "--axis", "params.b", "--values", values]) == 0
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert [r["value"] for r in rows] == [b / 10 for b in range(1, 10)]
    for r in rows:
        assert r["tail_mean_fitness_odd"] == pytest.approx(r["references"]["mean_fitness_odd"], abs=1e-6)
        assert r["tail_mean_fitness_even"] == pytest.approx(r["references"]["mean_fitness_even"], abs=1e-6)


def test_lock_sweep_keeps_floor(tmp_path, capsys):
    doc = {"engine": "tree", "model": {"name": "lock", "params": {"inner": {"model": "binary_dyadic"}, "eta": 0.2}},
           "steps": 10, "prune_threshold": 0.0, "traits": ["locked"]}
    path = write(tmp_path / "c.json", doc)
    assert cli.main(["sweep", "--config", path, "--axis", "params.eta", "--values", "0.1,0.25,0.5"]) == 0
    for r in json.loads(capsys.readouterr().out)["rows"]:
        assert r["min_trait_shares_after_start"]["locked"] >= r["value"] - 1e-12
        assert r["final_trait_shares"]["locked"] >= r["value"]


def test_empty_sweep(tmp_path, capsys):
    path = write(tmp_path / "c.json", BURST)
    assert cli.main(["sweep", "--config", path, "--axis", "params.b", "--values", ""]) == 0
    assert json.loads(capsys.readouterr().out)["rows"] == []


def test_sweep_reports_bad_values(tmp_path, capsys):
    path = write(tmp_path / "c.json", dict(BURST, steps=5))
    assert cli.main(["sweep", "--config", path, "--axis", "params.b", "--values", "0.5,7"]) == 0
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert rows[0]["status"] == "ok" and rows[1]["status"] == "error"


def test_extinction_is_reported(capsys):
    assert cli.main(["tree", "run", "--model", "single_ray", "--param", 'fitness_sequence="const:0"',
                     "--steps", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["extinct_at"] == 0


@pytest.mark.parametrize("argv, code", [
    (["tree", "run", "--model", "nope", "--steps", "1"], cli.EXIT_CONFIG),
    (["tree", "run", "--model", "burst_spine", "--param", "eta=1.5", "--param", "b=0.5", "--steps", "1"],
     cli.EXIT_MODEL),
    (["tree", "run", "--config", "/nonexistent/c.json"], cli.EXIT_IO),
    (["tree", "run", "--model", "burst_spine", "--steps", "1", "--analysis", "bogus"], cli.EXIT_CONFIG),
])
def test_exit_codes(argv, code, capsys):
    assert cli.main(argv) == code
    assert capsys.readouterr().err


def test_unknown_field_is_named(tmp_path, capsys):
    path = write(tmp_path / "c.json", dict(BURST, stpes=3))
    assert cli.main(["tree", "run", "--config", path]) == cli.EXIT_CONFIG
    assert "stpes" in capsys.readouterr().err


def test_frontier_cap_exit(monkeypatch, capsys):
    monkeypatch.setenv("EVOTREE_MAX_FRONTIER", "100")
    assert cli.main(["tree", "run", "--model", "binary_dyadic", "--steps", "12", "--prune", "0"]) == cli.EXIT_EXPLOSION


def test_verify_corrupted_fixture(tmp_path, capsys):
    bad = write(tmp_path / "bad.json", {"fitness": [1, 2], "mutation": [[0.5, 0.4], [0.5, 0.6]]})
    assert cli.main(["verify", "--only", "0", "--fixture", bad]) == cli.EXIT_VERIFY
    out = capsys.readouterr().out
    assert out.startswith("FAIL [0]")
    assert "column 0" in out


def test_verify_is_repeatable(capsys):
    runs = []
    for _ in range(2):
        assert cli.main(["verify", "--only", "0,1,9"]) == 0
        runs.append(capsys.readouterr().out)
    assert runs[0] == runs[1]
    assert runs[0].count("PASS") == 3


def test_merge_states_field(tmp_path, capsys):
    path = write(tmp_path / "c.json", dict(BURST, steps=20, merge_states=True))
    assert cli.main(["tree", "run", "--config", path]) == 0
    assert json.loads(capsys.readouterr().out)["merge_states"] is True
    bad = write(tmp_path / "d.json", dict(BURST, steps=5, merge_states=True, traits=["subtree:0"]))
    assert cli.main(["tree", "run", "--config", bad]) == cli.EXIT_CONFIG
