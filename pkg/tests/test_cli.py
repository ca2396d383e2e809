import json
import subprocess
import sys

import pytest

from filippov_consensus.cli import main
from filippov_consensus.scenario import ScenarioError, apply_override, catalog, load

BUNDLED = [item["name"] for item in catalog()]


def write(tmp_path, data, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return path


def base_scenario(**changes):
    data = {
        "name": "pair",
        "graph": {"n": 2, "edges": [[0, 1, 1], [1, 0, 1]]},
        "protocol": {"family": "communication", "function": {"kind": "step_phi"}, "convention": "neighbor"},
        "x0": [1, 1],
        "integrator": {"dt_max": 1.0, "t_end": 10, "mode": "sliding"},
        "analysis": {"sets": ["H1"], "lyapunov": ["MaxV"], "monitor": None},
    }
    data.update(changes)
    return data


def test_list_examples(capsys):
    assert main(["list-examples"]) == 0
    out = capsys.readouterr().out
    for name in ("fig1a_stepphi", "fig1b_asym", "fig2_q_sym", "spanning_tree_qs"):
        assert name in out


def test_validate_ok_and_bad(tmp_path, capsys):
    assert main(["validate", "fig2_q_sym"]) == 0
    bad = base_scenario(integrator={"t_end": 10})
    assert main(["validate", str(write(tmp_path, bad))]) == 2
    assert "dt_max" in capsys.readouterr().err


def test_quantizer_needs_explicit_delta(tmp_path):
    bad = base_scenario(protocol={"family": "measurement", "function": {"kind": "sym_quantizer"}})
    with pytest.raises(ScenarioError):
        load(write(tmp_path, bad))


def test_error_reports_line(tmp_path):
    text = json.dumps(base_scenario(x0=[1, "one"]), indent=2)
    path = tmp_path / "s.json"
    path.write_text(text)
    with pytest.raises(ScenarioError) as info:
        load(path)
    expected = next(k for k, line in enumerate(text.splitlines(), 1) if '"one"' in line)
    assert info.value.line == expected
    assert f":{expected}" in str(info.value)


def test_override_keys():
    data = base_scenario()
    assert apply_override(data, "integrator.t_end=3")["integrator"]["t_end"] == 3
    with pytest.raises(ScenarioError):
        apply_override(data, "integrator.t_fin=3")
    with pytest.raises(ScenarioError):
        apply_override(data, "nonsense")


def test_unknown_set_key_is_validation_error(tmp_path, capsys):
    code = main(["run", "fig1a_stepphi", "--out", str(tmp_path), "--set", "integrator.speed=2"])
    assert code == 2
    assert "unknown override key" in capsys.readouterr().err


def test_run_writes_artifacts(tmp_path):
    assert main(["run", "fig1a_stepphi", "--out", str(tmp_path), "--set", "integrator.t_end=20"]) == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,x0,x1,v0,v1"
    last = [float(v) for v in lines[-1].split(",")]
    assert last[0] == 20 and abs(last[1] - 11) <= 1e-9 and abs(last[2] - 11) <= 1e-9
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["unbounded_growth"] is True
    events = json.loads((tmp_path / "events.json").read_text())
    assert all(set(e) == {"t", "kind", "detail"} for e in events)


def test_stuck_state_run_report(tmp_path):
    assert main(["run", "fig2_q_sym", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["set_checks"]["H1"] is False
    assert report["termination"] == "Equilibrium"
    rows = (tmp_path / "trajectory.csv").read_text().splitlines()[1:]
    assert len({r.split(",", 1)[1] for r in rows}) == 1


def test_spanning_tree_seed_converges(tmp_path):
    assert main(["run", "spanning_tree_qs", "--seed", "7", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["termination"] == "Converged(D2)"
    assert report["member_final"] is True and report["dwell"] >= 10


def test_seed_changes_generated_state(tmp_path):
    a = load("spanning_tree_qs", seed=7).x0
    b = load("spanning_tree_qs", seed=8).x0
    assert a != b and load("spanning_tree_qs", seed=7).x0 == a


def test_integration_failure_exit_code(tmp_path, capsys):
    data = base_scenario(integrator={"dt_max": 1.0, "t_end": 10, "mode": "prescribed", "policy": {"kind": "right"}})
    code = main(["run", str(write(tmp_path, data)), "--out", str(tmp_path / "o")])
    assert code == 3
    assert "integration failed" in capsys.readouterr().err


def test_bad_config_value_is_validation_error(tmp_path):
    code = main(["run", "fig1a_stepphi", "--out", str(tmp_path), "--set", "integrator.dt_max=-1"])
    assert code == 2


def test_rerun_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "spanning_tree_qs", "--seed", "3", "--out", str(tmp_path / d)]) == 0
    for f in ("trajectory.csv", "events.json", "report.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_batch_parallel(tmp_path):
    code = main(["run", "fig1a_stepphi", "fig2_q_sym", "--out", str(tmp_path), "--jobs", "2"])
    assert code == 0
    assert (tmp_path / "fig1a_stepphi" / "trajectory.csv").exists()
    assert (tmp_path / "fig2_q_sym" / "report.json").exists()


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_scenarios_run(name, tmp_path):
    assert main(["run", name, "--out", str(tmp_path)]) == 0


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "filippov_consensus", "list-examples"], capture_output=True, text=True)
    assert out.returncode == 0 and "fig1b_asym" in out.stdout
