import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from rgdlab.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def small_run_cfg(**over):
    exp = {
        "cost": {"name": "interp2d"},
        "algorithm": {"kind": "fixed_step", "alpha": 1.0},
        "sampler": {"kind": "uniform_annulus", "r_lo": 2.1, "r_hi": 3.0},
        "num_runs": 20,
        "seed": 7,
    }
    exp.update(over)
    return {"schema": 1, "experiment": exp}


def test_run_writes_report(tmp_path):
    cfg = write_cfg(tmp_path, small_run_cfg())
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out), "--workers", "1"]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["fraction_to_strict_saddle"] == 1.0
    assert doc["counts"]["ConvergedToStrictSaddle"] == 20


def test_run_overrides_and_reproducibility(tmp_path):
    cfg = write_cfg(tmp_path, small_run_cfg(algorithm={"kind": "fixed_step", "alpha": 0.9}))
    texts = []
    for i, workers in enumerate(("1", "2")):
        out = tmp_path / f"o{i}"
        argv = ["run", "--config", cfg, "--out", str(out), "--seed", "7", "--runs", "300", "--workers", workers]
        assert main(argv) == 0
        texts.append((out / "report.json").read_bytes())
    assert texts[0] == texts[1]
    doc = json.loads(texts[0])
    assert doc["num_runs"] == 300 and doc["plan"]["seed"] == 7


def test_run_dump_trajectories(tmp_path):
    cfg = write_cfg(tmp_path, small_run_cfg(num_runs=3))
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out), "--dump-trajectories", "--workers", "1"]) == 0
    files = sorted(p.name for p in (out / "trajectories").iterdir())
    assert files == ["run_00000.csv", "run_00001.csv", "run_00002.csv"]
    header = (out / "trajectories" / "run_00000.csv").read_text().splitlines()[0]
    assert header == "iter,x0,x1,step,grad_norm,shrinks"


def test_bad_tau_exits_2_without_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--config", str(CONFIGS / "bad_tau.json"), "--out", str(out)])
    assert code == 2
    assert "τ ∈ (0,1)" in capsys.readouterr().err
    assert not out.exists()


@pytest.mark.parametrize(
    "doc",
    [
        {"experiment": {}},
        {"schema": 2},
        {"schema": 1, "mystery": {}},
        {"schema": 1, "experiment": {"cost": {"name": "nope"}}},
        "not an object",
    ],
)
def test_schema_violations_exit_2(tmp_path, doc):
    out = tmp_path / "out"
    assert main(["run", "--config", write_cfg(tmp_path, doc), "--out", str(out)]) == 2
    assert not out.exists()


def test_missing_config_and_missing_section(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.json")]) == 2
    cfg = write_cfg(tmp_path, {"schema": 1})
    assert main(["scan", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_unwritable_output_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = write_cfg(tmp_path, small_run_cfg())
    assert main(["run", "--config", cfg, "--out", str(blocker / "sub")]) == 2


def test_run_errors_exit_3(tmp_path):
    cfg = write_cfg(
        tmp_path,
        small_run_cfg(algorithm={"kind": "stabilized_armijo", "alpha_bar": 50.0, "max_shrinks_per_step": 1}),
    )
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out), "--workers", "1"]) == 3
    doc = json.loads((out / "report.json").read_text())
    assert any(r["error"] for r in doc["runs"])


@pytest.mark.parametrize("alpha_max,expected", [(2.0, [0.5]), (0.4, [])])
def test_scan_command(tmp_path, alpha_max, expected):
    doc = json.loads((CONFIGS / "quadratic_scan.json").read_text())
    doc["scan"]["alpha_max"] = alpha_max
    out = tmp_path / "out"
    assert main(["scan", "--config", write_cfg(tmp_path, doc), "--out", str(out)]) == 0
    rec = json.loads((out / "singular_set.json").read_text())
    assert rec["alphas"] == expected


def test_scan_config_error(tmp_path):
    doc = json.loads((CONFIGS / "quadratic_scan.json").read_text())
    doc["scan"]["alpha_max"] = -1
    assert main(["scan", "--config", write_cfg(tmp_path, doc), "--out", str(tmp_path / "o")]) == 2


def test_traj_command(tmp_path):
    out = tmp_path / "out"
    assert main(["traj", "--config", str(CONFIGS / "interp2d_alpha1.json"), "--out", str(out)]) == 0
    rows = (out / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "iter,x0,x1,step,grad_norm,shrinks"
    summary = json.loads((out / "trajectory.json").read_text())
    assert summary["outcome"]["classification"] == "ConvergedToStrictSaddle"


def test_traj_cubic_stabilizes(tmp_path):
    out = tmp_path / "out"
    assert main(["traj", "--config", str(CONFIGS / "armijo_interp2d.json"), "--out", str(out)]) == 0
    summary = json.loads((out / "trajectory.json").read_text())
    assert summary["stabilization"] == {"stabilized": True, "index": 0, "final_alpha": 0.3}


@pytest.mark.parametrize(
    "argv,expected",
    [
        (["--regime", "stiefel", "--p", "1", "--L", "1"], 0.40189),
        (["--regime", "hadamard", "--L", "4"], 0.25),
        (["--regime", "product-spheres", "--L", "1"], 1.0),
    ],
)
def test_bounds_command(argv, expected, capsys):
    assert main(["bounds", *argv, "--json"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert abs(rec["alpha_max"] - expected) <= 1e-4
    assert main(["bounds", *argv]) == 0
    table = capsys.readouterr().out
    assert "alpha_max" in table


def test_bounds_rejects_nonpositive(capsys):
    assert main(["bounds", "--regime", "hadamard", "--L", "-1"]) == 2
    assert main(["bounds", "--regime", "pinched", "--L", "1", "--K-min", "2", "--K-max", "1"]) == 2


def test_bounds_json_file(tmp_path):
    out = tmp_path / "b"
    assert main(["bounds", "--regime", "hadamard", "--L", "2", "--out", str(out)]) == 0
    rec = json.loads((out / "bounds.json").read_text())
    assert rec["alpha_max"] == 0.5 and rec["inputs"] == {"L": 2.0}


def test_json_outputs_round_trip(tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", write_cfg(tmp_path, small_run_cfg(num_runs=4)), "--out", str(out), "--workers", "1"])
    main(["scan", "--config", str(CONFIGS / "quadratic_scan.json"), "--out", str(out)])
    main(["traj", "--config", str(CONFIGS / "interp2d_alpha1.json"), "--out", str(out)])
    for name in ("report.json", "singular_set.json", "trajectory.json"):
        text = (out / name).read_text()
        assert json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n" == text


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    res = subprocess.run(
        [sys.executable, "-m", "rgdlab", "bounds", "--regime", "hadamard", "--L", "4", "--json"],
        capture_output=True,
        text=True,
        env=env,
        check=False,
    )
    assert res.returncode == 0
    assert json.loads(res.stdout)["alpha_max"] == 0.25
