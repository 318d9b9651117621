import json
import subprocess
import sys

import pytest

from hypersde.cli import main

LV = {
    "algebra": {"kind": "Cp", "p": -1},
    "coefficients": {"model": "lv", "a": [0.5, 0.1], "b": [1.0, 0.2], "G": [0.3, 0.1]},
    "X0": [1.0, 0.5],
    "grid": {"T": 1.0, "steps": 256, "n_paths": 3, "seed": 7},
}


def _run(tmp_path, task, cfg, *extra, name="cfg.json", out="out"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    code = main([task, "--config", str(path), "--out", str(tmp_path / out), *extra])
    return code


def _summary(capsys):
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


def test_verify_algebra(tmp_path, capsys):
    assert _run(tmp_path, "verify-algebra", {"algebra": {"kind": "Cp", "p": -1}}) == 0
    s = _summary(capsys)
    assert s["pass"] and s["associativity"] == 0 and s["commutativity"] == 0


def test_verify_bad_table_is_validation_failure(tmp_path, capsys):
    g = [[[1, 0], [0, 1]], [[0, 1], [-1, 0.1]]]
    g[0][1][0] = 0.1  # break commutativity
    assert _run(tmp_path, "verify-algebra", {"algebra": {"gamma": g, "identity": [1, 0]}}) == 3
    assert not _summary(capsys)["pass"]


def test_compare_is_byte_reproducible(tmp_path, capsys):
    assert _run(tmp_path, "compare", LV, out="a") == 0
    assert _run(tmp_path, "compare", dict(LV, workers=4), out="b") == 0
    capsys.readouterr()
    for name in ("closed_path0.csv", "em_path2.csv", "errors.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "closed_path0.csv").read_text().splitlines()[0]
    assert header == "t,X1,X2"


def test_seed_override_changes_output(tmp_path, capsys):
    assert _run(tmp_path, "solve-lv", LV, out="a") == 0
    assert _run(tmp_path, "solve-lv", LV, "--seed", "8", out="b") == 0
    capsys.readouterr()
    assert (tmp_path / "a" / "closed_path0.csv").read_bytes() != (tmp_path / "b" / "closed_path0.csv").read_bytes()


def test_solve_linear_and_expand(tmp_path, capsys):
    cfg = {
        "algebra": "A3_4",
        "coefficients": {"model": "linear", "f1": ["1", "0", "0"], "f2": ["0.1", "0.2*t", "0"],
                         "g1": ["0.1", "0", "0"], "g2": ["0.3", "0.1", "0"]},
        "X0": [1, 0, 0],
        "grid": {"T": 1.0, "steps": 64, "seed": 1},
    }
    assert _run(tmp_path, "solve-linear", cfg) == 0
    assert _summary(capsys)["status"] == "ok"
    assert _run(tmp_path, "expand", cfg) == 0
    _summary(capsys)
    doc = json.loads((tmp_path / "out" / "system.json").read_text())
    assert len(doc["drift"]) == 3 and len(doc["diffusion"][0]) == 3


def test_simulate_and_convergence(tmp_path, capsys):
    assert _run(tmp_path, "simulate", LV) == 0
    assert _summary(capsys)["nonfinite_paths"] == 0
    cfg = dict(LV, study={"base_steps": 32, "levels": 3, "n_paths": 40, "reference_factor": 4})
    code = _run(tmp_path, "convergence", cfg)
    s = _summary(capsys)
    assert code in (0, 3) and len(s["rms_error"]) == 3
    lines = (tmp_path / "out" / "study.csv").read_text().splitlines()
    assert lines[0] == "level,dt,rms_error"


def test_check_reducible(tmp_path, capsys):
    assert _run(tmp_path, "check-reducible", {"coefficients": {"f": "0", "g": "z^2"}}) == 0
    assert _summary(capsys)["verdict"] == "not_reducible"


def test_check_cp(tmp_path, capsys):
    cfg = {"coefficients": {"p": -1, "f1": "0", "f2": "0", "g1": "X", "g2": "Y"},
           "samples": {"t": [0, 1, 3], "X": [0.5, 1.5, 3], "Y": [0.1, 0.6, 3]}}
    assert _run(tmp_path, "check-cp", cfg) == 0
    s = _summary(capsys)
    assert s["verdict"] == "reducible" and s["hypercomplexifiable"]


@pytest.mark.parametrize(
    "cfg",
    [
        {k: v for k, v in LV.items() if k != "grid"},
        dict(LV, grid={"steps": 10}),
        dict(LV, algebra={"kind": "nonsense"}),
        dict(LV, X0=[1.0]),
        dict(LV, coefficients={"model": "linear", "f1": ["1 +", "0"]}),
        dict(LV, convention="other"),
    ],
)
def test_config_errors_exit_1(tmp_path, capsys, cfg):
    assert _run(tmp_path, "compare", cfg) == 1
    assert _summary(capsys)["status"] == "config_error"


def test_missing_config_file(tmp_path, capsys):
    assert main(["compare", "--config", str(tmp_path / "nope.json")]) == 1


def test_math_domain_error_exit_2(tmp_path, capsys):
    cfg = dict(LV, algebra={"kind": "Cp", "p": 1}, X0=[1.0, 1.0])
    assert _run(tmp_path, "solve-lv", cfg) == 2
    s = _summary(capsys)
    assert s["error"] == "SingularElement"


def test_validation_failure_exit_3(tmp_path, capsys):
    cfg = dict(LV, tolerances={"compare": 1e-12})
    assert _run(tmp_path, "compare", cfg) == 3
    assert _summary(capsys)["status"] == "validation_failure"


def test_module_entry_point(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"algebra": "A3_4"}))
    proc = subprocess.run([sys.executable, "-m", "hypersde", "verify-algebra", "--config", str(path),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["pass"]
