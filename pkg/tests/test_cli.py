import json
import shutil
import subprocess

import numpy as np
import pytest

from hdsi.cli import dispatch


@pytest.fixture
def csv_path(tmp_path):
    rng = np.random.default_rng(3)
    n = 120
    X = rng.standard_normal((n, 8))
    female = (rng.random(n) < 0.5).astype(float)
    y = 1.0 + 0.8 * X[:, 0] - 0.5 * X[:, 1] + 0.3 * female + rng.standard_normal(n)
    lines = ["y,female," + ",".join(f"x{j + 1}" for j in range(8)) + ",const"]
    for i in range(n):
        lines.append(",".join(repr(float(v)) for v in [y[i], female[i], *X[i], 1.0]))
    path = tmp_path / "data.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


def run(argv, capsys):
    code = dispatch([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_fit_table_and_json(csv_path, capsys):
    code, out, err = run(["fit", "--data", csv_path, "--outcome", "y", "--seed", 1], capsys)
    assert code == 0
    assert "Number of selected variables" in out and "sup score statistic" in out
    assert "const" in err  # the constant column is dropped with a warning
    code, out, _ = run(["fit", "--data", csv_path, "--outcome", "y", "--seed", 1, "--json"], capsys)
    doc = json.loads(out)
    assert doc["kind"] == "lasso_fit" and "x1" in doc["selected"]


def test_missing_seed_is_reported(csv_path, capsys):
    code, _, err = run(["fit", "--data", csv_path, "--outcome", "y", "--B", 100], capsys)
    assert code == 0 and "seed: " in err


@pytest.mark.parametrize(
    "argv",
    [
        ["effects", "--data", "DATA", "--outcome", "y"],
        ["adjust", "--effects", "E", "--data", "DATA"],
        ["adjust", "--data", "DATA", "--outcome", "y", "--targets", "x1", "--method", "sidak"],
        ["simulate", "--B", 10, "--R", 1],
        ["fit", "--data", "DATA", "--outcome", "y", "--threads", 0],
        ["nonsense"],
    ],
)
def test_usage_errors_exit_2(argv, csv_path, capsys):
    argv = [csv_path if a == "DATA" else a for a in argv]
    assert run(argv, capsys)[0] == 2


def test_data_errors_exit_1(tmp_path, csv_path, capsys):
    code, _, err = run(["fit", "--data", tmp_path / "missing.csv", "--outcome", "y", "--seed", 0], capsys)
    assert code == 1 and "data" in err
    code, _, err = run(["effects", "--data", csv_path, "--outcome", "nope", "--targets", "x1"], capsys)
    assert code == 1
    code, _, err = run(["effects", "--data", csv_path, "--outcome", "y", "--targets", "zzz*"], capsys)
    assert code == 1


def test_threads_env_fallback(csv_path, capsys, monkeypatch):
    monkeypatch.setenv("HDSI_THREADS", "many")
    assert run(["fit", "--data", csv_path, "--outcome", "y", "--seed", 0], capsys)[0] == 2


def test_bonferroni_from_effects_file(tmp_path, csv_path, capsys):
    eff = tmp_path / "eff.json"
    code, _, _ = run(["effects", "--data", csv_path, "--outcome", "y", "--targets", "x1,x2,female", "--out", eff], capsys)
    assert code == 0
    raw = json.loads(eff.read_text())["p_value"]
    code, out, _ = run(["adjust", "--effects", eff, "--method", "bonferroni", "--json"], capsys)
    doc = json.loads(out)
    assert doc["adjusted"] == [min(3 * p, 1.0) for p in raw]
    assert doc["names"] == ["female", "x1", "x2"]


def test_interactions_become_targets(csv_path, capsys):
    code, out, _ = run(
        ["effects", "--data", csv_path, "--outcome", "y", "--targets", "female", "--interact", "female=x1,x2", "--json"],
        capsys,
    )
    assert code == 0
    assert json.loads(out)["names"] == ["female", "female:x1", "female:x2"]


def test_rw_is_byte_identical_and_pipeline_matches(tmp_path, csv_path, capsys):
    inline = ["adjust", "--data", csv_path, "--outcome", "y", "--targets", "x*", "--method", "RW", "--B", 300, "--seed", 7, "--json"]
    _, first, _ = run(inline, capsys)
    _, second, _ = run(inline, capsys)
    assert first == second
    eff = tmp_path / "e.json"
    run(["effects", "--data", csv_path, "--outcome", "y", "--targets", "x*", "--scores", "--out", eff], capsys)
    _, piped, _ = run(["adjust", "--effects", eff, "--method", "RW", "--B", 300, "--seed", 7, "--json"], capsys)
    assert piped == first


def test_rw_from_file_without_scores_fails(tmp_path, csv_path, capsys):
    eff = tmp_path / "e.json"
    run(["effects", "--data", csv_path, "--outcome", "y", "--targets", "x1", "--out", eff], capsys)
    code, _, err = run(["adjust", "--effects", eff, "--B", 200, "--seed", 1], capsys)
    assert code == 1 and "scores" in err


def test_confint_joint_and_marginal(csv_path, capsys):
    base = ["confint", "--data", csv_path, "--outcome", "y", "--targets", "x1,x2,x3", "--level", 0.9, "--json"]
    _, out, _ = run(base, capsys)
    marginal = json.loads(out)
    _, out, _ = run(base + ["--joint", "--B", 400, "--seed", 2], capsys)
    joint = json.loads(out)
    assert not marginal["joint"] and joint["joint"]
    assert joint["critical"] >= marginal["critical"] * 0.95


def test_threads_do_not_change_bytes(tmp_path, csv_path, capsys):
    outputs = []
    for t in (1, 2, 4):
        _, out, _ = run(["adjust", "--data", csv_path, "--outcome", "y", "--targets", "x*", "--B", 500, "--seed", 3, "--threads", t, "--json"], capsys)
        outputs.append(out)
    assert outputs[0] == outputs[1] == outputs[2]


def test_simulate_tiny(capsys):
    code, out, _ = run(["simulate", "--R", 1, "--n", 50, "--K", 5, "--s", 2, "--B", 100, "--seed", 1, "--json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["R"] == 1 and set(doc["methods"]) == {"naive", "BH", "bonferroni", "holm", "RW", "jointCI"}


def test_out_writes_manifest(tmp_path, csv_path, capsys):
    out = tmp_path / "fit.json"
    run(["fit", "--data", csv_path, "--outcome", "y", "--seed", 4, "--B", 100, "--out", out], capsys)
    manifest = json.loads((tmp_path / "fit.json.manifest.json").read_text())
    assert manifest["seed"] == 4 and manifest["command_line"][:2] == ["hdsi", "fit"]
    assert json.loads(out.read_text())["sup_score"]["seed"] == 4


@pytest.mark.skipif(shutil.which("hdsi") is None, reason="console script not installed")
def test_console_script(csv_path):
    proc = subprocess.run(["hdsi", "effects", "--data", str(csv_path), "--outcome", "y", "--targets", "x1"], capture_output=True, text=True)
    assert proc.returncode == 0 and "Std. Error" in proc.stdout
    proc = subprocess.run(["hdsi", "effects"], capture_output=True, text=True)
    assert proc.returncode == 2
