import json

import pytest

from andersen.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, run

TORUS_TOML = """
[space]
kind = "torus"
m = 4

[dynamics]
lambda = 24.0
t_end = 1.0
record_step = 0.1

[experiment]
replicas = 40
seed = 5
eval_time = 1.0

[output]
prefix = "small"
"""


@pytest.fixture
def torus_toml(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(TORUS_TOML, encoding="utf-8")
    return path


def _check(capsys, *argv):
    assert run(["check", *argv]) == EXIT_OK
    return json.loads(capsys.readouterr().out)


def test_check_torus_rates(capsys):
    report = _check(capsys, "--beta", "1", "--lambda-per-m", "6", "--ell", "1", "--m", "10", "--L", "0", "--J", "0")
    assert report["c_A"] == pytest.approx(0.003319, abs=1e-6)
    assert report["lambda"] == 60.0
    assert report["gamma"] == pytest.approx(1.5)
    assert report["cond_lambda_ok"] is False


def test_check_weakly_anharmonic_rates(capsys):
    report = _check(capsys, "--lambda", "1.7888543819998317", "--sigma-max", "1")
    assert report["c"] == pytest.approx(5**0.5 / 10)
    assert report["lambda_star"] == pytest.approx(8 / 5**0.5)
    assert report["branch"] == 1.6


def test_check_reports_the_gaussian_branch(capsys):
    report = _check(capsys, "--lambda", "1", "--sigma-max", "1", "--L-G", "1", "--branch", "0.4")
    assert report["branch"] == 0.4
    assert report["lambda_star"] == pytest.approx(4.0)
    assert report["c_star"] == pytest.approx(0.1)
    report = _check(capsys, "--lambda", "1", "--sigma-max", "1", "--branch", "0.4")
    assert report["lambda_star"] == pytest.approx(4 * 5**0.5 / 5)
    assert report["c_star"] == pytest.approx(5**0.5 / 10)


def test_check_from_config(capsys, torus_toml):
    report = _check(capsys, "--config", str(torus_toml))
    assert report["m"] == 4 and report["lambda"] == 24.0


def test_check_needs_a_frequency(capsys):
    assert run(["check", "--m", "3"]) == EXIT_CONFIG
    assert "--lambda" in capsys.readouterr().err


def test_usage_errors():
    assert run(["couple", "--no-such-flag", "1"]) == EXIT_CONFIG
    assert run([]) == EXIT_CONFIG
    assert run(["check", "--lambda", "1", "--lambda-per-m", "1"]) == EXIT_CONFIG


def test_invalid_config_combination(tmp_path, torus_toml, capsys):
    code = run(["couple", "--config", str(torus_toml), "--output.dir", str(tmp_path), "--potential.variant", "quadratic"])
    assert code == EXIT_CONFIG
    assert "Configuration error" in capsys.readouterr().err
    assert run(["couple", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG


def test_couple_writes_curve_and_reruns_from_meta(tmp_path, torus_toml):
    out = tmp_path / "out"
    assert run(["couple", "--config", str(torus_toml), "--output.dir", str(out)]) == EXIT_OK
    csv_path, meta_path = out / "small.csv", out / "small.meta.json"
    lines = csv_path.read_bytes().split(b"\r\n")
    assert lines[0] == b"t,mean,stderr,count"
    assert len([line for line in lines if line]) == 12
    assert lines[1].startswith(b"0,0.5,")

    meta = json.loads(meta_path.read_text())
    assert meta["config"]["space"]["m"] == 4
    assert meta["replicas"] == 40 and meta["master_seed"] == 5

    first_csv, first_meta = csv_path.read_bytes(), meta_path.read_bytes()
    rerun = tmp_path / "meta_copy.json"
    rerun.write_bytes(first_meta)
    assert run(["couple", "--config", str(rerun)]) == EXIT_OK
    assert csv_path.read_bytes() == first_csv
    assert meta_path.read_bytes() == first_meta


def test_overrides_change_the_run(tmp_path, torus_toml):
    out = tmp_path / "out"
    args = ["couple", "--config", str(torus_toml), "--output.dir", str(out)]
    assert run([*args, "--experiment.replicas", "12", "--output.prefix", "tiny"]) == EXIT_OK
    meta = json.loads((out / "tiny.meta.json").read_text())
    assert meta["replicas"] == 12
    assert meta["config"]["experiment"]["replicas"] == 12


def test_simulate_writes_trajectory(tmp_path, torus_toml):
    assert run(["simulate", "--config", str(torus_toml), "--output.dir", str(tmp_path)]) == EXIT_OK
    rows = (tmp_path / "small_trajectory.csv").read_text().splitlines()
    assert rows[0] == "t,x0,x1,x2,x3,v0,v1,v2,v3"
    assert len(rows) == 12
    assert json.loads((tmp_path / "small_trajectory.meta.json").read_text())["command"] == "simulate"


def test_sweep_writes_one_row_per_value(tmp_path, torus_toml):
    args = ["sweep", "--config", str(torus_toml), "--output.dir", str(tmp_path)]
    args += ["--experiment.sweep_axis", "lambda_per_m", "--experiment.sweep_values", "[4, 8]"]
    assert run(args) == EXIT_OK
    rows = (tmp_path / "small_sweep.csv").read_text().splitlines()
    assert rows[0].startswith("lambda_per_m,rate,")
    assert [r.split(",")[0] for r in rows[1:]] == ["4", "8"]


def test_runtime_failure_exit_code(tmp_path, capsys):
    path = tmp_path / "unstable.toml"
    path.write_text(
        "\n".join(
            [
                "[space]",
                'kind = "euclidean"',
                "[potential]",
                'variant = "quadratic"',
                "c_inv = [10000.0]",
                "[dynamics]",
                "lambda = 1.0",
                "t_end = 50.0",
                'flow_mode = "verlet"',
                "flow_step = 0.5",
                "[coupling]",
                'kind = "synchronous"',
                "[experiment]",
                "replicas = 4",
                'distance = "rho_squared_wah"',
                'initial = "offset"',
            ]
        ),
        encoding="utf-8",
    )
    assert run(["couple", "--config", str(path), "--output.dir", str(tmp_path)]) == EXIT_RUNTIME
    assert "Run failed" in capsys.readouterr().err


def test_selftest_passes(capsys):
    assert run(["selftest"]) == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out
