import json
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from andersen.errors import ConfigurationError
from andersen.io import apply_overrides, load_run_config, read_config_file, write_csv, write_meta_json
from andersen.schemas import AndersenConfig, CouplingConfig, RunConfig, SpaceSpec, grid_times

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_space_defaults():
    torus = SpaceSpec(kind="torus", m=3)
    assert torus.ell == 1.0 and torus.dim == 3 and torus.is_torus
    assert SpaceSpec(m=2, n=5).dim == 10
    with pytest.raises(ValidationError):
        SpaceSpec(kind="torus", m=2, n=2)
    with pytest.raises(ValidationError):
        SpaceSpec(m=0)


def test_grid_times():
    assert np.allclose(grid_times(1.0, 0.25), [0.0, 0.25, 0.5, 0.75, 1.0])
    assert grid_times(5.0, 0.1).shape == (51,)
    assert np.array_equal(grid_times(0.0, 0.1), [0.0])


def test_andersen_config_record_times():
    config = AndersenConfig(lambda_=1.0, t_end=2.0, record_times=[0.0, 0.5, 2.0])
    assert np.array_equal(config.times(), [0.0, 0.5, 2.0])
    assert AndersenConfig.model_validate({"lambda": 2.0}).lambda_ == 2.0
    with pytest.raises(ValidationError):
        AndersenConfig(lambda_=1.0, t_end=2.0, record_times=[0.5, 0.5])
    with pytest.raises(ValidationError):
        AndersenConfig(lambda_=1.0, t_end=1.0, record_times=[2.0])
    with pytest.raises(ValidationError):
        AndersenConfig(lambda_=0.0)


def test_run_config_defaults_are_valid():
    config = RunConfig()
    assert config.space.is_torus
    assert config.coupling_config().gamma == pytest.approx(1.0 / (0.5 + 10.0))


def test_auto_gamma_resolution(torus_data):
    config = RunConfig.model_validate(torus_data())
    assert config.resolved_gamma() == pytest.approx(1.0 / (0.5 + 10 / 60))
    coupling = config.coupling_config()
    assert isinstance(coupling, CouplingConfig)
    assert coupling.kind == "mirror" and coupling.lambda_ == 60.0
    explicit = RunConfig.model_validate(torus_data(coupling__gamma=0.25))
    assert explicit.resolved_gamma() == 0.25


def test_synchronous_resolves_to_zero_gamma(neal_data):
    config = RunConfig.model_validate(neal_data())
    assert config.resolved_gamma() == 0.0
    assert config.coupling_config().kind == "synchronous"


def test_torus_cosine_inherits_circumference(torus_data):
    data = torus_data(space__ell=2.0, dynamics__flow_mode="verlet")
    data["potential"] = {"variant": "torus_cosine", "amp_local": 0.1}
    config = RunConfig.model_validate(data)
    assert config.potential.ell == 2.0


def _verlet_cosine(data, **potential):
    data["dynamics"]["flow_mode"] = "verlet"
    data["potential"] = {"variant": "torus_cosine", **potential}


@pytest.mark.parametrize(
    "change",
    [
        lambda d: d.update(potential={"variant": "quadratic"}),
        lambda d: d.update(potential={"variant": "torus_cosine", "amp_local": 1.0}),
        lambda d: d["space"].update(kind="euclidean", ell=None),
        lambda d: d["experiment"].update(distance="rho_squared_wah"),
        lambda d: d["experiment"].update(record_times=[0.0, 9.0]),
        lambda d: d["experiment"].update(fit_window=[2.0, 1.0]),
        lambda d: d["experiment"].update(initial="offset"),
        lambda d: _verlet_cosine(d, amp_local=1.0, ell=2.0),
        lambda d: _verlet_cosine(d, neighbor_graph=[[0, 10]]),
        lambda d: _verlet_cosine(d, neighbor_graph=[[3, 3]]),
    ],
)
def test_run_config_cross_checks(torus_data, change):
    data = torus_data()
    change(data)
    with pytest.raises(ValidationError):
        RunConfig.model_validate(data)


def test_euclidean_cross_checks(neal_data):
    with pytest.raises(ValidationError):
        RunConfig.model_validate(neal_data(potential__c_inv=[1.0, 2.0]))
    with pytest.raises(ValidationError):
        RunConfig.model_validate(neal_data(experiment__offset=[1.0, 2.0]))
    with pytest.raises(ValidationError):
        RunConfig.model_validate(neal_data(coupling__kind="mirror", coupling__gamma="auto"))
    mirror = RunConfig.model_validate(neal_data(coupling__kind="mirror", coupling__gamma=0.5))
    assert mirror.resolved_gamma() == 0.5


@pytest.mark.parametrize("name", ["free_torus.toml", "lambda_sweep.toml", "neal.toml", "torus_cosine.toml"])
def test_shipped_configs_load(name):
    config = load_run_config(CONFIGS / name)
    assert config.output.prefix


def test_shipped_torus_cosine_config_meets_conditions():
    from andersen.metrics import torus_params
    from andersen.potentials import build_potential

    config = load_run_config(CONFIGS / "torus_cosine.toml")
    consts = build_potential(config.potential, config.space).constants()
    params = torus_params(1.0, config.dynamics.lambda_, config.space.m, config.space.ell, consts.L, consts.J)
    assert params.cond_lambda_ok and params.cond_J_ok


def test_overrides_and_load(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('[space]\nkind = "torus"\nm = 4\n\n[dynamics]\nlambda = 24.0\n', encoding="utf-8")
    config = load_run_config(path, {"space.m": 8, "experiment.replicas": 12})
    assert config.space.m == 8 and config.experiment.replicas == 12
    assert config.dynamics.lambda_ == 24.0
    assert apply_overrides({"a": {"b": 1}}, {"a.c": 2}) == {"a": {"b": 1, "c": 2}}
    with pytest.raises(ConfigurationError):
        apply_overrides({"a": 1}, {"a.b": 2})


def test_config_read_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[space\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        read_config_file(bad)
    with pytest.raises(ConfigurationError):
        read_config_file(tmp_path / "missing.toml")
    invalid = tmp_path / "invalid.toml"
    invalid.write_text("[space]\nm = -1\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_run_config(invalid)


def test_meta_sidecar_round_trips_config(tmp_path, torus_data):
    config = RunConfig.model_validate(torus_data())
    meta = write_meta_json(tmp_path / "run.meta.json", {"config": config.model_dump(mode="json", by_alias=True)})
    assert load_run_config(meta) == config


def test_csv_format(tmp_path):
    path = write_csv(tmp_path / "out" / "a.csv", ["t", "mean", "ok"], [(0.1, 1 / 3, True), (2, float("nan"), False)])
    raw = path.read_bytes()
    assert raw.startswith(b"t,mean,ok\r\n")
    assert b"0.10000000000000001,0.33333333333333331,true\r\n" in raw
    assert raw.endswith(b"2,nan,false\r\n")


def test_meta_json_is_stable(tmp_path):
    meta = {"b": np.float64(1.5), "a": [np.int64(2), float("inf")], "c": np.bool_(True)}
    write_meta_json(tmp_path / "m.json", meta)
    first = (tmp_path / "m.json").read_bytes()
    write_meta_json(tmp_path / "m.json", dict(reversed(list(meta.items()))))
    assert (tmp_path / "m.json").read_bytes() == first
    assert json.loads(first) == {"a": [2, None], "b": 1.5, "c": True}
