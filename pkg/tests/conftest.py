import numpy as np
import pytest

from andersen.config import settings


@pytest.fixture(autouse=True)
def serial_settings(monkeypatch):
    """Run replicas in-process with a small chunk size unless a test says otherwise"""
    monkeypatch.setattr(settings, "THREADS", 1)
    monkeypatch.setattr(settings, "CHUNK_SIZE", 512)
    monkeypatch.setattr(settings, "PROGRESS", False)
    yield settings


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def torus_run_config(**overrides) -> dict:
    """Small free-streaming torus experiment as a plain config dict"""
    data = {
        "space": {"kind": "torus", "m": 10, "ell": 1.0},
        "potential": {"variant": "zero"},
        "dynamics": {"lambda": 60.0, "beta": 1.0, "t_end": 2.0, "flow_mode": "exact", "record_step": 0.1},
        "coupling": {"kind": "mirror", "gamma": "auto"},
        "experiment": {"replicas": 200, "seed": 11, "distance": "rho_simple", "initial": "antipodal"},
    }
    for key, value in overrides.items():
        section, name = key.split("__")
        data.setdefault(section, {})[name] = value
    return data


def neal_run_config(**overrides) -> dict:
    data = {
        "space": {"kind": "euclidean", "m": 1, "n": 10},
        "potential": {"variant": "quadratic", "c_inv": "neal"},
        "dynamics": {"lambda": 4 * np.sqrt(5) / 5, "beta": 1.0, "t_end": 5.0, "flow_mode": "exact", "record_step": 0.5},
        "coupling": {"kind": "synchronous"},
        "experiment": {
            "replicas": 200,
            "seed": 3,
            "distance": "rho_squared_wah",
            "initial": "offset",
            "offset": 1.0,
        },
    }
    for key, value in overrides.items():
        section, name = key.split("__")
        data.setdefault(section, {})[name] = value
    return data


@pytest.fixture
def torus_data():
    """Factory for torus config dicts; keyword overrides as section__key=value"""
    return torus_run_config


@pytest.fixture
def neal_data():
    return neal_run_config
