"""Run-config loading and CSV / JSON output"""
import csv
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from .dynamics import Trajectory
from .errors import ConfigurationError
from .harness import EstimateSeries, SweepTable
from .schemas import RunConfig

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def read_config_file(path) -> dict:
    """Parse a TOML run config, or a JSON meta sidecar holding one under "config" """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigurationError(f"cannot read config file {path}: {e}") from e
    try:
        if path.suffix == ".json":
            data = json.loads(raw)
            return data["config"] if "config" in data else data
        return tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"cannot parse config file {path}: {e}") from e


def apply_overrides(data: dict, overrides: Mapping[str, Any]) -> dict:
    """Set dotted keys (dynamics.lambda, space.m, ...) in a nested config dict"""
    out = json.loads(json.dumps(data))
    for key, value in overrides.items():
        parts = key.split(".")
        node = out
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"cannot override '{key}': '{part}' is not a section")
        node[parts[-1]] = value
    return out


def validate_run_config(data: Mapping[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid run config:\n{e}") from e


def load_run_config(path=None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    data = read_config_file(path) if path is not None else {}
    return validate_run_config(apply_overrides(data, overrides or {}))


def dump_run_config(config: RunConfig) -> dict:
    return config.model_dump(mode="json", by_alias=True)


def _format(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])
    logger.info("wrote %s", path)
    return path


def write_series_csv(path, series: EstimateSeries) -> Path:
    rows = ((t, m, s, series.count) for t, m, s in zip(series.times, series.mean, series.stderr))
    return write_csv(path, ["t", "mean", "stderr", "count"], rows)


def write_sweep_csv(path, table: SweepTable) -> Path:
    header = [table.axis, "rate", "r_squared", "eval_time", "eval_mean", "eval_stderr", "theory_rate"]
    rows = (
        (r.value, r.rate, r.r_squared, r.eval_time, r.eval_mean, r.eval_stderr, r.theory_rate) for r in table.rows
    )
    return write_csv(path, header, rows)


def write_trajectory_csv(path, trajectory: Trajectory) -> Path:
    d = trajectory.x.shape[1]
    header = ["t"] + [f"x{i}" for i in range(d)] + [f"v{i}" for i in range(d)]
    rows = ([t, *x, *v] for t, x, v in zip(trajectory.times, trajectory.x, trajectory.v))
    return write_csv(path, header, rows)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def write_meta_json(path, meta: Mapping[str, Any]) -> Path:
    """Sidecar with the full config echo; no timestamps so reruns are byte-identical"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(dict(meta)), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path
