"""TOML run configs and flag overrides -> validated :class:`RunConfig`."""

from __future__ import annotations

import sys

from .experiments import RunConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# (section, key) in the file -> RunConfig field
FILE_KEYS = {
    ("", "experiment"): "experiment",
    ("model", "name"): "model",
    ("model", "params"): "model_params",
    ("model", "d"): "d",
    ("model", "boundary"): "boundary",
    ("model", "term"): "term",
    ("run", "L_grid"): "L_grid",
    ("run", "beta_grid"): "beta_grid",
    ("run", "samples"): "samples",
    ("run", "quadrature_order"): "quadrature_order",
    ("run", "seed"): "seed",
    ("run", "jobs"): "jobs",
    ("run", "max_dim"): "max_dim",
    ("gg", "monomials"): "monomials",
    ("rsb", "coupling_path"): "coupling_path",
    ("rsb", "share_g0"): "share_g0",
    ("output", "format"): "format",
    ("output", "path"): "out",
}

_TUPLES = {"L_grid": int, "beta_grid": float, "monomials": str}


def flatten(data: dict) -> dict:
    """Map a nested config document onto RunConfig field names; unknown keys are errors."""
    out = {}
    for key, value in data.items():
        if isinstance(value, dict) and key != "params":
            for sub, sub_value in value.items():
                if (key, sub) not in FILE_KEYS:
                    raise ValueError(f"unknown config key '{key}.{sub}'")
                out[FILE_KEYS[(key, sub)]] = sub_value
        elif ("", key) in FILE_KEYS:
            out[FILE_KEYS[("", key)]] = value
        else:
            raise ValueError(f"unknown config key '{key}'")
    return out


def _coerce(values: dict) -> dict:
    values = dict(values)
    for name, kind in _TUPLES.items():
        if name in values:
            values[name] = tuple(kind(v) for v in values[name])
    if "coupling_path" in values:
        path = []
        for point in values["coupling_path"]:
            if len(point) != 2:
                raise ValueError(f"coupling path points must be [J0, J1] pairs, got {point!r}")
            path.append((float(point[0]), float(point[1])))
        values["coupling_path"] = tuple(path)
    if "model_params" in values:
        values["model_params"] = dict(values["model_params"])
    return values


def load_file(path) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ValueError(f"config {path} is not valid TOML: {exc}") from exc
    return flatten(data)


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """File values, then flag overrides (``None`` means "not given"), then validation."""
    values = load_file(path) if path is not None else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    if "experiment" not in values:
        raise ValueError("no experiment given (use a subcommand or set 'experiment' in the config)")
    try:
        cfg = RunConfig(**_coerce(values))
    except TypeError as exc:
        raise ValueError(f"bad config: {exc}") from exc
    return cfg.validate()
