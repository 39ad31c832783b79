"""TOML run configuration with embedded defaults."""
from __future__ import annotations

import copy
import hashlib
import sys

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .gamma_lab import StudyConfig

__all__ = ["ConfigError", "DEFAULTS", "default_config", "load_config", "loads_config", "dumps_config",
           "config_hash", "study_config", "parse_seed_crack"]


class ConfigError(ValueError):
    pass


DEFAULTS: dict = {
    "profile": {"delta": 0.1},
    "schedule": {
        "dim": 2,
        "eps": [0.05, 0.035355339059327376, 0.025, 0.017677669529663688],
        "h_rule": "ratio",
        "h_ratio": 8.0,
        "h_power": 1.5,
        "kappa": 0.5590169943749475,
        "eta_exp": 2.0,
    },
    "geometry": {
        "crack_axis": 1,
        "crack_value": 0.5,
        "crack_from": 0.25,
        "crack_to": 0.75,
        "displacement": "zero",
        "jump": 1.0,
    },
    "energy": {"gc": 4.0, "constraint_check": "sample", "quad_order": 4},
    "repair": {"safety": 2.0, "samples": 5},
    "solver": {"g": 4.0, "outer_tol": 1e-9, "max_outer": 500, "rtol": 1e-10, "seed_crack": "x2=0.5,0.0,1.0"},
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for table, values in over.items():
        if table not in out:
            raise ConfigError(f"unknown config table [{table}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{table}] must be a table")
        for key, val in values.items():
            if key not in out[table]:
                raise ConfigError(f"unknown key {table}.{key}")
            ref = out[table][key]
            if isinstance(ref, float) and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            if type(val) is not type(ref):
                raise ConfigError(f"{table}.{key} must be of type {type(ref).__name__}")
            out[table][key] = val
    return out


def loads_config(text: str) -> dict:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return _merge(DEFAULTS, data)


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads_config(text)


def dumps_config(cfg: dict) -> str:
    return tomli_w.dumps(cfg)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(dumps_config(cfg).encode()).hexdigest()


def parse_seed_crack(text: str) -> tuple[int, float, float, float]:
    """``"x2=0.5,0.0,1.0"`` -> (normal axis index, position, extent from, extent to)."""
    try:
        axis, rest = text.split("=")
        axis = axis.strip().lower()
        idx = {"x": 0, "x1": 0, "x2": 1}[axis]
        parts = [float(p) for p in rest.split(",")]
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad crack seed {text!r}; expected 'x2=value,from,to'") from exc
    if len(parts) == 1:
        parts += [0.0, 1.0]
    if len(parts) != 3 or not parts[1] < parts[2]:
        raise ConfigError(f"bad crack seed {text!r}; expected 'x2=value,from,to' with from < to")
    return idx, parts[0], parts[1], parts[2]


def study_config(cfg: dict) -> StudyConfig:
    s, g, e, r, so = cfg["schedule"], cfg["geometry"], cfg["energy"], cfg["repair"], cfg["solver"]
    try:
        return StudyConfig(
            dim=s["dim"], eps=list(s["eps"]), h_rule=s["h_rule"], h_ratio=s["h_ratio"], h_power=s["h_power"],
            kappa=s["kappa"], eta_exp=s["eta_exp"], crack_axis=g["crack_axis"], crack_value=g["crack_value"],
            crack_from=g["crack_from"], crack_to=g["crack_to"], displacement=g["displacement"], jump=g["jump"],
            delta=cfg["profile"]["delta"], gc=e["gc"], safety=r["safety"], samples=r["samples"],
            quad_order=e["quad_order"], g=so["g"], outer_tol=so["outer_tol"], max_outer=so["max_outer"],
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
