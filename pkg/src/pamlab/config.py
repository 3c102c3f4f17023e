"""Flat key-value run configuration with a canonical hash.

The file format is one `key = value` assignment per line, `#` comments and
blank lines allowed.  Keys are flat (no sections); every key has a typed
schema entry; unknown keys and duplicate keys are hard errors with line and
column positions.  The canonical serialization (sorted keys, repr-stable
values) defines the config hash used for provenance.

Seeds are mandatory: every run must be replayable.
"""

import hashlib
import math
from dataclasses import dataclass, field as dc_field

from .errors import ConfigError

_REQUIRED = object()


def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "yes", "1"):
        return True
    if s.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_floats(s: str) -> tuple:
    return tuple(float(p) for p in s.split(",") if p.strip())


def _parse_ints(s: str) -> tuple:
    return tuple(int(p) for p in s.split(",") if p.strip())


# key -> (parser, default); _REQUIRED means the key must be present
_SCHEMA = {
    "subcommand": (str, _REQUIRED),
    "seed": (int, _REQUIRED),
    "dim": (int, 3),
    "beta": (float, 0.2),
    "dt": (float, 0.05),
    "radius": (int, 0),            # 0 = derive from the horizon rule
    "noise_radius": (int, 0),      # 0 = same as radius
    "realizations": (int, 100),
    "t": (float, 16.0),
    "s": (float, 0.0),
    "t_grid": (_parse_floats, (4.0, 8.0, 16.0, 32.0)),
    "horizons": (_parse_floats, (4.0, 8.0, 16.0, 32.0)),
    "s_burn": (float, 0.0),        # 0 = auto (3x the largest time)
    "t_burn": (float, 0.0),        # 0 = auto (3x the largest time)
    "sigma": (float, 0.7),
    "class_c": (float, 0.5),
    "class_eps": (float, 0.5),
    "profile": (str, "constant"),
    "profile_seed": (int, 0),
    "x": (_parse_ints, (0, 0, 0)),
    "y": (_parse_ints, (0, 0, 0)),
    "y1": (_parse_ints, (1, 0, 0)),
    "y2": (_parse_ints, (0, 0, 0)),
    "n_samples": (int, 10000),
    "u_grid": (_parse_floats, (0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0)),
    "boundary": (str, "monitor"),
    "leak_tol": (float, 1e-8),
    "kernel_halfwidth": (int, 5),
    "series_tol": (float, 1e-16),
}

SUBCOMMANDS = ("kernels", "noise", "mc", "evolve", "decompose", "factorize",
               "attract", "tails", "stationary")
_SIGMA_GATED = ("decompose", "factorize", "attract")


@dataclass(frozen=True)
class RunConfig:
    values: dict = dc_field(default_factory=dict)

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise AttributeError(key)

    def canonical(self) -> str:
        lines = [f"{k} = {_format_value(self.values[k])}"
                 for k in sorted(self.values)]
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    @property
    def max_time(self) -> float:
        times = [self.values["t"], *self.values["t_grid"],
                 *self.values["horizons"]]
        return max(times)


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_format_value(c) for c in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a flat key-value configuration document."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            col = len(line) - len(line.lstrip()) + 1
            raise ConfigError(
                f"line {lineno}, column {col}: expected 'key = value'")
        key, _, val = stripped.partition("=")
        key = key.strip()
        val = val.strip()
        col = line.index(key) + 1 if key and key in line else 1
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}, column {col}: unknown key "
                              f"{key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}, column {col}: duplicate key "
                              f"{key!r}")
        parser = _SCHEMA[key][0]
        try:
            raw[key] = parser(val)
        except (ValueError, TypeError) as exc:
            vcol = line.index(val) + 1 if val and val in line else col
            raise ConfigError(
                f"line {lineno}, column {vcol}: bad value for {key!r}: {exc}")
    for key, (_, default) in _SCHEMA.items():
        if key not in raw:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {key!r}")
            raw[key] = default
    return validate_config(RunConfig(raw))


def validate_config(cfg: RunConfig) -> RunConfig:
    v = dict(cfg.values)
    if v["subcommand"] not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {v['subcommand']!r}; choose "
                          f"one of {SUBCOMMANDS}")
    if v["dt"] <= 0:
        raise ConfigError("dt must be positive")
    if v["dim"] < 1:
        raise ConfigError("dim must be >= 1")
    if v["beta"] < 0:
        raise ConfigError("beta must be >= 0")
    if v["realizations"] < 1:
        raise ConfigError("realizations must be >= 1")
    for key in ("x", "y", "y1", "y2"):
        if len(v[key]) != v["dim"]:
            raise ConfigError(f"{key} must have dim={v['dim']} coordinates")
    if v["subcommand"] in _SIGMA_GATED:
        lo = 1.0 / (1.0 + v["class_eps"])
        if not lo < v["sigma"] < 1.0:
            raise ConfigError(
                f"sigma must lie in (1/(1+eps), 1) = ({lo:.6g}, 1) for "
                f"{v['subcommand']}; got sigma = {v['sigma']} with eps = "
                f"{v['class_eps']} (1/(1+eps) = {lo:.6g})")
    big_t = max([v["t"], *v["t_grid"], *v["horizons"]])
    if v["s_burn"] == 0.0:
        v["s_burn"] = 3.0 * big_t
    if v["t_burn"] == 0.0:
        v["t_burn"] = 3.0 * big_t
    if v["radius"] == 0:
        # horizon rule, capped at the desk-scale default box
        v["radius"] = min(40, math.ceil(big_t + 4.0 * math.sqrt(big_t)) + 2)
    if v["radius"] < 1:
        raise ConfigError("radius must be >= 1")
    if v["noise_radius"] == 0:
        v["noise_radius"] = v["radius"]
    if v["noise_radius"] < v["radius"]:
        raise ConfigError("noise_radius must cover the box radius")
    for key in ("t", "s_burn", "t_burn"):
        if v[key] < 0:
            raise ConfigError(f"{key} must be >= 0")
    return RunConfig(v)
