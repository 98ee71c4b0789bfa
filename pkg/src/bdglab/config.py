"""Experiment configuration: INI sections with a typed, closed schema.

Example::

    [experiment]
    schema_version = 1
    seed = 20240501
    horizon = 1.0
    steps = 50
    paths = 100000
    dims = 1

    [generator]
    name = linear_z
    coef = 0.5

Unknown sections and keys are rejected.  Generator and terminal parameters
are validated against the builtin parameter lists; generators registered at
runtime accept any parameters their factory takes.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .generators import BUILTINS, generator_names

SCHEMA_VERSION = 1

_BUILTIN_GEN_PARAMS = {
    "zero": {},
    "linear_z": {"coef": float},
    "time_scaled": {"profile": str, "scale": float},
    "quadratic": {},
}
_TERMINAL_PARAMS = {
    "constant": {"value": float},
    "brownian": {"shift": float},
    "call": {"strike": float},
    "square": {},
}


@dataclass
class ExperimentConfig:
    seed: int
    horizon: float
    steps: int
    paths: int
    dims: int = 1
    workers: int = 1
    output: str = "bdglab-out"
    svg: bool = True
    generator: str = "zero"
    generator_params: dict = field(default_factory=dict)
    terminal: str = "brownian"
    terminal_params: dict = field(default_factory=dict)
    degree: int = 3
    picard_iters: int = 3
    refine_steps: list[int] = field(default_factory=list)
    p_list: list[float] = field(default_factory=lambda: [1.0, 2.0])
    allow_nonzero_start: bool = True
    n_list: list[float] = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0, 16.0])
    counterexample_p: float = 1.0
    verify_generators: list[str] = field(default_factory=list)
    verify_samples: int = 10000
    verify_box: float = 10.0
    lenglart_k: list[float] = field(default_factory=lambda: [0.25, 0.5, 0.75])

    def resolved(self) -> list[tuple[str, str]]:
        """Flat ``(key, value)`` pairs in a fixed order, for the manifest."""
        out = []
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if isinstance(value, dict):
                value = ", ".join(f"{k}={value[k]}" for k in sorted(value))
            elif isinstance(value, list):
                value = ", ".join(str(v) for v in value)
            out.append((name, str(value)))
        return out


def _int(section, key, raw, lo=None, hi=None):
    try:
        v = int(raw, 0)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"[{section}] {key}: {v} outside [{lo}, {hi}]")
    return v


def _float(section, key, raw, lo=None, hi=None, open_lo=False):
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"[{section}] {key}: must be finite")
    if lo is not None and (v < lo or (open_lo and v == lo)):
        raise ConfigError(f"[{section}] {key}: {v} below the allowed range")
    if hi is not None and v > hi:
        raise ConfigError(f"[{section}] {key}: {v} above the allowed range")
    return v


def _bool(section, key, raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def _list(section, key, raw, conv):
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise ConfigError(f"[{section}] {key}: empty list")
    return [conv(section, key, s) for s in items]


def _params(section, items, schema, name):
    out = {}
    for key, raw in items.items():
        if schema is None:
            try:
                out[key] = float(raw)
            except ValueError:
                out[key] = raw
            continue
        if key not in schema:
            raise ConfigError(f"[{section}] unknown parameter {key!r} for {name!r}")
        out[key] = _float(section, key, raw) if schema[key] is float else raw.strip()
    return out


_SECTIONS = {
    "experiment": {"schema_version", "seed", "horizon", "steps", "paths", "dims", "workers", "output", "svg"},
    "generator": None,
    "terminal": None,
    "solver": {"degree", "picard_iters", "refine_steps"},
    "ratio": {"p_list", "allow_nonzero_start"},
    "counterexample": {"n_list", "p"},
    "verify": {"generators", "samples", "box", "lenglart_k"},
}


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        allowed = _SECTIONS[section]
        if allowed is not None:
            for key in parser[section]:
                if key not in allowed:
                    raise ConfigError(f"[{section}] unknown key {key!r}")
    if "experiment" not in parser:
        raise ConfigError("missing [experiment] section")
    exp = parser["experiment"]
    for key in ("schema_version", "seed", "horizon", "steps", "paths"):
        if key not in exp:
            raise ConfigError(f"[experiment] missing required key {key!r}")
    version = _int("experiment", "schema_version", exp["schema_version"])
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}; this tool reads {SCHEMA_VERSION}")

    cfg = ExperimentConfig(
        seed=_int("experiment", "seed", exp["seed"], 0, 2**64 - 1),
        horizon=_float("experiment", "horizon", exp["horizon"], 0.0, open_lo=True),
        steps=_int("experiment", "steps", exp["steps"], 1, 10**7),
        paths=_int("experiment", "paths", exp["paths"], 1, 10**8),
    )
    if "dims" in exp:
        cfg.dims = _int("experiment", "dims", exp["dims"], 1, 16)
    if "workers" in exp:
        cfg.workers = _int("experiment", "workers", exp["workers"], 1, 1024)
    if "output" in exp:
        cfg.output = exp["output"].strip()
    if "svg" in exp:
        cfg.svg = _bool("experiment", "svg", exp["svg"])

    if "generator" in parser:
        sec = dict(parser["generator"])
        name = sec.pop("name", "zero").strip()
        if name not in generator_names():
            raise ConfigError(f"[generator] unknown generator {name!r}")
        schema = _BUILTIN_GEN_PARAMS[name] if name in BUILTINS else None
        cfg.generator, cfg.generator_params = name, _params("generator", sec, schema, name)
    if "terminal" in parser:
        sec = dict(parser["terminal"])
        name = sec.pop("name", "brownian").strip()
        if name not in _TERMINAL_PARAMS:
            raise ConfigError(f"[terminal] unknown terminal {name!r}")
        cfg.terminal, cfg.terminal_params = name, _params("terminal", sec, _TERMINAL_PARAMS[name], name)

    if "solver" in parser:
        sec = parser["solver"]
        if "degree" in sec:
            cfg.degree = _int("solver", "degree", sec["degree"], 0, 12)
        if "picard_iters" in sec:
            cfg.picard_iters = _int("solver", "picard_iters", sec["picard_iters"], 1, 100)
        if "refine_steps" in sec:
            cfg.refine_steps = _list("solver", "refine_steps", sec["refine_steps"], lambda s, k, r: _int(s, k, r, 1, 10**6))
    if "ratio" in parser:
        sec = parser["ratio"]
        if "p_list" in sec:
            cfg.p_list = _list("ratio", "p_list", sec["p_list"], lambda s, k, r: _float(s, k, r, 1.0, 8.0))
        if "allow_nonzero_start" in sec:
            cfg.allow_nonzero_start = _bool("ratio", "allow_nonzero_start", sec["allow_nonzero_start"])
    if "counterexample" in parser:
        sec = parser["counterexample"]
        if "n_list" in sec:
            cfg.n_list = _list("counterexample", "n_list", sec["n_list"], lambda s, k, r: _float(s, k, r, 0.0, open_lo=True))
            if any(b <= a for a, b in zip(cfg.n_list, cfg.n_list[1:])):
                raise ConfigError("[counterexample] n_list must be strictly increasing")
        if "p" in sec:
            cfg.counterexample_p = _float("counterexample", "p", sec["p"], 1.0, 8.0)
    if "verify" in parser:
        sec = parser["verify"]
        if "generators" in sec:
            names = [s.strip() for s in sec["generators"].split(",") if s.strip()]
            unknown = [n for n in names if n not in generator_names()]
            if unknown:
                raise ConfigError(f"[verify] unknown generators {unknown}")
            cfg.verify_generators = names
        if "samples" in sec:
            cfg.verify_samples = _int("verify", "samples", sec["samples"], 1, 10**8)
        if "box" in sec:
            cfg.verify_box = _float("verify", "box", sec["box"], 0.0, open_lo=True)
        if "lenglart_k" in sec:
            cfg.lenglart_k = _list("verify", "lenglart_k", sec["lenglart_k"], lambda s, k, r: _float(s, k, r, 0.0, open_lo=True))
            if any(k >= 1.0 for k in cfg.lenglart_k):
                raise ConfigError("[verify] lenglart_k values must lie in (0, 1)")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    return parse_config(text)
