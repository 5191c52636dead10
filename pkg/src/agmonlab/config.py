"""Experiment configuration files.

Plain text, ``key = value`` lines under ``[section]`` headers, ``#`` or ``;``
comments::

    [experiment]
    name = control            # see EXPERIMENTS
    out = results             # output directory

    [problem]
    builtin = sphere          # airy | quadratic | custom-table | sphere
    table = potential.csv     # custom-table only: two columns x, V
    a = -4                    # domain ends (interval problems)
    b = 6
    E = 0
    n = 2001                  # base grid size
    h = 0.1, 0.05, 0.025      # strictly decreasing
    mode = fixed:1            # sphere only: fixed:M or inverse:C (m = round(C/h))

    [parameters]
    eps = 0.2                 # control annulus width
    weight_eps = 0.01         # Carleman weight parameter (reverse check, bracket)
    r0 = 0.25                 # collar half-width (default: dyadic search)
    delta1 = 0.04             # reverse annulus in V - E units
    delta2 = 0.2
    p = 2                     # L^p exponent, or inf
    level = 0.3               # Fermi height of the restriction curve
    bump = 0                  # amplitude of y_n = level + bump cos(theta)
    gamma_level = 0.05        # inner curve for the nodal bound
    probes = 2.0, 2.5         # forward-decay probe coordinates

Every key is optional; unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace

from .core_model import (ModeRule, Problem1D, airy_problem, quadratic_problem, sphere_problem,
                         table_potential)
from .errors import ConfigError

EXPERIMENTS = ("regularity", "agmon-distance", "forward-decay", "reverse-agmon", "control",
               "carleman-bracket", "restriction", "nodal", "counterexample", "full-suite")
BUILTINS = ("airy", "quadratic", "custom-table", "sphere")

_KEYS = {
    "experiment": {"name": str, "out": str},
    "problem": {"builtin": str, "table": str, "a": float, "b": float, "e": float, "n": int,
                "h": "floats", "mode": str},
    "parameters": {"eps": float, "weight_eps": float, "r0": float, "delta1": float,
                   "delta2": float, "p": "p", "level": float, "bump": float,
                   "gamma_level": float, "probes": "floats"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    out: str = "results"
    builtin: str = "airy"
    table: str | None = None
    a: float | None = None
    b: float | None = None
    E: float | None = None
    n: int | None = None
    h: tuple | None = None
    mode: str = "fixed:1"
    eps: float = 0.2
    weight_eps: float = 0.01
    r0: float | None = None
    delta1: float | None = None
    delta2: float | None = None
    p: float = 2.0
    level: float | None = None
    bump: float = 0.0
    gamma_level: float | None = None
    probes: tuple | None = None

    def canonical(self):
        d = asdict(self)
        d.pop("out")
        if math.isinf(d["p"]):
            d["p"] = "inf"
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def digest(self):
        """Short content hash used in artifact names (no timestamps)."""
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    def with_(self, **kw):
        return ExperimentConfig(**{**asdict(self), **kw})


def _parse(kind, raw, where):
    try:
        if kind == "floats":
            vals = tuple(float(v) for v in raw.replace(";", ",").split(",") if v.strip())
            if not vals:
                raise ValueError("empty list")
            return vals
        if kind == "p":
            return math.inf if raw.strip().lower() in ("inf", "infinity") else float(raw)
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} ({exc})") from None


def parse_config(text, experiment=None, out=None):
    """Validate config text; ``experiment`` and ``out`` override the file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    values = {}
    for section in cp.sections():
        keys = _KEYS.get(section.lower())
        if keys is None:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            kind = keys.get(key.lower())
            if kind is None:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[key.lower()] = _parse(kind, raw, f"[{section}] {key}")
    name = experiment or values.pop("name", None)
    values.pop("name", None)
    if name is None:
        raise ConfigError("no experiment given")
    if out is not None:
        values["out"] = out
    if "e" in values:
        values["E"] = values.pop("e")
    cfg = ExperimentConfig(experiment=name, **values)
    validate(cfg)
    return cfg


def load_config(path, experiment=None, out=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, experiment, out)


def validate(cfg):
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    if cfg.builtin not in BUILTINS:
        raise ConfigError(f"unknown builtin {cfg.builtin!r}; choose from {', '.join(BUILTINS)}")
    if cfg.builtin == "custom-table" and not cfg.table:
        raise ConfigError("builtin custom-table needs a table path")
    if cfg.h is not None:
        if any(v <= 0 for v in cfg.h) or any(b >= a for a, b in zip(cfg.h, cfg.h[1:])):
            raise ConfigError("h values must be positive and strictly decreasing")
        if len(cfg.h) < 3:
            raise ConfigError("need at least 3 h values")
    if cfg.n is not None and cfg.n < 3:
        raise ConfigError("n must be at least 3")
    for key in ("eps", "weight_eps", "r0", "delta1", "delta2", "level", "gamma_level"):
        v = getattr(cfg, key)
        if v is not None and not v > 0 and not (key == "weight_eps" and v == 0):
            raise ConfigError(f"{key} must be positive")
    if cfg.p < 1:
        raise ConfigError("p must be >= 1")
    if cfg.experiment == "nodal" and cfg.builtin != "sphere":
        raise ConfigError("the nodal experiment needs a surface problem (builtin = sphere)")
    parse_mode(cfg.mode)


def parse_mode(text):
    kind, _, val = text.partition(":")
    try:
        return ModeRule(kind.strip(), int(val or 1))
    except ValueError:
        raise ConfigError(f"bad mode {text!r}; use fixed:M or inverse:C") from None


def build_problem(cfg):
    """Problem object described by the ``[problem]`` block."""
    kw = {}
    if cfg.h is not None:
        kw["h_seq"] = cfg.h
    if cfg.builtin == "sphere":
        if cfg.n is not None:
            kw["n_s"] = cfg.n
        return sphere_problem(parse_mode(cfg.mode), **kw)
    if cfg.n is not None:
        kw["n"] = cfg.n
    if cfg.builtin == "airy":
        p = airy_problem(**kw)
    elif cfg.builtin == "quadratic":
        p = quadratic_problem(E=1.0 if cfg.E is None else cfg.E, **kw)
    else:
        try:
            V, lo, hi = table_potential(cfg.table)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load table {cfg.table!r}: {exc}") from None
        p = Problem1D(V, lo, hi, 0.0 if cfg.E is None else cfg.E, kw.get("n", 2001),
                      kw.get("h_seq", ()), "custom-table")
    changes = {}
    if cfg.a is not None:
        changes["a"] = cfg.a
    if cfg.b is not None:
        changes["b"] = cfg.b
    if cfg.E is not None and cfg.builtin == "airy":
        changes["E"] = cfg.E
    if changes:
        try:
            p = replace(p, **changes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return p
