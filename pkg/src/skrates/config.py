"""Experiment configuration: flat ``key = value`` text files.

One assignment per line, ``#`` starts a comment, values are Python literals
(numbers, strings, lists).  Unknown keys are rejected so that typos never
fall back silently to defaults.
"""

from __future__ import annotations

import ast
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_EPS = (2.0**-3, 2.0**-4, 2.0**-5, 2.0**-6, 2.0**-7)


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class ExperimentConfig:
    eps_list: tuple = DEFAULT_EPS
    N: int = 64
    T: float = 0.25
    h: float | None = None          # resolved to T / 512 when omitted
    M: int = 2000
    noise: str = "white"
    noise_gamma: float | None = None
    nonlinearity: str = "sine"
    nonlinearity_c: float = 1.0
    u0: tuple = (2.0**-0.5,)
    v0: tuple = ()
    n_obs: int = 16
    functional: str = "cos-pairing"
    functional_w: tuple = (1.0,)
    p: int = 2
    seed: int = 0
    replica: int = 0
    bootstrap: int = 1000
    lemma: str = "contraction"
    lemma_alpha: float = 1.0
    lemma_delta: float = 0.0
    lemma_rho: float = 1.0

    def __post_init__(self):
        if self.h is None:
            object.__setattr__(self, "h", self.T / 512)
        object.__setattr__(self, "eps_list", tuple(float(e) for e in self.eps_list))
        for name in ("u0", "v0", "functional_w"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))

    @property
    def steps(self) -> int:
        return int(round(self.T / self.h))

    @property
    def obs_stride(self) -> int:
        return self.steps // self.n_obs

    @property
    def obs_times(self):
        return [self.h * self.obs_stride * (k + 1) for k in range(self.n_obs)]

    def replace(self, **changes) -> "ExperimentConfig":
        if "T" in changes and "h" not in changes:
            changes["h"] = None
        return validate(dataclasses.replace(self, **changes))

    def canonical(self) -> dict:
        return {f.name: _canon(getattr(self, f.name)) for f in dataclasses.fields(self)}

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _canon(value):
    if isinstance(value, tuple):
        return [_canon(v) for v in value]
    if isinstance(value, float):
        return repr(value)
    return value


KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)}

_INT_KEYS = {"N", "M", "n_obs", "p", "seed", "replica", "bootstrap"}
_FLOAT_KEYS = {"T", "h", "noise_gamma", "nonlinearity_c",
               "lemma_alpha", "lemma_delta", "lemma_rho"}
_LIST_KEYS = {"eps_list", "u0", "v0", "functional_w"}
_STR_KEYS = {"noise", "nonlinearity", "functional", "lemma"}


def _coerce(key, value, line):
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}", line)
        return value
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}", line)
        return float(value)
    if key in _LIST_KEYS:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, (list, tuple)) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
            raise ConfigError(f"{key} must be a list of numbers, got {value!r}", line)
        return tuple(float(x) for x in value)
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}", line)
    return value


def parse_config_text(text: str) -> ExperimentConfig:
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, rhs = line.partition("=")
        key = key.strip()
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        rhs = rhs.strip()
        try:
            value = ast.literal_eval(rhs)
        except (ValueError, SyntaxError):
            if key in _STR_KEYS and rhs.replace("-", "").replace(".", "").isalnum():
                value = rhs
            else:
                raise ConfigError(f"cannot parse value for {key!r}: {rhs!r}", lineno) from None
        values[key] = _coerce(key, value, lineno)
        lines[key] = lineno
    try:
        return validate(ExperimentConfig(**values), lines)
    except ConfigError:
        raise


def parse_config(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())


def validate(cfg: ExperimentConfig, lines: dict | None = None) -> ExperimentConfig:
    lines = lines or {}

    def fail(key, message):
        raise ConfigError(message, lines.get(key))

    if not cfg.eps_list:
        fail("eps_list", "eps_list must not be empty")
    if any(not 0 < e < 1 for e in cfg.eps_list):
        fail("eps_list", "every eps must lie in (0, 1)")
    if any(b >= a for a, b in zip(cfg.eps_list, cfg.eps_list[1:])):
        fail("eps_list", "eps_list must be strictly decreasing")
    if cfg.N < 1:
        fail("N", "N must be >= 1")
    if cfg.M < 1:
        fail("M", "M must be >= 1")
    if not cfg.T > 0:
        fail("T", "T must be positive")
    if not cfg.h > 0:
        fail("h", "h must be positive")
    ratio = cfg.T / cfg.h
    if abs(ratio - round(ratio)) > 1e-9 * max(ratio, 1.0) or round(ratio) < 1:
        fail("h", "h must divide T")
    if cfg.n_obs < 1 or cfg.steps % cfg.n_obs:
        fail("n_obs", "h must divide every observation time (n_obs must divide T/h)")
    if cfg.noise not in ("white", "power", "trace-class", "none"):
        fail("noise", f"unknown noise kind {cfg.noise!r}")
    if cfg.noise == "power" and (cfg.noise_gamma is None or cfg.noise_gamma < 0):
        fail("noise_gamma", "power noise needs noise_gamma >= 0")
    if cfg.nonlinearity not in ("zero", "linear", "sine"):
        fail("nonlinearity", f"unknown nonlinearity {cfg.nonlinearity!r}")
    if cfg.functional not in ("cos-pairing", "gauss-norm", "linear-pairing"):
        fail("functional", f"unknown functional {cfg.functional!r}")
    for key in ("u0", "v0", "functional_w"):
        vals = getattr(cfg, key)
        if len(vals) > cfg.N:
            fail(key, f"{key} has {len(vals)} coefficients but N = {cfg.N}")
        if not all(math.isfinite(x) for x in vals):
            fail(key, f"{key} must be finite")
    if cfg.p < 1:
        fail("p", "p must be >= 1")
    if cfg.bootstrap < 1:
        fail("bootstrap", "bootstrap must be >= 1")
    if cfg.replica < 0 or cfg.replica >= cfg.M:
        fail("replica", "replica must lie in [0, M)")
    return cfg
