"""Experiment configuration: INI schema, validation and the benchmark presets.

A config file has the sections ``[problem]``, ``[prior]``, ``[regularizer]``,
``[sampler]`` and ``[output]``; every key is optional and falls back to the
defaults below (or to its preset, when ``problem.preset`` is given).
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from .prior import KERNEL_KINDS
from .sampler import TRANSFORMS


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


REGULARIZERS = ("none", "tv", "tp")
WEIGHT_FORMS = ("product", "power")


@dataclass(frozen=True)
class ExperimentConfig:
    # [problem]
    example: int = 1
    m: Optional[int] = None
    source: float = 1.0
    noise_rel: float = 1e-3
    stride: int = 1
    refinement: int = 1
    weierstrass_a: float = 0.4
    weierstrass_b: float = 4.0
    weierstrass_K: int = 10
    # [prior]
    prior: str = "periodic_squared_exponential"
    l: float = 1.0
    p: float = 1.0
    s: float = 1.5
    # [regularizer]
    regularizer: str = "tp"
    lam: float = 4.0
    theta: float = 3.0
    beta: float = 0.001
    weight_form: str = "product"
    # [sampler]
    rho: float = 0.002
    N: int = 100_000
    burn_in: float = 0.5
    lag: int = 5
    transform: str = "identity"
    seed: int = 0
    # [output]
    out: str = "runs/out"
    name: str = "custom"
    provenance: Dict[str, str] = field(default_factory=dict, compare=False, repr=False)

    def replace(self, **changes) -> "ExperimentConfig":
        prov = dict(self.provenance)
        for key in changes:
            prov[key] = "override"
        return validate(dataclasses.replace(self, provenance=prov, **changes))

    def flat(self) -> Dict[str, Any]:
        return {k: getattr(self, k) for k in FIELD_SECTION}


# key -> (section, type)
SCHEMA = {
    "example": ("problem", int),
    "m": ("problem", int),
    "source": ("problem", float),
    "noise_rel": ("problem", float),
    "stride": ("problem", int),
    "refinement": ("problem", int),
    "weierstrass_a": ("problem", float),
    "weierstrass_b": ("problem", float),
    "weierstrass_K": ("problem", int),
    "prior": ("prior", str),
    "l": ("prior", float),
    "p": ("prior", float),
    "s": ("prior", float),
    "regularizer": ("regularizer", str),
    "lam": ("regularizer", float),
    "theta": ("regularizer", float),
    "beta": ("regularizer", float),
    "weight_form": ("regularizer", str),
    "rho": ("sampler", float),
    "N": ("sampler", int),
    "burn_in": ("sampler", float),
    "lag": ("sampler", int),
    "transform": ("sampler", str),
    "seed": ("sampler", int),
    "out": ("output", str),
}
FIELD_SECTION = {k: sec for k, (sec, _) in SCHEMA.items()}
# INI spelling differs from the attribute name for these keys
INI_ALIASES = {("prior", "kind"): "prior", ("regularizer", "kind"): "regularizer",
               ("regularizer", "lambda"): "lam", ("output", "dir"): "out"}
INI_NAMES = {v: k for k, v in INI_ALIASES.items()}


def _check(cond, key, msg):
    if not cond:
        section = FIELD_SECTION.get(key, "problem")
        name = INI_NAMES.get(key, (section, key))[1]
        raise ConfigError(f"{section}.{name}: {msg}")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    _check(cfg.example in range(7), "example", f"{cfg.example} is not an example id in 0..6")
    _check(cfg.m is None or cfg.m >= 2, "m", f"{cfg.m} must be >= 2")
    _check(cfg.noise_rel >= 0, "noise_rel", f"{cfg.noise_rel} must be >= 0")
    _check(cfg.stride >= 1, "stride", f"{cfg.stride} must be >= 1")
    _check(cfg.refinement in (1, 2), "refinement", f"{cfg.refinement} must be 1 or 2")
    _check(0 < cfg.weierstrass_a < 1, "weierstrass_a", f"{cfg.weierstrass_a} outside (0, 1)")
    _check(cfg.weierstrass_K >= 0, "weierstrass_K", f"{cfg.weierstrass_K} must be >= 0")
    _check(cfg.prior in KERNEL_KINDS, "prior", f"{cfg.prior!r} not one of {KERNEL_KINDS}")
    _check(cfg.l > 0, "l", f"{cfg.l} must be > 0")
    _check(cfg.p > 0, "p", f"{cfg.p} must be > 0")
    _check(cfg.s > 0, "s", f"{cfg.s} must be > 0")
    _check(cfg.regularizer in REGULARIZERS, "regularizer",
           f"{cfg.regularizer!r} not one of {REGULARIZERS}")
    _check(cfg.lam >= 0, "lam", f"{cfg.lam} must be >= 0")
    _check(cfg.theta > 1, "theta", f"{cfg.theta} must be > 1")
    _check(cfg.beta > 0, "beta", f"{cfg.beta} must be > 0")
    _check(cfg.weight_form in WEIGHT_FORMS, "weight_form",
           f"{cfg.weight_form!r} not one of {WEIGHT_FORMS}")
    _check(0 <= cfg.rho <= 1, "rho", f"{cfg.rho} outside [0, 1]")
    _check(cfg.N >= 1, "N", f"{cfg.N} must be >= 1")
    _check(0 <= cfg.burn_in < 1, "burn_in", f"{cfg.burn_in} outside [0, 1)")
    _check(cfg.lag >= 1, "lag", f"{cfg.lag} must be >= 1")
    _check(cfg.transform in TRANSFORMS, "transform", f"{cfg.transform!r} not one of {TRANSFORMS}")
    _check(not (cfg.prior == "periodic_squared_exponential" and cfg.example >= 5), "prior",
           "the periodic kernel is only available for 1D examples")
    return cfg


# Parameters stated for each benchmark; everything else is inherited from the parent.
PRESETS: Dict[str, Dict[str, Any]] = {
    "example0": {
        "parent": None,
        "stated": {"example": 0, "prior": "periodic_squared_exponential", "s": 1.5, "l": 1.0,
                   "p": 1.0, "theta": 3.0, "beta": 0.001, "lam": 4.0, "rho": 0.002,
                   "N": 100_000},
    },
    "example1": {
        "parent": "example0",
        "stated": {"example": 1, "s": 1.6, "l": 0.2, "lam": 20.0, "rho": 0.01},
    },
    "example2": {
        "parent": "example1",
        # the proposal step is printed as "beta = 0.005" in the source text
        "stated": {"example": 2, "prior": "squared_exponential", "l": 0.05, "lam": 10.0,
                   "rho": 0.005},
    },
    "example3": {
        "parent": "example1",
        "stated": {"example": 3, "prior": "periodic_squared_exponential", "l": 0.2, "p": 2.5,
                   "lam": 20.0, "theta": 3.0, "beta": 0.001, "N": 200_000},
    },
    "example4": {
        "parent": "example2",
        "stated": {"example": 4, "prior": "squared_exponential", "l": 0.01, "lam": 5.0,
                   "transform": "exponential", "weierstrass_a": 0.4, "weierstrass_b": 4.0,
                   "weierstrass_K": 10},
    },
    "example5": {
        "parent": "example1",
        "stated": {"example": 5, "prior": "squared_exponential", "l": 0.1, "N": 40_000,
                   "lam": 2.0},
    },
    "example6": {
        "parent": "example5",
        "stated": {"example": 6, "l": 0.1, "lam": 5.0},
    },
}


def preset(name: str) -> ExperimentConfig:
    """Resolve a preset through its parent chain; provenance marks each key as
    ``stated``, ``inherited:<preset>`` or ``default``."""
    if name not in PRESETS:
        raise ConfigError(f"problem.preset: unknown preset {name!r}; known: {sorted(PRESETS)}")
    chain = []
    cur = name
    while cur is not None:
        chain.append(cur)
        cur = PRESETS[cur]["parent"]
    values: Dict[str, Any] = {}
    prov = {k: "default" for k in SCHEMA}
    for ancestor in reversed(chain):
        for key, value in PRESETS[ancestor]["stated"].items():
            values[key] = value
            prov[key] = "stated" if ancestor == name else f"inherited:{ancestor}"
    values["out"] = os.path.join("runs", name)
    prov["out"] = "default"
    return validate(ExperimentConfig(name=name, provenance=prov, **values))


def _coerce(raw: str, typ, key_path: str):
    try:
        if typ is int:
            as_float = float(raw)
            if not as_float.is_integer():
                raise ValueError
            return int(as_float)
        if typ is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{key_path}: cannot parse {raw!r} as {typ.__name__}") from None


def parse_config_text(text: str, origin: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: parse failure: {exc}") from None
    sections = {"problem", "prior", "regularizer", "sampler", "output"}
    for sec in parser.sections():
        if sec not in sections:
            raise ConfigError(f"{sec}: unknown section (expected one of {sorted(sections)})")
    base = ExperimentConfig(provenance={k: "default" for k in SCHEMA})
    if parser.has_option("problem", "preset"):
        base = preset(parser.get("problem", "preset").strip())
    changes: Dict[str, Any] = {}
    for sec in parser.sections():
        for name, raw in parser.items(sec):
            if sec == "problem" and name == "preset":
                continue
            key = INI_ALIASES.get((sec, name), name)
            if key not in SCHEMA or SCHEMA[key][0] != sec:
                raise ConfigError(f"{sec}.{name}: unknown key")
            changes[key] = _coerce(raw, SCHEMA[key][1], f"{sec}.{name}")
    prov = dict(base.provenance)
    prov.update({k: "config" for k in changes})
    name = base.name if base.name != "custom" else os.path.splitext(os.path.basename(origin))[0]
    return validate(dataclasses.replace(base, provenance=prov, name=name, **changes))


def load_config(source: str) -> ExperimentConfig:
    """Load a preset by name or an INI file by path."""
    if source in PRESETS:
        return preset(source)
    if not os.path.exists(source):
        raise ConfigError(f"{source}: no such preset or config file")
    with open(source) as fh:
        text = fh.read()
    return parse_config_text(text, origin=source)


def to_ini(cfg: ExperimentConfig) -> str:
    """Serialize a config back to the INI schema (round-trips through ``parse_config_text``)."""
    lines = []
    by_section: Dict[str, list] = {}
    for key, (sec, _) in SCHEMA.items():
        value = getattr(cfg, key)
        if value is None:
            continue
        name = INI_NAMES.get(key, (sec, key))[1]
        by_section.setdefault(sec, []).append(f"{name} = {value!r}" if isinstance(value, float)
                                              else f"{name} = {value}")
    for sec in ("problem", "prior", "regularizer", "sampler", "output"):
        lines.append(f"[{sec}]")
        lines.extend(by_section.get(sec, []))
        lines.append("")
    return "\n".join(lines)
