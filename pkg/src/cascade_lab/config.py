"""Experiment configuration: file sections, command-line overrides, validation.

Config files hold ``key = value`` lines. Keys in ``[DEFAULT]`` apply to
every command, keys in a section named after the command override them,
and explicit command-line flags override both.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields

from .errors import InputError
from .laws import WeightLaw, law_from_spec
from .words import check_size

STOCHASTIC = {"cascade", "clt", "limit", "cov", "spectrum", "zygmund", "general", "acceptance"}


@dataclass
class ExperimentConfig:
    command: str
    b: int = 3
    law: str = "twopoint"
    a: float | None = 0.7
    c: float | None = None
    rho: float | None = None
    pool_size: int = 100_000
    rounds: int = 20
    renormalize: bool = True
    n: int | None = None
    n_max: int = 4
    j: int = 2
    L: int = 10
    replicas: int = 10_000
    seed: int | None = None
    out: str | None = None
    workers: int = 1
    mode: str = "marginal"
    source: str = "gaussian"
    scheme: str = "canonical"
    theta: float = 1.0
    eps: float = 0.1
    depth: int | None = None
    z0: float | None = None

    def law_obj(self) -> WeightLaw:
        return law_from_spec({"law": self.law, "a": self.a, "c": self.c, "rho": self.rho})

    def echo(self) -> dict:
        """Config as recorded in the manifest (worker count and output path omitted)."""
        d = asdict(self)
        d.pop("workers")
        d.pop("out")
        return d


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key, raw):
    kind = _TYPES[key]
    text = str(raw).strip()
    try:
        if "bool" in kind:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if "int" in kind:
            return int(text)
        if "float" in kind:
            return float(text)
    except ValueError:
        raise InputError(f"config key {key}: cannot parse {text!r} as {kind}") from None
    return text


def read_config_file(path, command: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not parser.read(path, encoding="utf-8"):
        raise InputError(f"cannot read config file {path}")
    values = dict(parser.defaults())
    if parser.has_section(command):
        values.update({k: v for k, v in parser.items(command)})
    unknown = sorted(set(values) - set(_TYPES) - {"command"})
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    return {k: _convert(k, v) for k, v in values.items() if k != "command"}


def build_config(command: str, file_values: dict | None, flags: dict) -> ExperimentConfig:
    values = dict(file_values or {})
    values.update({k: v for k, v in flags.items() if v is not None and k in _TYPES})
    # a law given on the command line drops parameters of a law from the file
    if flags.get("law") is not None:
        for key in ("a", "c", "rho"):
            if flags.get(key) is None:
                values[key] = None
    cfg = ExperimentConfig(command=command, **{k: v for k, v in values.items() if k != "command"})
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Reject bad or oversized requests before anything is allocated."""
    if cfg.command in STOCHASTIC and cfg.seed is None:
        raise InputError(f"'{cfg.command}' needs an explicit --seed")
    if cfg.seed is not None and not 0 <= cfg.seed < 2**64:
        raise InputError("seed must lie in [0, 2**64)")
    if cfg.b < 2:
        raise InputError(f"b must be >= 2, got {cfg.b}")
    if cfg.workers < 1:
        raise InputError("workers must be >= 1")
    for name in ("replicas", "rounds", "n_max"):
        if getattr(cfg, name) < 1:
            raise InputError(f"{name} must be >= 1")
    if cfg.pool_size < 1000:
        raise InputError("pool_size must be >= 1000")
    cfg.law_obj()
    if cfg.command in ("cascade", "cov", "limit", "general", "zygmund"):
        check_size(cfg.b, cfg.j)
    if cfg.command in ("limit", "general"):
        if cfg.L < cfg.j:
            raise InputError(f"need j <= L, got j={cfg.j}, L={cfg.L}")
        check_size(cfg.b, cfg.L)
    if cfg.command in ("spectrum", "zygmund") and cfg.depth is not None:
        check_size(cfg.b, cfg.depth)
    if cfg.command == "cascade" and cfg.n is not None:
        check_size(cfg.b, cfg.n)
    if cfg.mode not in ("marginal", "consistent"):
        raise InputError(f"mode must be marginal or consistent, got {cfg.mode!r}")
    if cfg.source not in ("gaussian", "cascade"):
        raise InputError(f"source must be gaussian or cascade, got {cfg.source!r}")
    if cfg.scheme not in ("canonical", "geometric"):
        raise InputError(f"scheme must be canonical or geometric, got {cfg.scheme!r}")
    if not cfg.eps > 0:
        raise InputError("eps must be positive")
