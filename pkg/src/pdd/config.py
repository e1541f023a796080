"""INI configuration files for the command line tool.

Schema (every key optional unless marked)::

    [problem]
    kind = kpp | cva | manufactured      ; required
    lo = -20                              ; kpp / cva: interval ends
    hi = 20
    horizon = 1.0
    intensity = 1.0                       ; cva only
    volatility = 1.0                      ; cva only

    [partition]
    subdomains = 4
    axis = 0

    [interface]
    levels = 11
    samples = 1000
    dt = 1e-3                             ; Feynman-Kac Euler step
    target_se =                           ; stop sampling a node below this error
    degree =                              ; default min(4, levels - 1)
    prune_limit = 1000

    [solver]
    dx = 0.01
    dt_solver = 1e-3
    tol = 1e-3

    [run]
    seed = 0
    workers = 1

    [report]
    window_lo = -5                        ; error table restricted to this x-range
    window_hi = 5
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .errors import ConfigurationError
from .orchestrator import PddConfig
from .problems import CvaSpec, KppSpec, ManufacturedElliptic, kpp_exact, manufactured_u

KNOWN = {
    "problem": {"kind", "lo", "hi", "horizon", "intensity", "volatility"},
    "partition": {"subdomains", "axis"},
    "interface": {"levels", "samples", "dt", "target_se", "degree", "prune_limit"},
    "solver": {"dx", "dt_solver", "tol"},
    "run": {"seed", "workers"},
    "report": {"window_lo", "window_hi"},
}


@dataclass(frozen=True)
class LoadedConfig:
    config: PddConfig
    kind: str
    exact: Optional[Callable]  # closed form when one is known
    window: Optional[tuple]


def _get(parser, section, key, conv, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw == "":
        return default
    try:
        return conv(raw)
    except ValueError as e:
        raise ConfigurationError(f"[{section}] {key} = {raw!r}: {e}") from e


def parse_config(text: str, **overrides) -> LoadedConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigurationError(f"malformed config: {e}") from e
    for section in parser.sections():
        if section not in KNOWN:
            raise ConfigurationError(f"unknown section [{section}]")
        extra = set(parser.options(section)) - KNOWN[section]
        if extra:
            raise ConfigurationError(f"unknown key(s) in [{section}]: {sorted(extra)}")
    kind = _get(parser, "problem", "kind", str, None)
    if kind is None:
        raise ConfigurationError("[problem] kind is required")

    def num(section, key, default):
        return _get(parser, section, key, float, default)

    exact = None
    if kind == "kpp":
        problem = KppSpec(num("problem", "lo", -20.0), num("problem", "hi", 20.0),
                          num("problem", "horizon", 1.0))
        exact = kpp_exact
    elif kind == "cva":
        problem = CvaSpec(intensity=num("problem", "intensity", 1.0),
                          volatility=num("problem", "volatility", 1.0),
                          horizon=num("problem", "horizon", 0.25),
                          lo=num("problem", "lo", -8.0), hi=num("problem", "hi", 8.0))
    elif kind == "manufactured":
        problem = ManufacturedElliptic().linear_bvp_spec()
        exact = manufactured_u
    else:
        raise ConfigurationError(f"unknown problem kind {kind!r}")

    fields = dict(
        problem=problem,
        subdomains=_get(parser, "partition", "subdomains", int, 1),
        axis=_get(parser, "partition", "axis", int, 0),
        levels=_get(parser, "interface", "levels", int, 11),
        samples=_get(parser, "interface", "samples", int, 1000),
        dt=num("interface", "dt", 1e-3),
        target_se=num("interface", "target_se", None),
        degree=_get(parser, "interface", "degree", int, None),
        prune_limit=_get(parser, "interface", "prune_limit", int, 1000),
        dx=num("solver", "dx", 1e-2),
        dt_solver=num("solver", "dt_solver", 1e-3),
        tol=num("solver", "tol", 1e-3),
        master_seed=_get(parser, "run", "seed", int, 0),
        workers=_get(parser, "run", "workers", int, 1),
    )
    fields.update({k: v for k, v in overrides.items() if v is not None})
    lo, hi = num("report", "window_lo", None), num("report", "window_hi", None)
    window = None if lo is None or hi is None else (lo, hi)
    return LoadedConfig(PddConfig(**fields), kind, exact, window)


def load_config(path, **overrides) -> LoadedConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e
    return parse_config(text, **overrides)
