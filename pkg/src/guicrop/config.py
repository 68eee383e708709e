"""Merged run configuration: one flat key space over every component config.

A config file is a flat JSON object. Keys may be written snake_case or
kebab-case; unknown keys are rejected. CLI flags use the kebab-case spelling
of the same keys and override file values.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .budget import TokenBudgetModel
from .crop import ISCConfig
from .edges import EdgeConfig
from .errors import ConfigError
from .spectral import DEFAULT_H_MIN
from .srdl import DualLoopConfig

ENV_VAR = "ISC_CONFIG"

_EDGE = {f.name: f.name for f in fields(EdgeConfig)}
_ISC = {f.name: f.name for f in fields(ISCConfig)}
_LOOP = {"tau": "tau", "max_iters": "max_iters"}
_BUDGET = {"patch_size": "patch_size", "attn_heads": "attn_heads", "head_dim": "head_dim"}
_GENERAL = {"seed": int, "h_min": float, "out_dir": str}


def _key(name: str) -> str:
    return name.replace("-", "_")


def known_keys() -> set[str]:
    return set(_EDGE) | set(_ISC) | set(_LOOP) | set(_BUDGET) | set(_GENERAL)


@dataclass(frozen=True)
class RunConfig:
    edge: EdgeConfig = field(default_factory=EdgeConfig)
    isc: ISCConfig = field(default_factory=ISCConfig)
    loop: DualLoopConfig = field(default_factory=DualLoopConfig)
    budget: TokenBudgetModel = field(default_factory=TokenBudgetModel)
    seed: int = 0
    h_min: float = DEFAULT_H_MIN
    out_dir: str | None = None

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        values = {_key(k): v for k, v in values.items()}
        unknown = sorted(set(values) - known_keys())
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            edge = EdgeConfig(**{k: values[k] for k in _EDGE if k in values})
            isc = ISCConfig(**{k: values[k] for k in _ISC if k in values})
            loop = DualLoopConfig(**{k: values[k] for k in _LOOP if k in values})
            budget_kw = {k: values[k] for k in _BUDGET if k in values}
            budget = TokenBudgetModel(target_size=isc.target_size,
                                      max_subimages=isc.n_max, **budget_kw)
            general = {k: conv(values[k]) for k, conv in _GENERAL.items()
                       if k in values and values[k] is not None}
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return cls(edge, isc, loop, budget, **general)

    def to_mapping(self) -> dict:
        out = {}
        out.update(self.edge.to_dict())
        out.update(self.isc.to_dict())
        out.update({"tau": self.loop.tau, "max_iters": self.loop.max_iters})
        out.update({k: getattr(self.budget, k) for k in _BUDGET})
        out.update({"seed": self.seed, "h_min": self.h_min, "out_dir": self.out_dir})
        return out


def read_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a flat JSON object")
    for k, v in doc.items():
        if isinstance(v, (dict, list)):
            raise ConfigError(f"config key {k!r} must map to a scalar")
    return doc


def load_config(path=None, overrides: dict | None = None, environ=None) -> RunConfig:
    """File values (``path`` or ``$ISC_CONFIG``), then non-None ``overrides``."""
    environ = os.environ if environ is None else environ
    path = path or environ.get(ENV_VAR) or None
    values = read_config_file(path) if path else {}
    values = {_key(k): v for k, v in values.items()}
    for k, v in (overrides or {}).items():
        if v is not None:
            values[_key(k)] = v
    return RunConfig.from_mapping(values)
