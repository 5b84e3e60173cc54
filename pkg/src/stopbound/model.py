"""Problem parameters and the closed-form payoff geometry.

Two products with prices following independent geometric Brownian motions;
investing at prices (x, y) is worth ``F(x, y) = Q1 x / delta1 + Q2 y / delta2 - I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CONFIG_KEYS = ("r", "alpha1", "alpha2", "sigma1", "sigma2", "Q1", "Q2", "I")


class ParameterError(ValueError):
    """Raised when model parameters violate the standing assumptions."""


@dataclass(frozen=True)
class ModelParams:
    r: float
    alpha1: float
    alpha2: float
    sigma1: float
    sigma2: float
    Q1: float
    Q2: float
    I: float
    delta1: float = field(init=False)
    delta2: float = field(init=False)
    lam: float = field(init=False)

    def __post_init__(self):
        for name in CONFIG_KEYS:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite real, got {value!r}")
        for name in ("r", "sigma1", "sigma2", "Q1", "Q2", "I"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.r <= max(self.alpha1, self.alpha2):
            raise ParameterError(
                f"discount rate r={self.r} must exceed both drifts "
                f"(alpha1={self.alpha1}, alpha2={self.alpha2})"
            )
        delta1 = self.r - self.alpha1
        delta2 = self.r - self.alpha2
        assert delta1 > 0 and delta2 > 0
        object.__setattr__(self, "delta1", delta1)
        object.__setattr__(self, "delta2", delta2)
        object.__setattr__(self, "lam", delta2 / self.Q2)

    def replace(self, **changes) -> "ModelParams":
        values = {k: getattr(self, k) for k in CONFIG_KEYS}
        values.update(changes)
        return ModelParams(**values)

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in CONFIG_KEYS}


def payoff_F(p: ModelParams, x, y):
    """Net present value of investing immediately at prices (x, y)."""
    return p.Q1 * np.asarray(x) / p.delta1 + p.Q2 * np.asarray(y) / p.delta2 - p.I


def indifference_f(p: ModelParams, x):
    """Second-product price at which F(x, .) vanishes."""
    return p.lam * (p.I - p.Q1 * np.asarray(x) / p.delta1)


def kill_line_h(p: ModelParams, x):
    """Zero set of (L - r)F = rI - Q1 x - Q2 y; may be negative for large x."""
    return (p.r * p.I - p.Q1 * np.asarray(x)) / p.Q2


def generator_of_F(p: ModelParams, x, y):
    """(L - r)F evaluated in closed form."""
    return p.r * p.I - p.Q1 * np.asarray(x) - p.Q2 * np.asarray(y)


def parse_config(text: str, source: str = "<config>") -> ModelParams:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in CONFIG_KEYS:
            raise ParameterError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ParameterError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = float(value)
        except ValueError:
            raise ParameterError(f"{source}:{lineno}: {key} is not a number: {value!r}") from None
    missing = [k for k in CONFIG_KEYS if k not in values]
    if missing:
        raise ParameterError(f"{source}: missing keys {', '.join(missing)}")
    return ModelParams(**values)


def load_config(path) -> ModelParams:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))


def format_config(p: ModelParams) -> str:
    return "".join(f"{k} = {getattr(p, k)!r}\n" for k in CONFIG_KEYS)


PRESET_DIR = Path(__file__).parent / "presets"


def preset(name: str) -> ModelParams:
    """Load one of the shipped parameter sets: ``fig1``, ``fig2`` or ``fig3``."""
    path = PRESET_DIR / f"{name}.cfg"
    if not path.exists():
        raise ParameterError(f"unknown preset {name!r}")
    return load_config(path)
