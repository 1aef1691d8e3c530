"""Intensity and payment-rate functions of time, all numpy-vectorised."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

import numpy as np


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, t):
        return self.value if np.isscalar(t) else np.full(np.shape(t), self.value)


@dataclass(frozen=True)
class GompertzMakeham:
    """``a + 10**(b*t + c)``."""

    a: float
    b: float
    c: float

    def __call__(self, t):
        return self.a + 10.0 ** (self.b * np.asarray(t, dtype=float) + self.c)


@dataclass(frozen=True)
class Linear:
    """``a + b*t``."""

    a: float
    b: float

    def __call__(self, t):
        return self.a + self.b * np.asarray(t, dtype=float)

    def root(self) -> float:
        return -self.a / self.b if self.b else float("nan")


@dataclass(frozen=True)
class Table:
    """Piecewise-linear interpolation through ``(t, value)`` knots, flat outside."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("table needs matching, non-empty times and values")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("table times must be strictly increasing")

    def __call__(self, t):
        out = np.interp(t, self.times, self.values)
        return float(out) if np.isscalar(t) else out


@dataclass(frozen=True)
class Scaled:
    base: Any
    factor: float

    def __call__(self, t):
        return self.factor * self.base(t)


RateLike = Union[Constant, GompertzMakeham, Linear, Table, Scaled]

# Reference rates for the disability product.
MU_ACTIVE_DEAD = GompertzMakeham(0.0004, 0.060, -5.46)
MU_ACTIVE_DISABLED = GompertzMakeham(0.0005, 0.038, -4.12)
MU_REHAB_BASE = Linear(0.773763, -0.01045)


def parse_rate(spec: Any) -> RateLike:
    """Build a rate function from its JSON form.

    Accepted forms: a number; ``{"const": x}``;
    ``{"gompertz_makeham": [a, b, c]}``; ``{"linear": [a, b]}``;
    ``{"table": [[t, v], ...]}``.
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Constant(float(spec))
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ValueError(f"rate spec must be a number or a one-key object, got {spec!r}")
    (kind, args), = spec.items()
    if kind == "const":
        return Constant(float(args))
    if kind == "gompertz_makeham":
        a, b, c = (float(v) for v in args)
        return GompertzMakeham(a, b, c)
    if kind == "linear":
        a, b = (float(v) for v in args)
        return Linear(a, b)
    if kind == "table":
        pts = sorted((float(t), float(v)) for t, v in args)
        return Table(tuple(p[0] for p in pts), tuple(p[1] for p in pts))
    raise ValueError(f"unknown rate kind {kind!r}")
