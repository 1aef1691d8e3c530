"""Core insurance-model types: hybrid states, intensity kernels, payments, discounting.

Times are in years on the insured's age axis, intensities are per year and
money is in contract units.  Every value here is immutable once built, so
solvers and simulator workers can share them freely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

RateFn = Callable[[float], float]


class ModelError(Exception):
    """Base class for errors raised by genthiele."""


class DomainError(ModelError, ValueError):
    """Evaluation requested outside the region where the model is defined."""


class NumericError(ModelError, ArithmeticError):
    """A rate, payment or intermediate reserve became non-finite."""


class Label(enum.Enum):
    ACTIVE = "active"
    DISABLED = "disabled"
    DEAD = "dead"
    DEAD_WITH_SPOUSE = "spouse"
    DISCRETE = "discrete"


_COORD_LABELS = (Label.DISABLED, Label.DEAD_WITH_SPOUSE)


@dataclass(frozen=True)
class State:
    """A point of the hybrid state space.

    ``coord`` carries the continuous component: the disability onset time for
    ``DISABLED`` and the insured/spouse age difference for ``DEAD_WITH_SPOUSE``.
    ``index`` numbers the states of a purely discrete model.
    """

    label: Label
    coord: Optional[float] = None
    index: Optional[int] = None

    def __post_init__(self) -> None:
        has_coord = self.coord is not None
        if has_coord != (self.label in _COORD_LABELS):
            raise ValueError(f"coord must be given exactly for {[l.value for l in _COORD_LABELS]}, got {self!r}")
        if (self.index is not None) != (self.label is Label.DISCRETE):
            raise ValueError(f"index must be given exactly for discrete states, got {self!r}")
        if self.label is Label.DISABLED and self.coord < 0:
            raise ValueError(f"disability onset must be >= 0, got {self.coord}")

    def __str__(self) -> str:
        if self.label is Label.DISCRETE:
            return str(self.index)
        if self.coord is not None:
            return f"{self.label.value}@{self.coord:g}"
        return self.label.value


ACTIVE = State(Label.ACTIVE)
DEAD = State(Label.DEAD)


def disabled(onset: float) -> State:
    return State(Label.DISABLED, float(onset))


def widowed(age_difference: float) -> State:
    return State(Label.DEAD_WITH_SPOUSE, float(age_difference))


def discrete(i: int) -> State:
    return State(Label.DISCRETE, index=int(i))


def parse_state(text: str) -> State:
    """Inverse of ``str(State)``: ``"active"``, ``"disabled@30"``, ``"spouse@-2"``, ``"3"``."""
    text = text.strip()
    name, _, coord = text.partition("@")
    if name.isdigit() and not coord:
        return discrete(int(name))
    try:
        label = Label(name)
    except ValueError:
        raise ValueError(f"unknown state {text!r}") from None
    return State(label, float(coord) if coord else None)


@dataclass(frozen=True)
class ContinuousPart:
    """Finitely supported non-atomic part of a kernel row.

    ``nodes`` and ``weights`` are a quadrature of the target law; the part
    charges ``total_mass * weights[j]`` per year to ``nodes[j]``.
    """

    nodes: tuple[State, ...]
    weights: np.ndarray
    total_mass: float


AtomsFn = Callable[[float, State], Sequence[tuple[State, float]]]
ContinuousFn = Callable[[float, State], Optional[ContinuousPart]]


@dataclass(frozen=True)
class IntensityKernel:
    """The jump intensity ``q_t(x, .)`` as atoms plus an optional weighted-sample part.

    ``rate_grid`` is an optional vectorised ``(x, times) -> total rates``
    shortcut the simulator uses to tabulate cumulative hazards.
    """

    atoms: AtomsFn
    continuous_part: Optional[ContinuousFn] = None
    description: str = ""
    horizon: tuple[float, float] = (-math.inf, math.inf)
    rate_grid: Optional[Callable[[State, np.ndarray], np.ndarray]] = None

    def check_time(self, t: float) -> None:
        lo, hi = self.horizon
        if not lo - 1e-9 <= t <= hi + 1e-9:
            raise DomainError(f"time {t} outside model horizon [{lo}, {hi}]")

    def continuous(self, t: float, x: State) -> Optional[ContinuousPart]:
        if self.continuous_part is None:
            return None
        return self.continuous_part(t, x)


def total_rate(kernel: IntensityKernel, t: float, x: State) -> float:
    """Total jump rate out of ``x`` at time ``t``."""
    kernel.check_time(t)
    lam = 0.0
    for target, rate in kernel.atoms(t, x):
        if target == x:
            raise DomainError(f"kernel atom at {x} targets the state itself")
        lam += rate
    part = kernel.continuous(t, x)
    if part is not None:
        lam += part.total_mass
    if not math.isfinite(lam):
        raise NumericError(f"total jump rate not finite at t={t}, x={x}")
    return lam


def total_rate_grid(kernel: IntensityKernel, x: State, times: np.ndarray) -> np.ndarray:
    if kernel.rate_grid is not None:
        return np.asarray(kernel.rate_grid(x, times), dtype=float)
    return np.array([total_rate(kernel, float(t), x) for t in times])


@dataclass(frozen=True)
class Lump:
    """A single payment ``amount`` at ``time`` to whoever occupies a matching state."""

    time: float
    applies: Callable[[State], bool]
    amount: float


def _no_rate(t: float, g: State) -> float:
    return 0.0


def _no_transfer(t: float, g: State, h: State) -> float:
    return 0.0


@dataclass(frozen=True)
class PaymentSpec:
    """Sojourn payment rates, sojourn lumps and transition payments.

    ``breakpoints`` lists the times where a sojourn rate may jump; between
    consecutive breakpoints the simulator treats the rate as constant.
    """

    sojourn_rate: Callable[[float, State], float] = _no_rate
    sojourn_lumps: tuple[Lump, ...] = ()
    transition: Callable[[float, State, State], float] = _no_transfer
    breakpoints: tuple[float, ...] = ()

    def transfer(self, t: float, g: State, h: State) -> float:
        return 0.0 if g == h else self.transition(t, g, h)


@dataclass(frozen=True)
class Discount:
    """Deterministic discounting from a short rate.

    Either a constant ``rate`` or a piecewise-linear curve through ``knots``
    (flat extrapolation outside the knots).
    """

    rate: float = 0.0
    knots: Optional[tuple[tuple[float, float], ...]] = None
    _cum: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.knots is not None:
            ts = np.array([k[0] for k in self.knots], dtype=float)
            rs = np.array([k[1] for k in self.knots], dtype=float)
            if len(ts) < 1 or np.any(np.diff(ts) <= 0):
                raise ValueError("rate-curve knots must have strictly increasing times")
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (rs[1:] + rs[:-1]) * np.diff(ts))])
            object.__setattr__(self, "_cum", cum)

    @property
    def is_constant(self) -> bool:
        return self.knots is None

    def short_rate(self, t):
        if self.knots is None:
            return self.rate if np.isscalar(t) else np.full(np.shape(t), self.rate)
        ts = [k[0] for k in self.knots]
        rs = [k[1] for k in self.knots]
        return np.interp(t, ts, rs)

    def _integrated(self, t):
        """Primitive of the short rate, zero at the first knot."""
        ts = np.array([k[0] for k in self.knots])
        rs = np.array([k[1] for k in self.knots])
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 1)
        r_t = np.interp(t, ts, rs)
        inside = (t >= ts[0]) & (t <= ts[-1])
        part = np.where(inside, 0.5 * (rs[i] + r_t) * (t - ts[i]), 0.0)
        below = np.where(t < ts[0], rs[0] * (t - ts[0]), 0.0)
        above = np.where(t > ts[-1], rs[-1] * (t - ts[-1]), 0.0)
        base = np.where(t > ts[-1], self._cum[-1], self._cum[i])
        return base + part + below + above

    def factor(self, t, s):
        """Value at ``t`` of one unit paid at ``s``."""
        if self.knots is None:
            return np.exp(-self.rate * (np.asarray(s) - np.asarray(t)))
        return np.exp(-(self._integrated(s) - self._integrated(t)))

    def annuity(self, t: float, a: float, b: float) -> float:
        """Integral of ``factor(t, u)`` over ``u`` in ``[a, b]``."""
        if b <= a:
            return 0.0
        if self.knots is None:
            r = self.rate
            if abs(r) * (b - a) < 1e-10:
                return (b - a) * math.exp(-r * (0.5 * (a + b) - t))
            return (math.exp(-r * (a - t)) - math.exp(-r * (b - t))) / r
        cuts = [a] + [k[0] for k in self.knots if a < k[0] < b] + [b]
        x, w = np.polynomial.legendre.leggauss(8)
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            u = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            total += 0.5 * (hi - lo) * float(np.dot(w, self.factor(t, u)))
        return total


@dataclass(frozen=True)
class InsuranceModel:
    """A complete regular insurance model ready for simulation.

    ``fast_path`` optionally names a specialised compiled simulator (see
    :mod:`genthiele.simulator`).
    """

    kernel: IntensityKernel
    payments: PaymentSpec
    discount: Discount
    horizon_end: float
    fast_path: object = None
