"""Disability reserves with rehabilitation depending on the disability onset.

The disabled state carries its onset time ``s``, so the state space is
``{active, dead} + {disabled} x [0, inf)``.  Onsets are restricted to the
time grid, giving a lower-triangular reserve surface ``V[k, n]`` for a life
disabled at ``t_k`` and still disabled at ``t_n`` (``k <= n``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rates as _rates
from .backend import kernels
from .discrete import DiscreteModel, time_grid
from .model import (
    ACTIVE,
    DEAD,
    Discount,
    DomainError,
    IntensityKernel,
    InsuranceModel,
    Label,
    NumericError,
    PaymentSpec,
    disabled,
)

RateFn = Callable[[float], float]

# Keep the full triangle only below this many grid steps; beyond it the
# solver streams one column (the full surface is ~N**2/2 doubles).
SURFACE_LIMIT = 2000


@dataclass(frozen=True)
class RehabRates:
    """Transition intensities of the disability model, as functions of age.

    Rehabilitation from a disability that began at ``s`` is
    ``mu_diamond_star_base(t) * onset_factor(s)`` for ``t >= s``.  When
    ``onset_factor`` is None it is ``1 - mu_diamond_dagger(s)``: the
    disabled-life mortality at the onset age, i.e. inception age ``t0`` plus
    the time from inception to onset.
    """

    mu_star_dagger: RateFn
    mu_star_diamond: RateFn
    mu_diamond_star_base: RateFn
    mu_diamond_dagger: RateFn
    t0: float
    onset_factor: Optional[Callable[[float], float]] = None

    def factor(self, s):
        if self.onset_factor is not None:
            return self.onset_factor(s)
        return 1.0 - self.mu_diamond_dagger(s)

    def rehab(self, t: float, s: float) -> float:
        if t < s:
            return 0.0
        return float(self.mu_diamond_star_base(t) * self.factor(s))


def default_rates(t0: float, mu_diamond_dagger: Optional[RateFn] = None) -> RehabRates:
    """Gompertz-Makeham mortality and disability, linear base rehabilitation.

    Disabled-life mortality defaults to active-life mortality.
    """
    if t0 < 0:
        raise DomainError("inception age must be non-negative")
    return RehabRates(
        mu_star_dagger=_rates.MU_ACTIVE_DEAD,
        mu_star_diamond=_rates.MU_ACTIVE_DISABLED,
        mu_diamond_star_base=_rates.MU_REHAB_BASE,
        mu_diamond_dagger=mu_diamond_dagger or _rates.MU_ACTIVE_DEAD,
        t0=float(t0),
    )


def _vec(fn, grid):
    out = fn(grid)
    if np.isscalar(out) or np.ndim(out) == 0:
        out = np.array([fn(float(t)) for t in grid])
    return np.array(np.broadcast_to(np.asarray(out, dtype=float), grid.shape))


@dataclass
class DisabilityReserveSurface:
    """Solved reserves on the grid ``times[0..N]``.

    ``active[n]`` is the active reserve at ``t_n``; ``onset[n]`` the reserve of
    a life that became disabled at ``t_n``, evaluated at ``t_n``.  ``disabled``
    holds ``V[k, n]`` (NaN above the diagonal) when the full surface was
    kept; ``slices`` maps onset indices to their reserve rows.
    """

    times: np.ndarray
    active: np.ndarray
    onset: np.ndarray
    disabled: Optional[np.ndarray] = None
    slices: dict[int, np.ndarray] = field(default_factory=dict)

    def disabled_at(self, k: int, n: int) -> float:
        if k > n:
            raise IndexError(f"onset index {k} lies after time index {n}")
        if k == n:
            return float(self.onset[n])
        if k in self.slices:
            return float(self.slices[k][n])
        if self.disabled is None:
            raise LookupError("full surface not retained; request the row via slice_onsets")
        return float(self.disabled[k, n])

    def onset_index(self, s: float) -> int:
        k = int(np.argmin(np.abs(self.times - s)))
        if abs(self.times[k] - s) > 1e-9 * max(1.0, abs(s)):
            raise KeyError(f"onset {s} is not on the grid")
        return k


def solve_disability(rates: RehabRates, r: float, retirement: float, t_start: float, dt: float,
                     annuity_rate: float = 1.0, keep_surface: Optional[bool] = None,
                     slice_onsets: Sequence[float] = (), backend=None) -> DisabilityReserveSurface:
    """Backward Euler reserves for the disability annuity payable until ``retirement``.

    Each step from ``t_n`` to ``t_{n-1}`` first updates every disabled row
    ``k <= n-1`` from ``V_active[n]`` and ``V[k, n]``, then the active reserve
    from the newly-disabled reserve ``V[n, n]``.  Rates are evaluated at
    ``t_n``.  No transition payments; reserves vanish at retirement.
    ``backend`` overrides the kernel module (see :mod:`genthiele.backend`).
    """
    if annuity_rate < 0:
        raise DomainError("annuity_rate must be non-negative")
    grid = time_grid(t_start, retirement, dt)
    N = len(grid) - 1
    step = (retirement - t_start) / N if N else dt
    arrays = [_vec(fn, grid) for fn in (rates.mu_star_dagger, rates.mu_star_diamond,
                                        rates.mu_diamond_star_base, rates.mu_diamond_dagger,
                                        rates.factor)]
    for name, arr in zip(("mu_star_dagger", "mu_star_diamond", "rehabilitation", "mu_diamond_dagger",
                          "onset factor"), arrays):
        if not np.isfinite(arr).all():
            n = int(np.argmin(np.isfinite(arr)))
            raise NumericError(f"{name} not finite at t={grid[n]}")
    if keep_surface is None:
        keep_surface = N <= SURFACE_LIMIT
    active = np.empty(N + 1)
    onset = np.empty(N + 1)
    surface = np.full((N + 1, N + 1), np.nan) if keep_surface else np.empty((0, 0))
    rows = np.array(sorted({int(round((s - t_start) / step)) for s in slice_onsets}), dtype=np.int_)
    if len(rows) and (rows.min() < 0 or rows.max() > N):
        raise DomainError("slice onset outside the solver grid")
    slices = np.full((len(rows), N + 1), np.nan)
    (backend or kernels).disability_sweep(*arrays, float(r), float(step), float(annuity_rate),
                             active, onset, surface, rows, slices)
    return DisabilityReserveSurface(
        times=grid, active=active, onset=onset,
        disabled=surface if keep_surface else None,
        slices={int(k): slices[j] for j, k in enumerate(rows)},
    )


@dataclass
class FigureCurves:
    """Curve data behind the active-state and disabled-state reserve plots."""

    active: np.ndarray  # columns: t, V_active(t)
    onset: np.ndarray  # columns: s, V_disabled(s)(s)
    slices: dict[float, np.ndarray]  # onset -> columns: t, V_disabled(s)(t) for t >= s


def emit_figures(surface: DisabilityReserveSurface, slice_onsets: Sequence[float] = ()) -> FigureCurves:
    t = surface.times
    out = {}
    for s in slice_onsets:
        k = surface.onset_index(s)
        vals = [surface.disabled_at(k, n) for n in range(k, len(t))]
        out[float(t[k])] = np.column_stack([t[k:], vals])
    return FigureCurves(np.column_stack([t, surface.active]), np.column_stack([t, surface.onset]), out)


def disability_kernel(rates: RehabRates, t_start: float, retirement: float) -> IntensityKernel:
    """The intensity kernel of the disability model.

    From active, disability lands on ``(disabled, t)``: the onset coordinate
    is the jump time itself.
    """

    def atoms(t, x):
        if x.label is Label.ACTIVE:
            return [(DEAD, float(rates.mu_star_dagger(t))), (disabled(t), float(rates.mu_star_diamond(t)))]
        if x.label is Label.DISABLED:
            return [(ACTIVE, rates.rehab(t, x.coord)), (DEAD, float(rates.mu_diamond_dagger(t)))]
        return []

    def rate_grid(x, times):
        times = np.asarray(times, dtype=float)
        if x.label is Label.ACTIVE:
            return _vec(rates.mu_star_dagger, times) + _vec(rates.mu_star_diamond, times)
        if x.label is Label.DISABLED:
            rehab = _vec(rates.mu_diamond_star_base, times) * float(rates.factor(x.coord))
            return np.where(times >= x.coord, rehab, 0.0) + _vec(rates.mu_diamond_dagger, times)
        return np.zeros_like(times)

    return IntensityKernel(atoms, description="disability with onset-dependent rehabilitation",
                           horizon=(t_start, retirement), rate_grid=rate_grid)


@dataclass(frozen=True)
class DisabilityProduct:
    """Parameters the compiled disability simulator needs."""

    rates: RehabRates
    r: float
    retirement: float
    t_start: float
    annuity_rate: float


def disability_model(rates: RehabRates, r: float, retirement: float, t_start: float,
                     annuity_rate: float = 1.0) -> InsuranceModel:
    def sojourn(t, g):
        return annuity_rate if g.label is Label.DISABLED and t < retirement else 0.0

    return InsuranceModel(
        kernel=disability_kernel(rates, t_start, retirement),
        payments=PaymentSpec(sojourn_rate=sojourn, breakpoints=(retirement,)),
        discount=Discount(r),
        horizon_end=retirement,
        fast_path=DisabilityProduct(rates, float(r), float(retirement), float(t_start), float(annuity_rate)),
    )


def three_state_reduction(rates: RehabRates, r: float, annuity_rate: float = 1.0) -> DiscreteModel:
    """Finite-state chain active(0)/disabled(1)/dead(2) with rehabilitation ``base(t)``.

    Equal to the duration model when rehabilitation does not depend on onset.
    """
    table = {
        (0, 1): rates.mu_star_diamond,
        (0, 2): rates.mu_star_dagger,
        (1, 0): rates.mu_diamond_star_base,
        (1, 2): rates.mu_diamond_dagger,
    }

    def mu(t, i, j):
        fn = table.get((i, j))
        return float(fn(t)) if fn is not None else 0.0

    def sojourn(t, g):
        return annuity_rate if g.index == 1 else 0.0

    return DiscreteModel(3, mu, PaymentSpec(sojourn_rate=sojourn), Discount(r),
                         names=("active", "disabled", "dead"))


def validate_rates(rates: RehabRates, t_start: float, horizon: float, n: int = 512) -> list[tuple[str, str]]:
    """Return ``(level, message)`` pairs for negative or non-finite intensities on the horizon."""
    grid = np.linspace(t_start, horizon, n)
    out = []
    for name, fn in (("mu_star_dagger", rates.mu_star_dagger), ("mu_star_diamond", rates.mu_star_diamond),
                     ("mu_diamond_dagger", rates.mu_diamond_dagger)):
        vals = _vec(fn, grid)
        if not np.isfinite(vals).all():
            out.append(("error", f"{name} is not finite on [{t_start}, {horizon}]"))
        elif vals.min() < 0:
            out.append(("warning", f"{name} negative from t={grid[np.argmax(vals < 0)]:.4g}"))
    base = _vec(rates.mu_diamond_star_base, grid)
    fac = _vec(rates.factor, grid)
    if not (np.isfinite(base).all() and np.isfinite(fac).all()):
        out.append(("error", "rehabilitation rate is not finite on the horizon"))
    else:
        # rehab(t, s) = base(t) * factor(s) over the triangle s <= t
        neg_t = base < 0
        if neg_t.any():
            out.append(("warning", f"rehabilitation base rate negative from t={grid[np.argmax(neg_t)]:.4g}"))
        if (fac < 0).any():
            out.append(("warning", f"rehabilitation onset factor negative from s={grid[np.argmax(fac < 0)]:.4g}"))
    return out
