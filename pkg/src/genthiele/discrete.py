"""Finite-state Thiele reserves and Kolmogorov forward transition probabilities.

This is the classical special case where the kernel only has atoms on a
finite set of states.  It also serves as the reduction oracle for the
duration and random-spouse solvers.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .backend import kernels
from .model import (
    Discount,
    DomainError,
    IntensityKernel,
    InsuranceModel,
    Lump,
    NumericError,
    PaymentSpec,
    discrete,
)


def time_grid(t_start: float, t_end: float, dt: float) -> np.ndarray:
    """Uniform grid from ``t_start`` to ``t_end``; the span must be a multiple of ``dt``."""
    if not dt > 0:
        raise DomainError("grid_step must be positive")
    span = t_end - t_start
    n = int(round(span / dt))
    if n < 0 or abs(n * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise DomainError(f"horizon {span} is not a multiple of grid_step {dt}")
    grid = t_start + dt * np.arange(n + 1)
    grid[-1] = t_end
    return grid


@dataclass(frozen=True)
class DiscreteModel:
    """A Markov chain on states ``0..n_states-1`` with payments and discounting.

    ``mu(t, i, j)`` is the transition intensity for ``i != j``.  Payment
    functions receive :class:`State` objects built with :func:`discrete`.
    """

    n_states: int
    mu: Callable[[float, int, int], float]
    payments: PaymentSpec = field(default_factory=PaymentSpec)
    discount: Discount = field(default_factory=Discount)
    names: Optional[tuple[str, ...]] = None

    def state_names(self) -> tuple[str, ...]:
        return self.names or tuple(str(i) for i in range(self.n_states))

    def kernel(self, horizon: tuple[float, float] = (-math.inf, math.inf)) -> IntensityKernel:
        def atoms(t, x):
            i = x.index
            return [(discrete(j), float(self.mu(t, i, j))) for j in range(self.n_states) if j != i]

        return IntensityKernel(atoms, description=f"{self.n_states}-state Markov chain", horizon=horizon)

    def as_insurance_model(self, t_end: float) -> InsuranceModel:
        return InsuranceModel(self.kernel(), self.payments, self.discount, t_end)


@dataclass
class ReserveTable:
    """Reserves ``values[i, n]`` for state ``states[i]`` at ``times[n]``."""

    times: np.ndarray
    values: np.ndarray
    states: tuple[str, ...]

    def at(self, state: str | int, t: Optional[float] = None) -> float | np.ndarray:
        i = state if isinstance(state, int) else self.states.index(state)
        if t is None:
            return self.values[i]
        n = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[n] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not on the reserve grid")
        return float(self.values[i, n])

    def to_csv(self, fh=None) -> str:
        """Write ``time,state,value`` rows, latest time first (the order of the recursion)."""
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "state", "value"])
        for n in range(len(self.times) - 1, -1, -1):
            for i, name in enumerate(self.states):
                w.writerow([repr(float(self.times[n])), name, repr(float(self.values[i, n]))])
        return buf.getvalue() if fh is None else ""


@dataclass
class TransitionMatrixPath:
    """``matrices[n][i, j]`` approximates ``P(X_{times[n]} = j | X_{times[0]} = i)``."""

    times: np.ndarray
    matrices: np.ndarray


def _tabulate(model: DiscreteModel, grid: np.ndarray):
    n = model.n_states
    states = [discrete(i) for i in range(n)]
    N = len(grid)
    mu = np.zeros((N, n, n))
    bdot = np.zeros((N, n))
    bpay = np.zeros((N, n, n))
    pay = model.payments
    for m, t in enumerate(grid.tolist()):
        for i in range(n):
            bdot[m, i] = pay.sojourn_rate(t, states[i])
            for j in range(n):
                if i != j:
                    mu[m, i, j] = model.mu(t, i, j)
                    bpay[m, i, j] = pay.transfer(t, states[i], states[j])
    for name, arr in (("intensity", mu), ("sojourn payment", bdot), ("transition payment", bpay)):
        bad = ~np.isfinite(arr)
        if bad.any():
            idx = np.argwhere(bad)[0]
            raise NumericError(f"non-finite {name} at t={grid[idx[0]]}, state {idx[1]}")
    r = np.asarray(model.discount.short_rate(grid), dtype=float) * np.ones(N)
    return mu, bdot, bpay, r


def _lump_grid(lumps: Sequence[Lump], grid: np.ndarray, n_states: int) -> np.ndarray:
    out = np.zeros((len(grid), n_states))
    for lump in lumps:
        if not grid[0] - 1e-9 <= lump.time <= grid[-1] + 1e-9:
            continue
        m = int(np.argmin(np.abs(grid - lump.time)))
        if abs(grid[m] - lump.time) > 1e-9 * max(1.0, abs(lump.time)):
            raise DomainError(f"lump at t={lump.time} does not fall on the solver grid")
        for i in range(n_states):
            if lump.applies(discrete(i)):
                out[m, i] += lump.amount
    return out


def solve_reserves_discrete(model: DiscreteModel, boundary: Sequence[float], t_start: float,
                            t_end: float, dt: float, backend=None) -> ReserveTable:
    """Prospective reserves by the backward Euler Thiele recursion.

    The step from ``t_n`` to ``t_{n-1}`` evaluates intensities, payment rates
    and the short rate at ``t_n``.  A lump at a grid time ``t`` is included in
    the reserve at ``t``.
    """
    boundary = np.asarray(boundary, dtype=float)
    if boundary.shape != (model.n_states,):
        raise ValueError(f"boundary needs {model.n_states} entries, got {boundary.shape}")
    grid = time_grid(t_start, t_end, dt)
    mu, bdot, bpay, r = _tabulate(model, grid)
    lumps = _lump_grid(model.payments.sojourn_lumps, grid, model.n_states)
    step = (t_end - t_start) / (len(grid) - 1) if len(grid) > 1 else dt
    V = (backend or kernels).discrete_sweep(mu, bdot, bpay, r, lumps, boundary, step)
    return ReserveTable(grid, np.asarray(V), model.state_names())


def _generator(mu_n: np.ndarray) -> np.ndarray:
    Q = mu_n.copy()
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def _forward(mu: np.ndarray, dt: float, start: int) -> np.ndarray:
    """Explicit Euler for dP/ds = P Q(s) from grid index ``start``; returns P[start..N]."""
    N = mu.shape[0] - 1
    n = mu.shape[1]
    P = np.empty((N - start + 1, n, n))
    P[0] = np.eye(n)
    for m in range(start, N):
        nxt = P[m - start] + dt * P[m - start] @ _generator(mu[m])
        rows = nxt.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-6) or nxt.min() < -1e-9 or nxt.max() > 1 + 1e-9:
            raise NumericError(
                f"transition matrix left the stochastic simplex at t index {m + 1}; reduce the step"
            )
        P[m - start + 1] = np.clip(nxt, 0.0, 1.0)
    return P


def solve_kolmogorov_forward(model: DiscreteModel, t0: float, x0: Optional[int], t_end: float,
                             dt: float) -> TransitionMatrixPath:
    """Transition probabilities from ``t0`` by Euler integration of the forward equation.

    With ``x0`` given, only that row is meaningful to callers, but the full
    matrix is always returned.
    """
    grid = time_grid(t0, t_end, dt)
    mu, _, _, _ = _tabulate(model, grid)
    step = (t_end - t0) / (len(grid) - 1) if len(grid) > 1 else dt
    P = _forward(mu, step, 0)
    if x0 is not None and not 0 <= x0 < model.n_states:
        raise DomainError(f"state index {x0} out of range")
    return TransitionMatrixPath(grid, P)


def reserve_via_probabilities(model: DiscreteModel, boundary: Sequence[float], t_start: float,
                              t_end: float, dt: float,
                              at: Optional[Sequence[int]] = None) -> ReserveTable:
    """Reserves as expected discounted cash flows under forward transition probabilities.

    An independent route to the same quantity as :func:`solve_reserves_discrete`
    (trapezoid quadrature over the grid instead of a backward recursion).
    ``at`` restricts the computation to the given grid indices; each costs a
    full forward solve.
    """
    boundary = np.asarray(boundary, dtype=float)
    grid = time_grid(t_start, t_end, dt)
    N = len(grid) - 1
    mu, bdot, bpay, _ = _tabulate(model, grid)
    lumps = _lump_grid(model.payments.sojourn_lumps, grid, model.n_states)
    step = (t_end - t_start) / N if N else dt
    # cash-flow rate per unit time in each state: sojourn rate plus expected transition payments
    flow = bdot + (mu * bpay).sum(axis=2)
    idx = list(range(N + 1)) if at is None else sorted(at)
    out = np.empty((model.n_states, len(idx)))
    for c, m in enumerate(idx):
        P = _forward(mu, step, m)
        v = np.asarray(model.discount.factor(grid[m], grid[m:]), dtype=float)
        dens = np.einsum("kgh,kh->kg", P, flow[m:]) * v[:, None]
        if len(dens) > 1:
            val = 0.5 * step * (dens[1:] + dens[:-1]).sum(axis=0)
        else:
            val = np.zeros(model.n_states)
        val += np.einsum("kgh,kh->g", P, lumps[m:] * v[:, None])
        val += P[-1] @ boundary * v[-1]
        out[:, c] = val
    return ReserveTable(grid[idx], out, model.state_names())
