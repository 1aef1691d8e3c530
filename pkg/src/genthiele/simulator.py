"""Monte Carlo simulation of the jump process and present-value estimation.

Jump times come from inverting the survival function
``exp(-integral of the total rate)`` on a tabulated cumulative hazard; the
target is drawn from the normalised kernel row at the jump time.  Paths are
split into fixed-size chunks, each with its own random stream derived from
``(seed, chunk index)``, so results do not depend on how chunks are
scheduled across workers.
"""

from __future__ import annotations

import csv
import math
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .backend import kernels, max_workers
from .model import (
    DomainError,
    InsuranceModel,
    IntensityKernel,
    Label,
    NumericError,
    State,
    total_rate_grid,
)

CHUNK = 4096
DEFAULT_HAZARD_STEP = 1.0 / 1440


@dataclass
class PathSample:
    jump_times: list[float]
    states: list[State]
    pv: float


@dataclass
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int
    engine: str = "generic"
    pvs: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "n_paths": self.n_paths,
                "seed": self.seed, "engine": self.engine}


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _cumtrapz(rate: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(rate)
    out[0] = 0.0
    np.cumsum(0.5 * h * (rate[1:] + rate[:-1]), out=out[1:])
    return out


def _invert_linear(H: np.ndarray, grid: np.ndarray, i0: int, target: float) -> float:
    """Time where the piecewise-linear ``H`` first reaches ``target`` (searching from cell ``i0``)."""
    j = i0 + int(np.searchsorted(H[i0:], target, side="left"))
    j = min(max(j, i0 + 1), len(H) - 1)
    lo, hi = H[j - 1], H[j]
    if hi > lo:
        return float(grid[j - 1] + (grid[j] - grid[j - 1]) * (target - lo) / (hi - lo))
    return float(grid[j])


class HazardTable:
    """Cumulative hazards per state on a fixed grid, cached for hashable states."""

    def __init__(self, kernel: IntensityKernel, t_lo: float, t_hi: float,
                 step: float = DEFAULT_HAZARD_STEP, cache_size: int = 4096):
        if not math.isfinite(t_hi) or t_hi <= t_lo:
            raise DomainError("hazard table needs a finite horizon after its start")
        m = max(1, int(math.ceil((t_hi - t_lo) / step - 1e-9)))
        self.kernel = kernel
        self.grid = np.linspace(t_lo, t_hi, m + 1)
        self.h = (t_hi - t_lo) / m
        self._cache: OrderedDict[State, np.ndarray] = OrderedDict()
        self.cache_size = cache_size

    def cumulative(self, x: State) -> np.ndarray:
        H = self._cache.get(x)
        if H is not None:
            self._cache.move_to_end(x)
            return H
        lam = total_rate_grid(self.kernel, x, self.grid)
        if not np.isfinite(lam).all():
            raise NumericError(f"total jump rate of {x} not finite on the simulation grid")
        if lam.min() < 0:
            raise DomainError(f"negative total jump rate for {x} at t={self.grid[np.argmax(lam < 0)]:.6g}")
        H = _cumtrapz(lam, self.h)
        self._cache[x] = H
        if len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return H

    def next_jump(self, x: State, t: float, e: float) -> Optional[float]:
        """Jump time after ``t`` for unit-exponential ``e``; None when no jump before the end."""
        H = self.cumulative(x)
        i = min(max(int(math.floor((t - self.grid[0]) / self.h)), 0), len(H) - 2)
        w = (t - self.grid[i]) / self.h
        target = H[i] + w * (H[i + 1] - H[i]) + e
        if target >= H[-1]:
            return None
        return max(t, _invert_linear(H, self.grid, i, target))


def _walk_hazard(kernel: IntensityKernel, x: State, t: float, e: float, horizon_end: float,
                 step: float, block: int = 64) -> Optional[float]:
    """Invert the survival function block by block (works for infinite horizons).

    Blocks double in length up to 4096 steps, so short waits stay cheap.
    """
    acc = 0.0
    start = t
    while start < horizon_end:
        stop = min(start + block * step, horizon_end)
        m = max(1, int(math.ceil((stop - start) / step - 1e-9)))
        grid = np.linspace(start, stop, m + 1)
        lam = total_rate_grid(kernel, x, grid)
        if not np.isfinite(lam).all():
            raise NumericError(f"total jump rate of {x} not finite near t={start}")
        H = acc + _cumtrapz(lam, (stop - start) / m)
        if H[-1] >= e:
            return _invert_linear(H, grid, 0, e)
        acc = float(H[-1])
        start = stop
        block = min(2 * block, 4096)
    return None


def sample_target(kernel: IntensityKernel, t: float, x: State, u: float) -> State:
    """Draw the post-jump state from the kernel row at ``t`` normalised to a probability."""
    atoms = list(kernel.atoms(t, x))
    part = kernel.continuous(t, x)
    masses = [rate for _, rate in atoms]
    if part is not None:
        masses.append(part.total_mass)
    masses = np.asarray(masses, dtype=float)
    if np.any(masses < 0):
        raise DomainError(f"negative intensity out of {x} at t={t}")
    total = masses.sum()
    if not math.isfinite(total) or total <= 0:
        raise NumericError(f"cannot choose a jump target from {x} at t={t} (total rate {total})")
    pick = u * total
    k = min(int(np.searchsorted(np.cumsum(masses), pick, side="right")), len(masses) - 1)
    if k < len(atoms):
        return atoms[k][0]
    # position inside the continuous part, rescaled to [0, 1)
    v = (pick - masses[:-1].sum()) / part.total_mass
    w = np.cumsum(np.asarray(part.weights, dtype=float))
    j = min(int(np.searchsorted(w / w[-1], v, side="right")), len(w) - 1)
    return part.nodes[j]


def sample_next_jump(kernel: IntensityKernel, t: float, x: State, horizon_end: float,
                     rng: np.random.Generator, step: float = DEFAULT_HAZARD_STEP,
                     table: Optional[HazardTable] = None) -> Optional[tuple[float, State]]:
    """Next jump ``(J, Y)`` from ``x`` at ``t``, or None if none occurs before ``horizon_end``."""
    e = -math.log1p(-rng.random())
    if table is not None:
        j = table.next_jump(x, t, e)
        if j is not None and j > horizon_end:
            j = None
    else:
        j = _walk_hazard(kernel, x, t, e, horizon_end, step)
    if j is None:
        return None
    return j, sample_target(kernel, j, x, rng.random())


def path_value(model: InsuranceModel, t0: float, jump_times: Sequence[float],
               states: Sequence[State]) -> float:
    """Discounted value at ``t0`` of all cash flows along a path ending at the horizon."""
    pay, disc = model.payments, model.discount
    end = model.horizon_end
    bounds = [t0, *jump_times, end]
    pv = 0.0
    for g, a, b in zip(states, bounds[:-1], bounds[1:]):
        cuts = [a] + [c for c in pay.breakpoints if a < c < b] + [b]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            rate = pay.sojourn_rate(0.5 * (lo + hi), g)
            if rate:
                pv += rate * disc.annuity(t0, lo, hi)
    for j, g, h in zip(jump_times, states[:-1], states[1:]):
        b = pay.transfer(j, g, h)
        if b:
            pv += b * float(disc.factor(t0, j))
    for lump in pay.sojourn_lumps:
        if t0 <= lump.time <= end:
            i = int(np.searchsorted(np.asarray(jump_times, dtype=float), lump.time, side="right"))
            if lump.applies(states[i]):
                pv += lump.amount * float(disc.factor(t0, lump.time))
    return pv


def simulate_path(model: InsuranceModel, x0: State, t0: float, gen: np.random.Generator,
                  table: HazardTable) -> PathSample:
    t, x = t0, x0
    jumps: list[float] = []
    states = [x0]
    while x.label is not Label.DEAD:
        e = -math.log1p(-gen.random())
        j = table.next_jump(x, t, e)
        if j is None:
            break
        y = sample_target(model.kernel, j, x, gen.random())
        if y == x:
            raise NumericError(f"kernel produced a self-jump at {x}")
        jumps.append(j)
        states.append(y)
        t, x = j, y
    return PathSample(jumps, states, path_value(model, t0, jumps, states))


def _check_start(x0: State, t0: float, horizon_end: float) -> None:
    if not t0 <= horizon_end:
        raise DomainError(f"start time {t0} after horizon {horizon_end}")
    if x0.label is Label.DISABLED and x0.coord > t0 + 1e-12:
        raise DomainError(f"disability onset {x0.coord} lies after the start time {t0}")


def _chunks(n_paths: int) -> list[tuple[int, int, int]]:
    return [(c, c * CHUNK, min(n_paths, (c + 1) * CHUNK)) for c in range((n_paths + CHUNK - 1) // CHUNK)]


def estimate_from_pvs(pvs: np.ndarray, seed: int, engine: str, keep: bool) -> McEstimate:
    n = len(pvs)
    mean = float(np.mean(pvs))
    se = float(np.std(pvs, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(mean, se, n, seed, engine, pvs if keep else None)


def simulate_paths(model: InsuranceModel, x0: State, t0: float, n_paths: int, seed: int,
                   hazard_step: float = DEFAULT_HAZARD_STEP) -> list[PathSample]:
    """Full path records from the generic engine (for inspection and dumps)."""
    _check_start(x0, t0, model.horizon_end)
    table = HazardTable(model.kernel, min(t0, x0.coord if x0.label is Label.DISABLED else t0),
                        model.horizon_end, hazard_step)
    out = []
    for c, lo, hi in _chunks(n_paths):
        gen = chunk_generator(seed, c)
        out.extend(simulate_path(model, x0, t0, gen, table) for _ in range(lo, hi))
    return out


def _disability_tables(prod, t_lo: float, hazard_step: float):
    from .duration import _vec

    t_hi = prod.retirement
    m = max(1, int(math.ceil((t_hi - t_lo) / hazard_step - 1e-9)))
    h = (t_hi - t_lo) / m
    grid = t_lo + h * np.arange(m + 1)
    rates = prod.rates
    mu_ad = _vec(rates.mu_star_dagger, grid)
    lam_a = mu_ad + _vec(rates.mu_star_diamond, grid)
    base = _vec(rates.mu_diamond_star_base, grid)
    mudd = _vec(rates.mu_diamond_dagger, grid)
    factor = _vec(rates.factor, grid)
    for name, arr in (("active exit", lam_a), ("active mortality", mu_ad), ("disabled mortality", mudd)):
        if not np.isfinite(arr).all():
            raise NumericError(f"{name} rate not finite on the simulation grid")
        if arr.min() < 0:
            raise DomainError(f"{name} rate negative at t={grid[np.argmax(arr < 0)]:.6g}")
    if base.min() < 0 or factor.min() < 0:
        raise DomainError("rehabilitation intensity negative on the simulation horizon")
    return dict(t_lo=t_lo, h=h, Ha=_cumtrapz(lam_a, h), lam_a=lam_a, mu_ad=mu_ad,
                Hb=_cumtrapz(base, h), Hd=_cumtrapz(mudd, h), base=base, mudd=mudd, factor=factor)


def simulate_disability_pv(prod, x0: State, t0: float, n_paths: int, seed: int,
                           hazard_step: float = DEFAULT_HAZARD_STEP, backend=None,
                           workers: Optional[int] = None, keep_pvs: bool = False) -> McEstimate:
    """Present value of the disability annuity via the compiled (or fallback) path kernel."""
    kern = backend or kernels
    if x0.label not in (Label.ACTIVE, Label.DISABLED, Label.DEAD):
        raise DomainError(f"state {x0} is not part of the disability model")
    _check_start(x0, t0, prod.retirement)
    pvs = np.zeros(n_paths)
    if x0.label is Label.DEAD or t0 >= prod.retirement:
        return estimate_from_pvs(pvs, seed, f"disability-{kern.BACKEND}", keep_pvs)
    start_dis = x0.label is Label.DISABLED
    s0 = x0.coord if start_dis else t0
    tab = _disability_tables(prod, min(t0, s0), hazard_step)

    def run(chunk):
        c, lo, hi = chunk
        kern.simulate_disability(chunk_generator(seed, c), hi - lo, start_dis, float(s0), float(t0),
                                 tab["t_lo"], tab["h"], tab["Ha"], tab["lam_a"], tab["mu_ad"],
                                 tab["Hb"], tab["Hd"], tab["base"], tab["mudd"], tab["factor"],
                                 prod.r, prod.annuity_rate, pvs[lo:hi])

    chunks = _chunks(n_paths)
    n_workers = min(workers or max_workers(), len(chunks))
    if n_workers <= 1:
        for ch in chunks:
            run(ch)
    else:
        with ThreadPoolExecutor(n_workers) as pool:
            list(pool.map(run, chunks))
    return estimate_from_pvs(pvs, seed, f"disability-{kern.BACKEND}", keep_pvs)


def simulate_pv(model: InsuranceModel, x0: State, t0: float, n_paths: int, seed: int,
                hazard_step: float = DEFAULT_HAZARD_STEP, engine: str = "auto",
                keep_pvs: bool = False) -> McEstimate:
    """Estimate the reserve ``E[PV at t0 | X_t0 = x0]`` from ``n_paths`` simulated paths.

    ``engine`` is ``"auto"`` (compiled product simulator when the model has
    one), ``"fast"`` or ``"generic"``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if engine not in ("auto", "fast", "generic"):
        raise ValueError(f"unknown engine {engine!r}")
    if engine != "generic" and model.fast_path is not None:
        return simulate_disability_pv(model.fast_path, x0, t0, n_paths, seed, hazard_step, keep_pvs=keep_pvs)
    if engine == "fast":
        raise ValueError("model has no fast simulator")
    paths = simulate_paths(model, x0, t0, n_paths, seed, hazard_step)
    return estimate_from_pvs(np.array([p.pv for p in paths]), seed, "generic", keep_pvs)


def write_paths_csv(paths: Sequence[PathSample], fh) -> None:
    """One row per path: index, ``;``-joined jump times and states, present value."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["path", "jump_times", "states", "pv"])
    for i, p in enumerate(paths):
        w.writerow([i, ";".join(repr(j) for j in p.jump_times), ";".join(str(s) for s in p.states), repr(p.pv)])
