"""Pure-Python/numpy implementations of the hot loops.

Mirrors ``_kernels.pyx`` operation for operation, so either backend gives the
same numbers for the same inputs (the simulator draws uniforms in the same
order and evaluates the same scalar expressions).
"""

from __future__ import annotations

import math

import numpy as np

from .model import NumericError

BACKEND = "python"


def discrete_sweep(mu, bdot, bpay, r, lumps, boundary, dt):
    """Backward Euler Thiele recursion on a finite state space.

    ``mu[n, g, h]`` are intensities at grid time ``n`` (zero diagonal),
    ``bdot[n, g]`` sojourn rates, ``bpay[n, g, h]`` transition payments,
    ``r[n]`` short rates and ``lumps[n, g]`` sojourn lumps falling on grid
    point ``n``.  Returns ``V[g, n]``.
    """
    n_steps = mu.shape[0] - 1
    n_states = mu.shape[1]
    V = np.empty((n_states, n_steps + 1))
    V[:, n_steps] = boundary + lumps[n_steps]
    lam = mu.sum(axis=2)
    for n in range(n_steps, 0, -1):
        v = V[:, n]
        inflow = (mu[n] * (bpay[n] + v[None, :])).sum(axis=1)
        prev = v - dt * ((lam[n] + r[n]) * v - bdot[n] - inflow) + lumps[n - 1]
        bad = ~np.isfinite(prev)
        if bad.any():
            raise NumericError(f"non-finite reserve at step {n - 1}, state {int(np.argmax(bad))}")
        V[:, n - 1] = prev
    return V


def disability_sweep(mu_sd, mu_si, base, mu_dd, factor, r, dt, annuity,
                     active, onset, surface, slice_rows, slices):
    """Coupled backward recursion over the (onset k, time n) triangle, k <= n.

    Fills ``active[n]`` (active reserve), ``onset[n]`` (reserve of a life
    disabled at ``t_n`` evaluated at ``t_n``), the full ``surface[k, n]``
    when it has shape ``(N+1, N+1)``, and ``slices[j, n]`` for onset rows
    ``slice_rows[j]``.  Only one column of the triangle is held in memory.
    """
    n_steps = len(mu_sd) - 1
    keep = surface.shape[0] > 0
    col = np.zeros(n_steps + 1)
    active[n_steps] = 0.0
    onset[n_steps] = 0.0
    if keep:
        surface[:, n_steps] = 0.0
    for j, k in enumerate(slice_rows):
        slices[j, k:] = 0.0
    for n in range(n_steps, 0, -1):
        vs = active[n]
        # rows k = 0..n-1 are onsets at or before t_n, so rehabilitation applies to all of them
        rehab = base[n] * factor[:n]
        v = col[:n]
        col[:n] = v - dt * ((rehab + mu_dd[n] + r) * v - annuity - vs * rehab)
        active[n - 1] = vs - dt * ((mu_sd[n] + mu_si[n] + r) * vs - col[n] * mu_si[n])
        onset[n - 1] = col[n - 1]
        fin = np.isfinite(col[:n])
        if not fin.all():
            raise NumericError(f"non-finite reserve at onset index {int(np.argmin(fin))}, step {n - 1}")
        if not math.isfinite(active[n - 1]):
            raise NumericError(f"non-finite active reserve at step {n - 1}")
        if keep:
            surface[:n, n - 1] = col[:n]
        for j, k in enumerate(slice_rows):
            if k <= n - 1:
                slices[j, n - 1] = col[k]


class _Uniforms:
    """Sequential uniforms from a numpy Generator, drawn in blocks.

    Block draws yield the same sequence as one-at-a-time ``next_double``
    calls on the underlying bit generator.
    """

    def __init__(self, gen, block=1024):
        self.gen = gen
        self.block = block
        self.buf = gen.random(block)
        self.i = 0

    def next(self):
        if self.i == self.block:
            self.buf = self.gen.random(self.block)
            self.i = 0
        u = float(self.buf[self.i])
        self.i += 1
        return u


def _interp(a, t, t_lo, h, m):
    x = (t - t_lo) / h
    i = int(math.floor(x))
    if i < 0:
        i = 0
    elif i > m - 1:
        i = m - 1
    w = x - i
    return a[i] + w * (a[i + 1] - a[i])


def _invert(A, B, c1, c2, t, target, t_lo, h, m):
    lo = int(math.floor((t - t_lo) / h))
    if lo < 0:
        lo = 0
    elif lo > m - 1:
        lo = m - 1
    hi = m
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if c1 * A[mid] + c2 * B[mid] >= target:
            hi = mid
        else:
            lo = mid
    h_lo = c1 * A[lo] + c2 * B[lo]
    h_hi = c1 * A[hi] + c2 * B[hi]
    if h_hi > h_lo:
        j = t_lo + h * (lo + (target - h_lo) / (h_hi - h_lo))
    else:
        j = t_lo + h * hi
    return j if j > t else t


def _segment(annuity, r, t_eval, a, b):
    if r == 0.0:
        return annuity * (b - a)
    return annuity * (math.exp(-r * (a - t_eval)) - math.exp(-r * (b - t_eval))) / r


def simulate_disability(gen, n_paths, start_disabled, s0, t_eval, t_lo, h,
                        Ha, lam_a, mu_ad, Hb, Hd, base, mudd, factor,
                        r, annuity, out):
    """Simulate ``n_paths`` disability-product paths from ``t_eval``.

    Grids have ``m + 1`` points ``t_lo + i*h``; the last one is the end of
    cover.  ``out[p]`` receives the discounted value at ``t_eval`` of the
    disability annuity along path ``p``.  Returns the number of jumps made.
    """
    m = len(Ha) - 1
    Ha = Ha.tolist(); lam_a = lam_a.tolist(); mu_ad = mu_ad.tolist()
    Hb = Hb.tolist(); Hd = Hd.tolist(); base = base.tolist()
    mudd = mudd.tolist(); factor = factor.tolist()
    t_hi = t_lo + m * h
    u = _Uniforms(gen)
    jumps = 0
    for p in range(n_paths):
        t = t_eval
        is_dis = start_disabled
        s = s0
        pv = 0.0
        while True:
            e = -math.log1p(-u.next())
            if is_dis:
                f = _interp(factor, s, t_lo, h, m)
                target = f * _interp(Hb, t, t_lo, h, m) + _interp(Hd, t, t_lo, h, m) + e
                if target >= f * Hb[m] + Hd[m]:
                    pv += _segment(annuity, r, t_eval, t, t_hi)
                    break
                j = _invert(Hb, Hd, f, 1.0, t, target, t_lo, h, m)
                pv += _segment(annuity, r, t_eval, t, j)
                jumps += 1
                rehab = f * _interp(base, j, t_lo, h, m)
                dd = _interp(mudd, j, t_lo, h, m)
                if u.next() * (rehab + dd) < dd:
                    break
                is_dis = False
                t = j
            else:
                target = _interp(Ha, t, t_lo, h, m) + e
                if target >= Ha[m]:
                    break
                j = _invert(Ha, Ha, 1.0, 0.0, t, target, t_lo, h, m)
                jumps += 1
                if u.next() * _interp(lam_a, j, t_lo, h, m) < _interp(mu_ad, j, t_lo, h, m):
                    break
                is_dis = True
                s = j
                t = j
        out[p] = pv
    return jumps
