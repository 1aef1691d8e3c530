# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops; see ``_pykernels`` for the reference semantics."""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, floor, isfinite, log1p
from numpy.random cimport bitgen_t

from .model import NumericError

BACKEND = "cython"


def discrete_sweep(const double[:, :, ::1] mu, const double[:, ::1] bdot, const double[:, :, ::1] bpay,
                   const double[::1] r, const double[:, ::1] lumps, const double[::1] boundary, double dt):
    cdef Py_ssize_t n_steps = mu.shape[0] - 1
    cdef Py_ssize_t n_states = mu.shape[1]
    cdef Py_ssize_t n, g, h
    cdef double lam, inflow, v, prev
    out = np.empty((n_states, n_steps + 1))
    cdef double[:, ::1] V = out
    for g in range(n_states):
        V[g, n_steps] = boundary[g] + lumps[n_steps, g]
    for n in range(n_steps, 0, -1):
        for g in range(n_states):
            lam = 0.0
            inflow = 0.0
            for h in range(n_states):
                lam += mu[n, g, h]
                inflow += mu[n, g, h] * (bpay[n, g, h] + V[h, n])
            v = V[g, n]
            prev = v - dt * ((lam + r[n]) * v - bdot[n, g] - inflow) + lumps[n - 1, g]
            if not isfinite(prev):
                raise NumericError(f"non-finite reserve at step {n - 1}, state {g}")
            V[g, n - 1] = prev
    return out


def disability_sweep(const double[::1] mu_sd, const double[::1] mu_si, const double[::1] base,
                     const double[::1] mu_dd, const double[::1] factor, double r, double dt, double annuity,
                     double[::1] active, double[::1] onset, double[:, ::1] surface,
                     const long[::1] slice_rows, double[:, ::1] slices):
    cdef Py_ssize_t n_steps = mu_sd.shape[0] - 1
    cdef bint keep = surface.shape[0] > 0
    cdef Py_ssize_t n, k, j, n_slices = slice_rows.shape[0]
    cdef double vs, v, rehab, bn, dn
    cdef double[::1] col = np.zeros(n_steps + 1)
    active[n_steps] = 0.0
    onset[n_steps] = 0.0
    if keep:
        for k in range(n_steps + 1):
            surface[k, n_steps] = 0.0
    for j in range(n_slices):
        for n in range(slice_rows[j], n_steps + 1):
            slices[j, n] = 0.0
    with nogil:
        for n in range(n_steps, 0, -1):
            vs = active[n]
            bn = base[n]
            dn = mu_dd[n]
            # k < n: every onset is at or before t_n, so rehabilitation applies
            for k in range(n):
                rehab = bn * factor[k]
                v = col[k]
                col[k] = v - dt * ((rehab + dn + r) * v - annuity - vs * rehab)
                if not isfinite(col[k]):
                    with gil:
                        raise NumericError(f"non-finite reserve at onset index {k}, step {n - 1}")
            active[n - 1] = vs - dt * ((mu_sd[n] + mu_si[n] + r) * vs - col[n] * mu_si[n])
            if not isfinite(active[n - 1]):
                with gil:
                    raise NumericError(f"non-finite active reserve at step {n - 1}")
            onset[n - 1] = col[n - 1]
            if keep:
                for k in range(n):
                    surface[k, n - 1] = col[k]
            for j in range(n_slices):
                if slice_rows[j] <= n - 1:
                    slices[j, n - 1] = col[slice_rows[j]]


cdef inline Py_ssize_t _cell(double t, double t_lo, double h, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i = <Py_ssize_t>floor((t - t_lo) / h)
    if i < 0:
        return 0
    if i > m - 1:
        return m - 1
    return i


cdef inline double _interp(const double[::1] a, double t, double t_lo, double h, Py_ssize_t m) noexcept nogil:
    cdef double x = (t - t_lo) / h
    cdef Py_ssize_t i = <Py_ssize_t>floor(x)
    if i < 0:
        i = 0
    elif i > m - 1:
        i = m - 1
    cdef double w = x - i
    return a[i] + w * (a[i + 1] - a[i])


cdef inline double _invert(const double[::1] A, const double[::1] B, double c1, double c2,
                           double t, double target, double t_lo, double h, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t lo = _cell(t, t_lo, h, m), hi = m, mid
    cdef double h_lo, h_hi, j
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


cdef inline double _segment(double annuity, double r, double t_eval, double a, double b) noexcept nogil:
    if r == 0.0:
        return annuity * (b - a)
    return annuity * (exp(-r * (a - t_eval)) - exp(-r * (b - t_eval))) / r


def simulate_disability(gen, Py_ssize_t n_paths, bint start_disabled, double s0, double t_eval,
                        double t_lo, double h,
                        const double[::1] Ha, const double[::1] lam_a, const double[::1] mu_ad,
                        const double[::1] Hb, const double[::1] Hd, const double[::1] base,
                        const double[::1] mudd, const double[::1] factor,
                        double r, double annuity, double[::1] out):
    cdef Py_ssize_t m = Ha.shape[0] - 1
    cdef double t_hi = t_lo + m * h
    cdef Py_ssize_t p
    cdef long jumps = 0
    cdef bint is_dis
    cdef double t, s, pv, e, f, target, j, rehab, dd
    bit_generator = gen.bit_generator
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(bit_generator.capsule, "BitGenerator")
    with bit_generator.lock, nogil:
        for p in range(n_paths):
            t = t_eval
            is_dis = start_disabled
            s = s0
            pv = 0.0
            while True:
                e = -log1p(-rng.next_double(rng.state))
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
                    if rng.next_double(rng.state) * (rehab + dd) < dd:
                        break
                    is_dis = False
                    t = j
                else:
                    target = _interp(Ha, t, t_lo, h, m) + e
                    if target >= Ha[m]:
                        break
                    j = _invert(Ha, Ha, 1.0, 0.0, t, target, t_lo, h, m)
                    jumps += 1
                    if rng.next_double(rng.state) * _interp(lam_a, j, t_lo, h, m) < _interp(mu_ad, j, t_lo, h, m):
                        break
                    is_dis = True
                    s = j
                    t = j
            out[p] = pv
    return jumps
