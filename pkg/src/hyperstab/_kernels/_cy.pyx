# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: complex Hessenberg + shifted-QR eigenvalues, phase-grid
spectral radii, and the linear delay advance.

Semantics mirror hyperstab._kernels._py exactly; the equivalence test suite
compares the two element-wise.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from "complex.h" nogil:
    double complex csqrt(double complex)
    double cabs(double complex)
    double complex conj(double complex)

cdef extern from "math.h" nogil:
    double hypot(double, double)
    double sqrt(double)
    double floor(double)
    double fabs(double)
    double cos(double)
    double sin(double)

BACKEND = "cython"

cdef double _EPS = 2.220446049250313e-16


cdef inline void _eig2(double complex a, double complex b,
                       double complex c, double complex d,
                       double complex *l1, double complex *l2) nogil:
    cdef double complex m = 0.5 * (a + d)
    cdef double complex disc = csqrt(0.25 * (a - d) * (a - d) + b * c)
    l1[0] = m + disc
    l2[0] = m - disc


cdef void _hessenberg(double complex[:, ::1] h, int n) nogil:
    cdef int i, j, k
    cdef double scale, sigma, vnorm2, beta
    cdef double complex f, alpha, s
    cdef double complex v[64]
    for k in range(n - 2):
        scale = 0.0
        for i in range(k + 1, n):
            scale += fabs(h[i, k].real) + fabs(h[i, k].imag)
        if scale == 0.0:
            continue
        sigma = 0.0
        for i in range(k + 1, n):
            h[i, k] = h[i, k] / scale
            sigma += cabs(h[i, k]) * cabs(h[i, k])
        f = h[k + 1, k]
        if f != 0:
            alpha = f / cabs(f)
        else:
            alpha = 1.0
        for i in range(n):
            v[i] = 0
        v[k + 1] = f + alpha * sqrt(sigma)
        vnorm2 = cabs(v[k + 1]) * cabs(v[k + 1])
        for i in range(k + 2, n):
            v[i] = h[i, k]
            vnorm2 += cabs(v[i]) * cabs(v[i])
        if vnorm2 == 0.0:
            for i in range(k + 1, n):
                h[i, k] = h[i, k] * scale
            continue
        beta = 2.0 / vnorm2
        for j in range(k, n):
            s = 0
            for i in range(k + 1, n):
                s += conj(v[i]) * h[i, j]
            s *= beta
            for i in range(k + 1, n):
                h[i, j] = h[i, j] - s * v[i]
        for i in range(n):
            s = 0
            for j in range(k + 1, n):
                s += h[i, j] * v[j]
            s *= beta
            for j in range(k + 1, n):
                h[i, j] = h[i, j] - s * conj(v[j])
        h[k + 1, k] = -alpha * sqrt(sigma) * scale
        for i in range(k + 2, n):
            h[i, k] = 0


cdef int _qr_eigvals(double complex[:, ::1] h, int n,
                     double complex[::1] eigs, int max_sweeps) nogil:
    """Returns the number of eigenvalues found, or -1 on non-convergence."""
    cdef int hi = n - 1
    cdef int lo, i, j, jmax, iters = 0, neig = 0
    cdef double t, af, r
    cdef double complex l1, l2, shift, f, g, alpha, s, t1, t2
    cdef double cs[64]
    cdef double complex sn[64]
    while hi >= 0:
        if hi == 0:
            eigs[neig] = h[0, 0]
            neig += 1
            break
        for i in range(1, hi + 1):
            t = cabs(h[i - 1, i - 1]) + cabs(h[i, i])
            if t == 0.0:
                t = 1.0
            if cabs(h[i, i - 1]) <= _EPS * t:
                h[i, i - 1] = 0
        if h[hi, hi - 1] == 0:
            eigs[neig] = h[hi, hi]
            neig += 1
            hi -= 1
            iters = 0
            continue
        lo = hi - 1
        while lo > 0 and h[lo, lo - 1] != 0:
            lo -= 1
        if hi - lo == 1 and h[hi, hi - 1] != 0:
            _eig2(h[lo, lo], h[lo, hi], h[hi, lo], h[hi, hi], &l1, &l2)
            eigs[neig] = l1
            eigs[neig + 1] = l2
            neig += 2
            hi = lo - 1
            iters = 0
            continue
        iters += 1
        if iters > max_sweeps:
            return -1
        if iters % 12 == 0:
            shift = h[hi, hi] + 0.75 * cabs(h[hi, hi - 1])
        else:
            _eig2(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi],
                  &l1, &l2)
            if cabs(l1 - h[hi, hi]) <= cabs(l2 - h[hi, hi]):
                shift = l1
            else:
                shift = l2
        for i in range(lo, hi + 1):
            h[i, i] = h[i, i] - shift
        for i in range(lo, hi):
            f = h[i, i]
            g = h[i + 1, i]
            af = cabs(f)
            r = hypot(af, cabs(g))
            if r == 0.0:
                cs[i] = 1.0
                sn[i] = 0
                continue
            if af > 0:
                alpha = f / af
            else:
                alpha = 1.0
            cs[i] = af / r
            sn[i] = alpha * conj(g) / r
            for j in range(i, hi + 1):
                t1 = h[i, j]
                t2 = h[i + 1, j]
                h[i, j] = cs[i] * t1 + sn[i] * t2
                h[i + 1, j] = -conj(sn[i]) * t1 + cs[i] * t2
        for i in range(lo, hi):
            jmax = i + 2
            if jmax > hi:
                jmax = hi
            for j in range(lo, jmax + 1):
                t1 = h[j, i]
                t2 = h[j, i + 1]
                h[j, i] = cs[i] * t1 + conj(sn[i]) * t2
                h[j, i + 1] = -sn[i] * t1 + cs[i] * t2
        for i in range(lo, hi + 1):
            h[i, i] = h[i, i] + shift
    return neig


def eigvals(a, max_sweeps=80):
    """Eigenvalues of a dense square matrix (complex128, n <= 64)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] m = \
        np.array(a, dtype=np.complex128, order="C", copy=True)
    cdef int n = m.shape[0]
    if n > 64:
        raise ValueError("compiled eigensolver is limited to n <= 64")
    if n == 0:
        return np.zeros(0, dtype=complex)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = \
        np.empty(n, dtype=np.complex128)
    cdef double complex l1, l2
    if n == 1:
        out[0] = m[0, 0]
        return out
    if n == 2:
        _eig2(m[0, 0], m[0, 1], m[1, 0], m[1, 1], &l1, &l2)
        out[0] = l1
        out[1] = l2
        return out
    _hessenberg(m, n)
    cdef int neig = _qr_eigvals(m, n, out, max_sweeps)
    if neig < 0:
        raise ValueError(
            f"QR iteration stalled after {max_sweeps} sweeps (n = {n})")
    return out


def spectral_radius(a, max_sweeps=80):
    ev = eigvals(a, max_sweeps)
    if ev.size == 0:
        return 0.0
    return float(np.max(np.abs(ev)))


def phase_grid_spectral_radius(k, thetas, max_sweeps=80):
    """rho(diag(e^{i theta}) K) over rows of thetas (first phase gauged 0)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] kc = \
        np.array(k, dtype=np.complex128, order="C", copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] th = \
        np.ascontiguousarray(np.atleast_2d(thetas), dtype=np.float64)
    cdef int n = kc.shape[0]
    if th.shape[1] != n - 1:
        raise ValueError("theta rows must have length n - 1")
    cdef int npts = th.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(npts)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] work = \
        np.empty((n, n), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] eigs = \
        np.empty(n, dtype=np.complex128)
    cdef double complex[:, ::1] kv = kc
    cdef double complex[:, ::1] wv = work
    cdef double complex[::1] ev = eigs
    cdef double[:, ::1] tv = th
    cdef int ip, i, j, neig
    cdef double best, mag, c, s
    cdef double complex phase, l1, l2
    for ip in range(npts):
        for i in range(n):
            if i == 0:
                phase = 1.0
            else:
                c = cos(tv[ip, i - 1])
                s = sin(tv[ip, i - 1])
                phase.real = c
                phase.imag = s
            for j in range(n):
                wv[i, j] = phase * kv[i, j]
        if n == 1:
            out[ip] = cabs(wv[0, 0])
            continue
        if n == 2:
            _eig2(wv[0, 0], wv[0, 1], wv[1, 0], wv[1, 1], &l1, &l2)
            best = cabs(l1)
            mag = cabs(l2)
            if mag > best:
                best = mag
            out[ip] = best
            continue
        _hessenberg(wv, n)
        neig = _qr_eigvals(wv, n, ev, max_sweeps)
        if neig < 0:
            raise ValueError("QR iteration stalled inside the phase grid")
        best = 0.0
        for i in range(neig):
            mag = cabs(ev[i])
            if mag > best:
                best = mag
        out[ip] = best
    return out


cdef void _interp_read(double[:, ::1] values, double pos, int nrows,
                       double *out, int ncols) nogil:
    cdef int i = <int>floor(pos)
    cdef double frac = pos - i
    cdef int j
    cdef double t, c_m1, c_0, c_1, c_2
    if i < 0:
        i = 0
        frac = 0.0
    if i >= nrows - 1:
        i = nrows - 1
        frac = 0.0
    if frac < 1e-9:
        for j in range(ncols):
            out[j] = values[i, j]
        return
    if frac > 1 - 1e-9:
        for j in range(ncols):
            out[j] = values[i + 1, j]
        return
    if i == 0 or i >= nrows - 2:
        for j in range(ncols):
            out[j] = (1 - frac) * values[i, j] + frac * values[i + 1, j]
        return
    t = frac
    c_m1 = -t * (t - 1) * (t - 2) / 6.0
    c_0 = (t + 1) * (t - 1) * (t - 2) / 2.0
    c_1 = -(t + 1) * t * (t - 2) / 2.0
    c_2 = (t + 1) * t * (t - 1) / 6.0
    for j in range(ncols):
        out[j] = (c_m1 * values[i - 1, j] + c_0 * values[i, j]
                  + c_1 * values[i + 1, j] + c_2 * values[i + 2, j])


def delay_linear_advance(k, delays_over_dt, table, nhist, nsteps):
    """In-place advance of x_i(t) = sum_j K_ij x_j(t - r_j) on a uniform grid."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] km = \
        np.ascontiguousarray(k, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rd = \
        np.ascontiguousarray(delays_over_dt, dtype=np.float64)
    cdef double[:, ::1] tbl = table
    cdef double[:, ::1] kv = km
    cdef double[::1] rv = rd
    cdef int n = km.shape[0]
    cdef int nh = nhist, ns = nsteps
    cdef int step, row, i, j
    cdef double past[64]
    cdef double acc[64]
    if n > 64:
        raise ValueError("delay advance is limited to n <= 64 components")
    with nogil:
        for step in range(1, ns + 1):
            row = nh - 1 + step
            for i in range(n):
                acc[i] = 0.0
            for j in range(n):
                _interp_read(tbl, row - rv[j], row, past, n)
                for i in range(n):
                    acc[i] += kv[i, j] * past[j]
            for i in range(n):
                tbl[row, i] = acc[i]
    return table
