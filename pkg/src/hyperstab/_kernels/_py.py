"""Pure-Python reference kernels.

These are the hot inner loops of the package; ``hyperstab._kernels._cy`` holds
a compiled twin with identical semantics.  Keep the two in lockstep: the
equivalence test suite compares them element-wise.
"""

import cmath
import math

import numpy as np

BACKEND = "python"

_EPS = 2.220446049250313e-16


def _eig2(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]] (complex, closed form)."""
    m = 0.5 * (a + d)
    disc = cmath.sqrt(0.25 * (a - d) * (a - d) + b * c)
    return m + disc, m - disc


def _hessenberg(h, n):
    """In-place Householder reduction of ``h`` to upper Hessenberg form."""
    for k in range(n - 2):
        # norm of the column below the subdiagonal entry
        scale = 0.0
        for i in range(k + 1, n):
            scale += abs(h[i][k].real) + abs(h[i][k].imag)
        if scale == 0.0:
            continue
        sigma = 0.0
        for i in range(k + 1, n):
            h[i][k] /= scale
            sigma += abs(h[i][k]) ** 2
        norm = math.sqrt(sigma)
        f = h[k + 1][k]
        alpha = f / abs(f) if f != 0 else 1.0 + 0j
        # v = x + alpha*norm*e1 ; beta = 2/|v|^2
        v = [0j] * n
        v[k + 1] = f + alpha * norm
        vnorm2 = abs(v[k + 1]) ** 2
        for i in range(k + 2, n):
            v[i] = h[i][k]
            vnorm2 += abs(v[i]) ** 2
        if vnorm2 == 0.0:
            for i in range(k + 1, n):
                h[i][k] *= scale
            continue
        beta = 2.0 / vnorm2
        # H <- (I - beta v v*) H
        for j in range(k, n):
            s = 0j
            for i in range(k + 1, n):
                s += v[i].conjugate() * h[i][j]
            s *= beta
            for i in range(k + 1, n):
                h[i][j] -= s * v[i]
        # H <- H (I - beta v v*)
        for i in range(n):
            s = 0j
            for j in range(k + 1, n):
                s += h[i][j] * v[j]
            s *= beta
            for j in range(k + 1, n):
                h[i][j] -= s * v[j].conjugate()
        h[k + 1][k] = -alpha * norm * scale
        for i in range(k + 2, n):
            h[i][k] = 0j


def _qr_eigvals_list(h, n, max_sweeps):
    """Shifted QR with deflation on an upper Hessenberg matrix ``h``.

    Returns the list of eigenvalues; raises ``ValueError`` when an eigenvalue
    fails to converge within ``max_sweeps`` iterations (the caller wraps this
    into a package-level NumericError with diagnostics).
    """
    eigs = []
    hi = n - 1
    iters = 0
    while hi >= 0:
        if hi == 0:
            eigs.append(h[0][0])
            break
        # deflate negligible subdiagonals
        for i in range(1, hi + 1):
            t = abs(h[i - 1][i - 1]) + abs(h[i][i])
            if t == 0.0:
                t = 1.0
            if abs(h[i][i - 1]) <= _EPS * t:
                h[i][i - 1] = 0j
        if h[hi][hi - 1] == 0:
            eigs.append(h[hi][hi])
            hi -= 1
            iters = 0
            continue
        # find the start of the unreduced block ending at hi
        lo = hi - 1
        while lo > 0 and h[lo][lo - 1] != 0:
            lo -= 1
        if hi - lo == 1 and h[hi][hi - 1] != 0:
            l1, l2 = _eig2(h[lo][lo], h[lo][hi], h[hi][lo], h[hi][hi])
            eigs.append(l1)
            eigs.append(l2)
            hi = lo - 1
            iters = 0
            continue
        iters += 1
        if iters > max_sweeps:
            raise ValueError(
                f"QR iteration stalled on block [{lo},{hi}] "
                f"(subdiagonal {abs(h[hi][hi - 1]):.3e} after {max_sweeps} sweeps)"
            )
        # Wilkinson shift: trailing 2x2 eigenvalue closest to h[hi][hi]
        if iters % 12 == 0:
            # exceptional shift to break symmetry-induced cycles
            shift = h[hi][hi] + 0.75 * abs(h[hi][hi - 1])
        else:
            l1, l2 = _eig2(h[hi - 1][hi - 1], h[hi - 1][hi],
                           h[hi][hi - 1], h[hi][hi])
            shift = l1 if abs(l1 - h[hi][hi]) <= abs(l2 - h[hi][hi]) else l2
        # explicit shifted QR sweep on the block via Givens rotations
        cs = [0.0] * hi
        sn = [0j] * hi
        for i in range(lo, hi + 1):
            h[i][i] -= shift
        for i in range(lo, hi):
            f = h[i][i]
            g = h[i + 1][i]
            af = abs(f)
            r = math.hypot(af, abs(g))
            if r == 0.0:
                cs[i] = 1.0
                sn[i] = 0j
                continue
            alpha = f / af if af > 0 else 1.0 + 0j
            c = af / r
            s = alpha * g.conjugate() / r
            cs[i] = c
            sn[i] = s
            for j in range(i, hi + 1):
                t1 = h[i][j]
                t2 = h[i + 1][j]
                h[i][j] = c * t1 + s * t2
                h[i + 1][j] = -s.conjugate() * t1 + c * t2
        for i in range(lo, hi):
            c = cs[i]
            s = sn[i]
            jmax = min(i + 2, hi)
            for j in range(lo, jmax + 1):
                t1 = h[j][i]
                t2 = h[j][i + 1]
                h[j][i] = c * t1 + s.conjugate() * t2
                h[j][i + 1] = -s * t1 + c * t2
        for i in range(lo, hi + 1):
            h[i][i] += shift
    return eigs


def eigvals(a, max_sweeps=80):
    """Eigenvalues of a dense square matrix (complex128, n <= 64).

    Hessenberg reduction followed by shifted QR with deflation.
    """
    m = np.asarray(a, dtype=complex)
    n = m.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    if n == 1:
        return m.ravel().copy()
    if n == 2:
        return np.array(_eig2(m[0, 0], m[0, 1], m[1, 0], m[1, 1]))
    h = [list(row) for row in m]
    _hessenberg(h, n)
    eigs = _qr_eigvals_list(h, n, max_sweeps)
    return np.array(eigs, dtype=complex)


def spectral_radius(a, max_sweeps=80):
    """max |lambda| over the spectrum of ``a``."""
    ev = eigvals(a, max_sweeps)
    if ev.size == 0:
        return 0.0
    return float(np.max(np.abs(ev)))


def phase_grid_spectral_radius(k, thetas, max_sweeps=80):
    """rho(diag(e^{i theta}) K) for each row of ``thetas``.

    ``thetas`` has shape (N, n-1); the first phase is gauge-fixed to zero.
    Returns an (N,) float array.
    """
    kc = np.asarray(k, dtype=complex)
    n = kc.shape[0]
    th = np.asarray(thetas, dtype=float)
    out = np.empty(th.shape[0])
    for idx in range(th.shape[0]):
        phases = np.ones(n, dtype=complex)
        phases[1:] = np.exp(1j * th[idx])
        out[idx] = spectral_radius(phases[:, None] * kc, max_sweeps)
    return out


def _interp_read(values, pos, nrows):
    """Cubic Lagrange read of a sample column at fractional index ``pos``.

    ``values`` is an (nrows, ncomp) array;  positions within 1e-9 of a node
    snap to the node so that exactly-aligned delays reproduce the recursion
    without interpolation error.
    """
    i = int(math.floor(pos))
    frac = pos - i
    if i < 0:
        i, frac = 0, 0.0
    if i >= nrows - 1:
        i, frac = nrows - 1, 0.0
    if frac < 1e-9:
        return values[i]
    if frac > 1 - 1e-9:
        return values[i + 1]
    if i == 0 or i >= nrows - 2:
        # linear fallback at the ends of the table
        return (1 - frac) * values[i] + frac * values[i + 1]
    ym1, y0, y1, y2 = values[i - 1], values[i], values[i + 1], values[i + 2]
    t = frac
    c_m1 = -t * (t - 1) * (t - 2) / 6.0
    c_0 = (t + 1) * (t - 1) * (t - 2) / 2.0
    c_1 = -(t + 1) * t * (t - 2) / 2.0
    c_2 = (t + 1) * t * (t - 1) / 6.0
    return c_m1 * ym1 + c_0 * y0 + c_1 * y1 + c_2 * y2


def delay_linear_advance(k, delays_over_dt, table, nhist, nsteps):
    """Advance the linear delay recursion on a uniform grid.

    ``table`` is an ((nhist + nsteps), n) array whose first ``nhist`` rows
    hold the history x(t), t <= 0; row nhist-1 corresponds to t = 0.  Row
    nhist - 1 + j (j >= 1) receives x(t_j) with x_i = sum_j K_ij x_j(t - r_j),
    past values read by cubic interpolation.  Mutates ``table`` in place.
    """
    km = np.asarray(k, dtype=float)
    n = km.shape[0]
    for step in range(1, nsteps + 1):
        row = nhist - 1 + step
        acc = np.zeros(n)
        for j in range(n):
            past = _interp_read(table, row - delays_over_dt[j], row)
            acc += km[:, j] * past[j]
        table[row] = acc
    return table
