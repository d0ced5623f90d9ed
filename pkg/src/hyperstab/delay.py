"""Linear and state-dependent delay recursions, characteristic roots,
and robustness sweeps over delay perturbations.

The linear recursion x_i(t) = sum_j K_ij x_j(t - r_j) is the boundary-trace
form of a 1-D hyperbolic system with positive speeds 1/r_j; the
state-dependent engine advances the two-delay relation

    v(t + r2 + v2(t)) = v1(t + r2 + v2(t) - r1) G1 + v2(t) G2

whose second delay length depends on the solution itself.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, spectral
from .errors import DynamicsError, InputError
from .signals import SampledSignal


@dataclass
class DelaySystem:
    K: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        self.r = np.atleast_1d(np.asarray(self.r, dtype=float))
        n = self.K.shape[0]
        if self.K.shape != (n, n):
            raise InputError("K must be square")
        if self.r.shape != (n,):
            raise InputError("delay vector length must match dim(K)")
        if np.any(self.r <= 0):
            raise InputError("delays must be positive")
        if not (np.all(np.isfinite(self.K)) and np.all(np.isfinite(self.r))):
            raise InputError("non-finite system data")

    @property
    def n(self):
        return self.K.shape[0]

    def to_file(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"n {self.n}\n")
            for row in self.K:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")
            fh.write("r " + " ".join(repr(float(x)) for x in self.r) + "\n")

    @classmethod
    def from_file(cls, path):
        n = None
        rows = []
        r = None
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                tok = line.split()
                if tok[0] == "n":
                    n = int(tok[1])
                elif tok[0] == "r":
                    r = [float(t) for t in tok[1:]]
                else:
                    rows.extend(float(t) for t in tok)
        if n is None or r is None:
            raise InputError(f"{path}: needs 'n' and 'r' fields")
        return cls(np.array(rows).reshape(n, n), np.array(r))


def simulate_linear(sys: DelaySystem, history: SampledSignal, T, dt=None):
    """Advance the linear delay recursion to horizon ``T``.

    ``history`` must cover [-max(r), 0].  The recursion is explicit, so the
    grid values are exact up to interpolation of past reads; reads aligned
    with the grid are exact.  A derivative channel, when present, is advanced
    through the differentiated recursion.
    """
    rmax = float(np.max(sys.r))
    rmin = float(np.min(sys.r))
    if dt is None:
        dt = rmin / 32.0
    if dt > rmin / 16.0 + 1e-15:
        raise InputError(f"dt={dt} too coarse; need dt <= min(r)/16 = {rmin / 16}")
    if history.t0 > -rmax + 1e-12 or history.t1 < -1e-12:
        raise InputError("history must cover [-max(r), 0]")
    nhist = int(round(rmax / dt)) + 1
    hist_times = -rmax + dt * np.arange(nhist)
    hist_times = np.clip(hist_times, history.t0, history.t1)
    nsteps = int(math.floor(T / dt + 1e-9))
    table = np.zeros((nhist + nsteps, sys.n))
    table[:nhist] = history.eval(hist_times)
    # the recursion applies from t = 0 inclusive (the boundary identity holds
    # at t = 0), so the grid row at t = 0 is recursed, not copied
    _kernels.delay_linear_advance(sys.K, sys.r / dt, table, nhist - 1,
                                  nsteps + 1)
    derivs = None
    if history.derivatives is not None:
        dtable = np.zeros_like(table)
        dtable[:nhist] = history.eval_derivative(hist_times)
        _kernels.delay_linear_advance(sys.K, sys.r / dt, dtable, nhist - 1,
                                      nsteps + 1)
        derivs = dtable[nhist - 1:]
    return SampledSignal(0.0, dt, table[nhist - 1:], derivs)


def characteristic_value(sys: DelaySystem, z):
    """H(z) = det(I - diag(e^{-r_i z}) K); an entire function of z."""
    z = complex(z)
    d = np.array([cmath.exp(-ri * z) for ri in sys.r])
    a = np.eye(sys.n, dtype=complex) - d[:, None] * sys.K
    return complex(np.linalg.det(a))


def _char_logderiv(sys, z):
    """H'(z)/H(z) = tr(A^{-1} A') with A = I - D(z)K, A' = diag(r e^{-rz}) K."""
    d = np.array([cmath.exp(-ri * z) for ri in sys.r])
    a = np.eye(sys.n, dtype=complex) - d[:, None] * sys.K
    aprime = (sys.r * d)[:, None] * sys.K
    x = np.linalg.solve(a, aprime)
    return complex(np.trace(x))


@dataclass
class RootReport:
    roots: list
    rectangle: tuple                 # (re_min, re_max, im_max)
    winding_total: int
    residual: float
    complete: bool
    rightmost: float = -math.inf

    def __post_init__(self):
        if self.roots:
            self.rightmost = max(z.real for z in self.roots)


def _boundary_winding(sys, rect, coarse=64, max_depth=14, zero_floor=1e-13):
    """Winding number of H along the rectangle boundary.

    Adaptive phase tracking: each segment is subdivided until the phase
    increment is below pi/2.  Returns (winding, ok); ok=False when |H| comes
    too close to zero on the boundary to trust the count.
    """
    re_min, re_max, im_max = rect
    corners = [complex(re_min, -im_max), complex(re_max, -im_max),
               complex(re_max, im_max), complex(re_min, im_max),
               complex(re_min, -im_max)]
    total = 0.0
    ok = True
    for a, b in zip(corners[:-1], corners[1:]):
        pts = [a + (b - a) * k / coarse for k in range(coarse + 1)]
        vals = [characteristic_value(sys, z) for z in pts]
        stack = list(zip(pts[:-1], pts[1:], vals[:-1], vals[1:],
                         [0] * coarse))
        while stack:
            z0, z1, h0, h1, depth = stack.pop()
            if abs(h0) < zero_floor or abs(h1) < zero_floor:
                ok = False
                continue
            dphi = cmath.phase(h1 / h0)
            if abs(dphi) <= math.pi / 2 or depth >= max_depth:
                if abs(dphi) > math.pi / 2:
                    ok = False
                total += dphi
                continue
            zm = 0.5 * (z0 + z1)
            hm = characteristic_value(sys, zm)
            stack.append((z0, zm, h0, hm, depth + 1))
            stack.append((zm, z1, hm, h1, depth + 1))
    return int(round(total / (2 * math.pi))), ok


def rightmost_roots(sys: DelaySystem, rect=None, grid=(80, 120),
                    polish_tol=1e-11, max_newton=60):
    """Characteristic roots inside a rectangle, certified by a winding count.

    ``rect`` is (re_min, re_max, im_max); the imaginary range is symmetric and
    only the upper half is scanned (roots of real systems come in conjugate
    pairs).  Every seed is polished by Newton using the analytic logarithmic
    derivative; the total count inside is cross-checked against the boundary
    winding number and the report is flagged incomplete on mismatch.
    """
    if rect is None:
        rmin = float(np.min(sys.r))
        gain = max(float(np.max(np.sum(np.abs(sys.K), axis=1))), 1e-9)
        rect = (-3.0 / rmin, max(1.0, math.log(gain) / rmin + 1.0), 40.0 / rmin)
    re_min, re_max, im_max = rect
    if re_max <= re_min or im_max <= 0:
        raise InputError("empty scan rectangle")
    nre, nim = grid
    res = np.linspace(re_min, re_max, nre)
    ims = np.linspace(0.0, im_max, nim)
    absh = np.empty((nre, nim))
    for i, re in enumerate(res):
        for j, im in enumerate(ims):
            absh[i, j] = abs(characteristic_value(sys, complex(re, im)))
    roots = []
    residual = 0.0
    # seeds: local minima of |H| on the half-grid
    for i in range(nre):
        for j in range(nim):
            v = absh[i, j]
            lo = max(i - 1, 0); hi = min(i + 2, nre)
            lj = max(j - 1, 0); hj = min(j + 2, nim)
            if v > absh[lo:hi, lj:hj].min():
                continue
            z = complex(res[i], ims[j])
            converged = False
            for _ in range(max_newton):
                h = characteristic_value(sys, z)
                if abs(h) < polish_tol:
                    converged = True
                    break
                ld = _char_logderiv(sys, z)
                if ld == 0:
                    break
                step = 1.0 / ld
                if abs(step) > (re_max - re_min):
                    break
                z -= step
            if not converged or abs(characteristic_value(sys, z)) > polish_tol:
                continue
            margin = 1e-9 * (1 + abs(z))
            if not (re_min - margin <= z.real <= re_max + margin
                    and -1e-9 <= z.imag <= im_max + margin):
                continue
            if any(abs(z - w) < 1e-7 * (1 + abs(w)) for w in roots):
                continue
            roots.append(z)
            residual = max(residual, abs(characteristic_value(sys, z)))
    full = []
    for z in sorted(roots, key=lambda w: (w.imag, w.real)):
        if abs(z.imag) < 1e-9:
            full.append(complex(z.real, 0.0))
        else:
            full.append(z)
            full.append(z.conjugate())
    winding, ok = _boundary_winding(sys, rect)
    complete = ok and winding == len(full)
    return RootReport(full, tuple(rect), winding, residual, complete)


@dataclass
class SweepReport:
    worst_real_part: float
    worst_delays: np.ndarray
    samples: list                     # (r_tilde, rightmost real part)
    rho0_value: float
    rho0_verdict: str
    all_complete: bool


def robustness_sweep(sys: DelaySystem, eps, samples=32, seed=0, rect=None,
                     grid=(60, 90)):
    """Worst rightmost characteristic root over delays perturbed in an
    inf-ball of radius ``eps``, compared against the phase-index verdict."""
    if eps >= np.min(sys.r):
        raise InputError("perturbation radius must stay below min(r)")
    rng = np.random.default_rng(seed)
    worst = -math.inf
    worst_r = sys.r.copy()
    rows = []
    all_complete = True
    for k in range(samples):
        if k == 0:
            rt = sys.r.copy()          # include the nominal system
        else:
            rt = sys.r + rng.uniform(-eps, eps, size=sys.n)
        pert = DelaySystem(sys.K, rt)
        rep = rightmost_roots(pert, rect=rect, grid=grid)
        all_complete = all_complete and rep.complete
        rows.append((rt, rep.rightmost))
        if rep.rightmost > worst:
            worst = rep.rightmost
            worst_r = rt
    r0 = spectral.rho_hat_zero(sys.K)
    verdict = ("robustly stable (rho0 < 1)" if r0.value < 1
               else "not delay-robust (rho0 >= 1)")
    return SweepReport(worst, worst_r, rows, r0.value, verdict, all_complete)


# --- state-dependent two-delay engine ----------------------------------------

def invert_time_map(eval_past, r2, s, tol=1e-13, max_iter=60):
    """Solve t + r2 + v2(t) = s for t (vectorized Newton with clipping).

    ``eval_past(times) -> (values, derivs)`` must cover every iterate; the
    map is monotone while |v2'| < 1, which the engine enforces separately.
    """
    s = np.asarray(s, dtype=float)
    t = s - r2
    for _ in range(max_iter):
        vals, ders = eval_past(t)
        f = t + r2 + vals[..., 1] - s
        fp = 1.0 + ders[..., 1]
        fp = np.where(np.abs(fp) < 0.25, np.sign(fp) * 0.25 + (fp == 0) * 0.25, fp)
        step = f / fp
        t = t - step
        if np.max(np.abs(f)) < tol:
            break
    return t


def simulate_state_dependent(G1, G2, r1, r2, trace, T, dt=None,
                             state_coupling=True):
    """Extend the trace of the state-dependent two-delay relation to [0, T].

    ``trace`` provides (value, derivative) on [0, r1] -- a SampledSignal with
    a derivative channel or any object with the same ``eval`` /
    ``eval_derivative`` interface.  New samples are produced frontier-block by
    frontier-block: each output time s solves t + r2 + v2(t) = s on the
    already-computed region, reads v1(s - r1), and applies the relation; the
    derivative channel carries the exact - v2'^2/(1+v2') correction.

    With ``state_coupling=False`` the second delay is frozen to r2 and the
    engine reduces to the linear two-delay recursion.
    """
    G1 = np.asarray(G1, dtype=float).reshape(2)
    G2 = np.asarray(G2, dtype=float).reshape(2)
    if not (r1 > r2 > 0):
        raise InputError("need r1 > r2 > 0")
    if getattr(trace, "derivatives", True) is None:
        raise InputError("trace must carry a derivative channel")
    t_lo = getattr(trace, "t0", 0.0)
    t_hi = getattr(trace, "t1", None)
    if t_lo > 1e-12 or (t_hi is not None and t_hi < r1 - 1e-12):
        raise InputError("trace must cover [0, r1]")
    if dt is None:
        dt = r2 / 256.0
    nout = int(math.floor(T / dt + 1e-9)) + 1
    times = dt * np.arange(nout)
    values = np.zeros((nout, 2))
    derivs = np.zeros((nout, 2))
    n_trace = int(np.searchsorted(times, r1, side="right"))
    values[:n_trace] = trace.eval(times[:n_trace])
    derivs[:n_trace] = trace.eval_derivative(times[:n_trace])
    v2max = float(np.max(np.abs(values[:n_trace, 1]))) if n_trace else 0.0
    if v2max >= r2 / 2:
        raise DynamicsError("sup|v2| >= r2/2 on the initial trace")

    def eval_past(ts, frontier):
        ts = np.asarray(ts, dtype=float)
        vals = np.empty(ts.shape + (2,))
        ders = np.empty_like(vals)
        in_trace = ts <= r1
        if np.any(ts < -1e-12):
            raise InputError("state-dependent read below available history")
        if np.any(in_trace):
            tt = np.clip(ts[in_trace], 0.0, r1)
            vals[in_trace] = trace.eval(tt)
            ders[in_trace] = trace.eval_derivative(tt)
        rest = ~in_trace
        if np.any(rest):
            computed = SampledSignal(0.0, dt, values[:frontier], derivs[:frontier])
            vals[rest] = computed.eval(ts[rest])
            ders[rest] = computed.eval_derivative(ts[rest])
        return vals, ders

    block = max(1, int(math.floor(r2 / (2 * dt))))
    i = n_trace
    while i < nout:
        j = min(i + block, nout)
        s = times[i:j]
        if state_coupling:
            tstar = invert_time_map(lambda ts: eval_past(ts, i), r2, s)
        else:
            tstar = s - r2
        v2, d2 = eval_past(tstar, i)
        v1, d1 = eval_past(s - r1, i)
        if np.max(np.abs(d2[:, 1])) >= 0.5:
            raise DynamicsError("|v2'| >= 1/2: monotone time map lost")
        if np.max(np.abs(v2[:, 1])) >= r2 / 2:
            raise DynamicsError("sup|v2| >= r2/2: delay left its domain")
        values[i:j] = np.outer(v1[:, 0], G1) + np.outer(v2[:, 1], G2)
        dd = d2[:, 1]
        if state_coupling:
            dcorr = dd - dd * dd / (1.0 + dd)
        else:
            dcorr = dd
        derivs[i:j] = np.outer(d1[:, 0], G1) + np.outer(dcorr, G2)
        i = j
    return SampledSignal(0.0, dt, values, derivs)


def apply_state_relation(child1, child2, G1, G2, order=1):
    """Pointwise jet propagation of the two-delay relation (type-generic).

    ``child1`` is the jet (v, v', [v'']) at s - r1, ``child2`` the jet at the
    preimage t of s under the delayed time map; each jet entry is a 2-sequence
    (works with floats or mpmath.mpf).  Returns the jet at s up to ``order``.

    value:  v(s)   = v1(s-r1) G1 + v2(t) G2
    deriv:  v'(s)  = v1'(s-r1) G1 + (v2' - v2'^2/(1+v2')) G2
    second: v''(s) = v1''(s-r1) G1 + v2''/(1+v2')^3 G2
    """
    one = child1[0][0] * 0 + 1  # multiplicative unit in the operand type
    v = tuple(child1[0][0] * G1[k] + child2[0][1] * G2[k] for k in range(2))
    out = [v]
    if order >= 1:
        d2 = child2[1][1]
        corr = d2 - d2 * d2 / (one + d2)
        dv = tuple(child1[1][0] * G1[k] + corr * G2[k] for k in range(2))
        out.append(dv)
    if order >= 2:
        d2 = child2[1][1]
        dd2 = child2[2][1]
        denom = (one + d2) ** 3
        ddv = tuple(child1[2][0] * G1[k] + (dd2 / denom) * G2[k]
                    for k in range(2))
        out.append(ddv)
    return tuple(out)
