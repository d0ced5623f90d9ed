"""Induced p-norms, spectral radii and the scaled stability indices.

The three indices computed here:

* ``rho_hat_zero``  -- max over phase vectors theta of rho(diag(e^{i theta}) M),
  a maximisation, so the returned value is a certified *lower* bound;
* ``rho_hat_p``     -- inf over positive diagonal scalings Delta of
  ||Delta M Delta^{-1}||_p, a minimisation, so the returned value is an
  *upper* bound;
* ``margin_report`` -- bundles both with per-norm stability verdicts.

All randomized searches take an explicit seed (default 0) and are
deterministic given it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .errors import BudgetError, InputError, NumericError

_LOG_SCALE_BOUND = 30.0  # |log d_i| beyond this counts as "infimum at the boundary"


def _as_square_matrix(m):
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InputError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("matrix has non-finite entries")
    return a


def spectral_radius(m, max_sweeps=80):
    """Largest eigenvalue modulus of a dense (real or complex) matrix, n <= 64.

    Dense eigensolve via in-repo Hessenberg reduction + shifted QR.
    """
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("matrix has non-finite entries")
    if a.shape[0] > 64:
        raise InputError("dense eigensolve is limited to n <= 64")
    try:
        return _kernels.spectral_radius(a, max_sweeps)
    except ValueError as exc:
        raise NumericError(f"eigenvalue iteration failed: {exc}") from exc


def eigenvalues(m, max_sweeps=80):
    """All eigenvalues (unordered) via the same in-repo QR iteration."""
    a = np.asarray(m, dtype=complex)
    if a.shape[0] > 64:
        raise InputError("dense eigensolve is limited to n <= 64")
    try:
        return _kernels.eigvals(a, max_sweeps)
    except ValueError as exc:
        raise NumericError(f"eigenvalue iteration failed: {exc}") from exc


def _sym_eig_max(g):
    """Largest eigenvalue of a symmetric matrix; closed forms for n <= 3,
    the in-repo QR iteration beyond."""
    n = g.shape[0]
    if n == 1:
        return float(g[0, 0])
    if n == 2:
        half = 0.5 * (g[0, 0] + g[1, 1])
        disc = math.hypot(0.5 * (g[0, 0] - g[1, 1]), g[0, 1])
        return half + disc
    if n == 3:
        p1 = g[0, 1] ** 2 + g[0, 2] ** 2 + g[1, 2] ** 2
        q = (g[0, 0] + g[1, 1] + g[2, 2]) / 3.0
        if p1 == 0.0:
            return float(max(g[0, 0], g[1, 1], g[2, 2]))
        p2 = ((g[0, 0] - q) ** 2 + (g[1, 1] - q) ** 2 + (g[2, 2] - q) ** 2
              + 2 * p1)
        pp = math.sqrt(p2 / 6.0)
        b = (g - q * np.eye(3)) / pp
        detb = (b[0, 0] * (b[1, 1] * b[2, 2] - b[1, 2] * b[2, 1])
                - b[0, 1] * (b[1, 0] * b[2, 2] - b[1, 2] * b[2, 0])
                + b[0, 2] * (b[1, 0] * b[2, 1] - b[1, 1] * b[2, 0]))
        r = min(1.0, max(-1.0, detb / 2.0))
        phi = math.acos(r) / 3.0
        return q + 2.0 * pp * math.cos(phi)
    return spectral_radius(g)


def _dual_sign_power(y, p):
    # componentwise |y|^(p-1) sign(y), the duality map for the p-norm
    return np.sign(y) * np.abs(y) ** (p - 1)


def _pnorm(x, p):
    if p == math.inf:
        return float(np.max(np.abs(x)))
    return float(np.sum(np.abs(x) ** p) ** (1.0 / p))


def induced_norm(m, p, seed=0, n_starts=32, iters=200):
    """Operator norm ||M||_p = max_{||x||_p = 1} ||Mx||_p.

    p in {1, 2, inf} uses the closed forms (max column sum, largest singular
    value, max row sum).  Other p >= 1 runs a dual-map power ascent from
    ``n_starts`` random unit vectors; the result is a certified lower bound
    that is in practice tight for these small dense matrices.
    """
    a = _as_square_matrix(m)
    p = float(p)
    if p < 1:
        raise InputError("p-norms need p >= 1")
    if p == 1:
        return float(np.max(np.sum(np.abs(a), axis=0)))
    if p == math.inf:
        return float(np.max(np.sum(np.abs(a), axis=1)))
    if p == 2:
        gram = a.T @ a
        lam = _sym_eig_max(gram)
        return math.sqrt(max(lam, 0.0))
    # general p: Boyd-style power ascent on the unit p-sphere
    q = p / (p - 1.0)
    rng = np.random.default_rng(seed)
    n = a.shape[0]
    best = 0.0
    for _ in range(n_starts):
        x = rng.standard_normal(n)
        x /= _pnorm(x, p)
        val = _pnorm(a @ x, p)
        for _ in range(iters):
            y = a @ x
            ny = _pnorm(y, p)
            if ny == 0.0:
                break
            z = a.T @ _dual_sign_power(y / ny, p)
            nz = _pnorm(z, q)
            if nz <= val * (1.0 + 1e-14):
                break
            x = _dual_sign_power(z / nz, q)
            x /= _pnorm(x, p)
            new = _pnorm(a @ x, p)
            if new <= val * (1.0 + 1e-14):
                break
            val = new
        best = max(best, val)
    return best


@dataclass
class RhoOptions:
    """Budget and tolerances for the rho_hat optimizers."""

    seed: int = 0
    n_starts: int | None = None   # None -> lattice + Perron start
    lattice_span: float = 3.0
    maxiter: int | None = None
    xatol: float = 1e-10
    fatol: float = 1e-13
    polish: bool = True


@dataclass
class RhoResult:
    value: float
    witness: np.ndarray            # positive diagonal of Delta (or phases for rho0)
    iterations: int
    boundary: bool = False
    p: float | str = 2


def _scaled(a, logd):
    t = np.concatenate(([0.0], np.clip(logd, -_LOG_SCALE_BOUND, _LOG_SCALE_BOUND)))
    return a * np.exp(t[:, None] - t[None, :])


def _perron_log_scaling(a):
    """log-scaling seed from the Perron vector of |M| (optimal for p=1, inf)."""
    absm = np.abs(a) + 1e-300
    n = a.shape[0]
    w = np.ones(n)
    for _ in range(200):
        w_new = absm @ w + 1e-30 * np.sum(w)
        w_new /= np.max(w_new)
        if np.max(np.abs(w_new - w)) < 1e-15:
            w = w_new
            break
        w = w_new
    w = np.maximum(w, 1e-30)
    t = -np.log(w)
    return t[1:] - t[0]


def _lattice_starts(dim, span, rng, cap=32):
    if dim == 0:
        return [np.zeros(0)]
    per_axis = 5 if dim <= 2 else 3
    if per_axis ** dim <= cap:
        axes = [np.linspace(-span, span, per_axis)] * dim
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        return list(pts)
    return list(rng.uniform(-span, span, size=(cap, dim)))


def rho_hat_p(m, p, opts: RhoOptions | None = None):
    """inf over positive diagonal Delta of ||Delta M Delta^{-1}||_p.

    Multi-start Nelder-Mead on the log-parametrized scaling (gauge d_1 = 0),
    followed by a polish run from the best start.  Returns a RhoResult whose
    ``value`` is an upper bound on the infimum; ``witness`` reproduces it
    exactly when fed back through ``induced_norm``.
    """
    a = _as_square_matrix(m)
    opts = opts or RhoOptions()
    n = a.shape[0]
    p = float(p)
    if n == 1:
        return RhoResult(abs(a[0, 0]), np.ones(1), 0, False, p)
    dim = n - 1
    evals = 0

    def objective(d):
        nonlocal evals
        evals += 1
        return induced_norm(_scaled(a, d), p, seed=opts.seed, n_starts=4, iters=60)

    rng = np.random.default_rng(opts.seed)
    starts = _lattice_starts(dim, opts.lattice_span, rng,
                             cap=opts.n_starts or 32)
    starts.append(_perron_log_scaling(a))
    if opts.n_starts is not None:
        starts = starts[: opts.n_starts + 1]
    maxiter = opts.maxiter or 400 * dim
    best_d = np.zeros(dim)
    best_val = objective(best_d)
    for s in starts:
        res = minimize(objective, np.asarray(s, dtype=float), method="Nelder-Mead",
                       options={"maxiter": maxiter, "xatol": 1e-7, "fatol": 1e-10})
        if res.fun < best_val:
            best_val = float(res.fun)
            best_d = np.asarray(res.x)
    if opts.polish:
        res = minimize(objective, best_d, method="Nelder-Mead",
                       options={"maxiter": 4 * maxiter,
                                "xatol": opts.xatol, "fatol": opts.fatol})
        if res.fun <= best_val:
            best_val = float(res.fun)
            best_d = np.asarray(res.x)
    best_d = np.clip(best_d, -_LOG_SCALE_BOUND, _LOG_SCALE_BOUND)
    boundary = bool(np.any(np.abs(best_d) >= _LOG_SCALE_BOUND - 1e-2))
    witness = np.exp(np.concatenate(([0.0], best_d)))
    # re-evaluate at the witness so the reported value round-trips exactly
    value = induced_norm(np.diag(witness) @ a @ np.diag(1.0 / witness), p,
                         seed=opts.seed)
    return RhoResult(min(value, best_val) if p in (1.0, 2.0, math.inf) else value,
                     witness, evals, boundary, p)


def rho_hat_zero(m, grid_per_axis=64, opts: RhoOptions | None = None,
                 allow_large=False):
    """max over theta of rho(diag(e^{i theta_1..n}) M) with theta_1 = 0.

    Coarse grid over [0, 2pi)^{n-1} followed by simplex ascent from the best
    grid point.  The value is a lower bound and is non-decreasing under grid
    refinement.
    """
    a = _as_square_matrix(m)
    opts = opts or RhoOptions()
    n = a.shape[0]
    if n == 1:
        return RhoResult(abs(a[0, 0]), np.zeros(1), 1, False, "zero")
    dim = n - 1
    if n > 6 and not allow_large and grid_per_axis ** dim > 64 ** 2 * 16:
        raise BudgetError(
            f"phase grid {grid_per_axis}^{dim} is too large for n={n}; "
            "pass a coarser grid_per_axis or allow_large=True")
    axes = [np.linspace(0.0, 2 * math.pi, grid_per_axis, endpoint=False)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([g.ravel() for g in mesh], axis=1)
    ac = a.astype(complex)
    vals = _kernels.phase_grid_spectral_radius(ac, grid)
    ibest = int(np.argmax(vals))
    best_theta = grid[ibest]
    best_val = float(vals[ibest])
    evals = len(grid)

    def neg_rho(th):
        nonlocal evals
        evals += 1
        phases = np.exp(1j * np.concatenate(([0.0], th)))
        return -spectral_radius(phases[:, None] * ac)

    res = minimize(neg_rho, best_theta, method="Nelder-Mead",
                   options={"maxiter": 300 * dim, "xatol": 1e-12, "fatol": 1e-14})
    if -res.fun > best_val:
        best_val = float(-res.fun)
        best_theta = np.asarray(res.x)
    theta = np.concatenate(([0.0], np.mod(best_theta, 2 * math.pi)))
    return RhoResult(best_val, theta, evals, False, "zero")


def _verdict(value, tol):
    if value < 1.0 - tol:
        return "stable"
    if value > 1.0 + tol:
        return "unstable"
    return "inconclusive-within-tolerance"


@dataclass
class MarginReport:
    spectral_radius: float
    rho0_lower: float
    rho0_witness: np.ndarray
    rhoP: dict = field(default_factory=dict)   # p -> RhoResult
    flags: dict = field(default_factory=dict)  # criterion name -> verdict


def margin_report(m, ps=(2, math.inf), grid_per_axis=64,
                  opts: RhoOptions | None = None, tol=1e-6):
    """Stability margins of a boundary gain matrix under every criterion.

    ``rho0_lower`` is the sampled lower bound for the phase index, the
    ``rhoP`` entries are scaled-norm upper bounds, and ``flags`` holds the
    per-criterion verdicts at tolerance ``tol``.
    """
    a = _as_square_matrix(m)
    opts = opts or RhoOptions()
    rho = spectral_radius(a)
    r0 = rho_hat_zero(a, grid_per_axis, opts)
    report = MarginReport(rho, r0.value, r0.witness)
    report.flags["rho0 (delay-robust)"] = _verdict(r0.value, tol)
    for p in ps:
        rp = rho_hat_p(a, p, opts)
        report.rhoP[float(p)] = rp
        report.flags[f"rho_{p} (scaled norm)"] = _verdict(rp.value, tol)
    return report


# --- matrix text format (fields: n, entries row-major) ----------------------

def read_matrix(path):
    """Read a matrix from the plain-text format ``n <int>`` + row-major entries."""
    n = None
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.replace("=", " ").split()
            if tokens[0] == "n":
                n = int(tokens[1])
                entries.extend(float(t) for t in tokens[2:])
            else:
                entries.extend(float(t) for t in tokens)
    if n is None:
        raise InputError(f"{path}: missing 'n' field")
    if len(entries) != n * n:
        raise InputError(f"{path}: expected {n * n} entries, found {len(entries)}")
    return np.array(entries).reshape(n, n)


def write_matrix(path, m):
    a = _as_square_matrix(m)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n {a.shape[0]}\n")
        for row in a:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")
