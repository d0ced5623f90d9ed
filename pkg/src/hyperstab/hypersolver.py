"""Diagonal hyperbolic systems with boundary feedback: upwind and
characteristics integrators, discrete C^m / W^{k,p} norms, compatibility
checks, decay-rate fits and a time-varying-coefficient variant.

Scope: diagonal F with per-component speeds lambda_i depending only on u_i
(this covers the speed 1/(r2 + u2)); speeds are positive, so x=0 is the
inflow boundary closed by u(t,0) = G(u(t,1)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DynamicsError, InputError
from .signals import SampledSignal


@dataclass
class HyperbolicSystem:
    speeds: list                        # lambda_i: scalar/array u_i -> speed
    boundary: object                    # G: R^n -> R^n (callable or matrix)
    n: int
    boundary_jacobian: object = None    # u -> (n, n); defaults to FD of G
    domain_radius: float = math.inf     # admissible |u_i| ball around 0

    def __post_init__(self):
        if len(self.speeds) != self.n:
            raise InputError("one speed function per component required")
        lam0 = np.array([float(s(0.0)) for s in self.speeds])
        if np.any(lam0 <= 0):
            raise InputError("speeds at 0 must be positive")
        if len(np.unique(np.round(lam0, 12))) != self.n:
            raise InputError("speeds at 0 must be distinct")
        g0 = np.asarray(self.apply_boundary(np.zeros(self.n)), dtype=float)
        if np.max(np.abs(g0)) > 1e-12:
            raise InputError("boundary map must satisfy G(0) = 0")

    def apply_boundary(self, u):
        if callable(self.boundary):
            return np.asarray(self.boundary(u), dtype=float)
        return np.asarray(self.boundary, dtype=float) @ u

    def boundary_jac(self, u):
        if self.boundary_jacobian is not None:
            return np.asarray(self.boundary_jacobian(u), dtype=float)
        if not callable(self.boundary):
            return np.asarray(self.boundary, dtype=float)
        h = 1e-7
        u = np.asarray(u, dtype=float)
        cols = []
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = h
            cols.append((self.apply_boundary(u + e) - self.apply_boundary(u - e))
                        / (2 * h))
        return np.column_stack(cols)

    def speed_values(self, u):
        """Speeds per component on an (n, npoints) state array."""
        out = np.empty_like(u)
        for i, s in enumerate(self.speeds):
            if np.any(np.abs(u[i]) >= self.domain_radius):
                raise DynamicsError(
                    f"component {i + 1} left the admissible ball "
                    f"|u| < {self.domain_radius}")
            out[i] = s(u[i])
        if np.any(out <= 0):
            raise DynamicsError("a characteristic speed lost positivity")
        return out

    @classmethod
    def linear(cls, speeds, K):
        lam = np.atleast_1d(np.asarray(speeds, dtype=float))
        K = np.atleast_2d(np.asarray(K, dtype=float))
        funcs = [(lambda u, c=c: c * np.ones_like(np.asarray(u, dtype=float)))
                 for c in lam]
        return cls(funcs, K, len(lam))


@dataclass
class GridState:
    x: np.ndarray            # m+1 uniform nodes on [0, 1]
    u: np.ndarray            # (n, m+1)
    t: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        if self.u.shape[1] != self.x.size:
            raise InputError("u must have one column per grid node")
        if not np.all(np.isfinite(self.u)):
            raise InputError("non-finite grid values")

    @property
    def cells(self):
        return self.x.size - 1

    @property
    def spacing(self):
        return self.x[1] - self.x[0]

    @classmethod
    def from_function(cls, fun, cells, n, t=0.0):
        x = np.linspace(0.0, 1.0, cells + 1)
        u = np.atleast_2d(np.asarray(fun(x), dtype=float))
        if u.shape != (n, cells + 1):
            raise InputError(f"initial-data function must return ({n},{cells + 1})")
        return cls(x, u, t)

    def to_csv(self, path):
        header = ["x"] + [f"u{i + 1}" for i in range(self.u.shape[0])]
        np.savetxt(path, np.column_stack([self.x, *self.u]), delimiter=",",
                   header=",".join(header), comments="", fmt="%.17g")


def _one_sided_derivatives(u, h):
    """First derivatives: 2nd-order central interior, one-sided at endpoints."""
    du = np.empty_like(u)
    du[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2 * h)
    du[:, 0] = (-3 * u[:, 0] + 4 * u[:, 1] - u[:, 2]) / (2 * h)
    du[:, -1] = (3 * u[:, -1] - 4 * u[:, -2] + u[:, -3]) / (2 * h)
    return du


def _second_differences(u, h):
    d2 = np.empty_like(u)
    d2[:, 1:-1] = (u[:, 2:] - 2 * u[:, 1:-1] + u[:, :-2]) / (h * h)
    d2[:, 0] = (2 * u[:, 0] - 5 * u[:, 1] + 4 * u[:, 2] - u[:, 3]) / (h * h)
    d2[:, -1] = (2 * u[:, -1] - 5 * u[:, -2] + 4 * u[:, -3] - u[:, -4]) / (h * h)
    return d2


def check_compatibility(sys: HyperbolicSystem, state: GridState, order=1,
                        tol=1e-8):
    """Residuals of the corner compatibility conditions at (t, x) = (0, 0).

    Order 0: u(0) - G(u(1)).  Order 1: F(u(0)) u_x(0) - G'(u(1)) F(u(1)) u_x(1)
    with one-sided second-order endpoint derivatives.  Orders >= 2 are out of
    scope.
    """
    if order not in (0, 1):
        raise InputError("compatibility orders above 1 are unsupported")
    u = state.u
    res = {}
    g = sys.apply_boundary(u[:, -1])
    res[0] = float(np.max(np.abs(u[:, 0] - g)))
    if order >= 1:
        du = _one_sided_derivatives(u, state.spacing)
        lam_l = sys.speed_values(u[:, :1])[:, 0]
        lam_r = sys.speed_values(u[:, -1:])[:, 0]
        lhs = lam_l * du[:, 0]
        rhs = sys.boundary_jac(u[:, -1]) @ (lam_r * du[:, -1])
        res[1] = float(np.max(np.abs(lhs - rhs)))
    passed = max(res.values()) <= tol
    return {"residuals": res, "passed": passed, "tol": tol}


@dataclass
class Trajectory:
    times: np.ndarray
    snapshots: list
    norm_series: dict = field(default_factory=dict)
    trace: SampledSignal | None = None        # u(t, 0) at every step
    meta: dict = field(default_factory=dict)

    def norms_to_csv(self, path):
        names = sorted(self.norm_series)
        cols = [self.times] + [np.asarray(self.norm_series[k]) for k in names]
        np.savetxt(path, np.column_stack(cols), delimiter=",",
                   header=",".join(["t"] + names), comments="", fmt="%.17g")


def discrete_norms(state: GridState, requests=("c0", "c1")):
    """Discrete C^0 / C^1 / W^{1,p} / W^{2,p} norms of a grid state.

    The vector norm across components is the max; W^{k,p} integrals use the
    composite trapezoid rule over the value / first / second difference
    channels.  Requests look like "c0", "c1", "w2p:2", "w2p:inf", "w1p:1".
    """
    if state.cells < 4:
        raise InputError("need at least 4 cells for second differences")
    h = state.spacing
    u = state.u
    f0 = np.max(np.abs(u), axis=0)
    f1 = np.max(np.abs(_one_sided_derivatives(u, h)), axis=0)
    f2 = np.max(np.abs(_second_differences(u, h)), axis=0)
    out = {}
    for req in requests:
        key = req.lower()
        if key == "c0":
            out[req] = float(f0.max())
        elif key == "c1":
            out[req] = float(max(f0.max(), f1.max()))
        elif key.startswith(("w1p:", "w2p:")):
            channels = [f0, f1] if key.startswith("w1p") else [f0, f1, f2]
            parg = key.split(":", 1)[1]
            if parg in ("inf", "oo"):
                out[req] = float(max(c.max() for c in channels))
            else:
                p = float(parg)
                total = sum(np.trapezoid(c ** p, dx=h) for c in channels)
                out[req] = float(total ** (1.0 / p))
        else:
            raise InputError(f"unknown norm request {req!r}")
    return out


def _speed_of(sys, i, values):
    """Speed of one component on a value array, with its domain check."""
    if np.any(np.abs(values) >= sys.domain_radius):
        raise DynamicsError(
            f"component {i + 1} left the admissible ball "
            f"|u| < {sys.domain_radius}")
    out = np.asarray(sys.speeds[i](values), dtype=float)
    if np.any(out <= 0):
        raise DynamicsError("a characteristic speed lost positivity")
    return out


def _interp_columns(u, pos):
    """Cubic Lagrange interpolation of each row of u at fractional node
    positions ``pos`` (same length as the row)."""
    npts = u.shape[1]
    i = np.clip(np.floor(pos).astype(int), 0, npts - 2)
    f = pos - i
    base = np.clip(i - 1, 0, npts - 4)
    t = (i - base) + f
    y0 = u[:, base]; y1 = u[:, base + 1]; y2 = u[:, base + 2]; y3 = u[:, base + 3]
    c0 = -(t - 1) * (t - 2) * (t - 3) / 6.0
    c1 = t * (t - 2) * (t - 3) / 2.0
    c2 = -t * (t - 1) * (t - 3) / 2.0
    c3 = t * (t - 1) * (t - 2) / 6.0
    return c0 * y0 + c1 * y1 + c2 * y2 + c3 * y3


def solve_forward(sys: HyperbolicSystem, u0: GridState, T,
                  scheme="characteristics", dt=None, cfl=None,
                  snapshots=120, norms=("c0", "c1"), c1_ceiling=1e3,
                  compat="check", trace_dt=None):
    """Integrate u_t + F(u) u_x = 0 with u(t,0) = G(u(t,1)) up to time T.

    upwind: first-order CIR with the boundary row set from G at the new time.
    characteristics: per-component exact tracing (u_i constant along
    dx/dt = lambda_i(u_i)) with cubic foot-point interpolation; the implicit
    foot value is resolved by a short fixed-point loop.  The scheme is
    unconditionally stable, so ``dt`` may exceed the grid transit step as
    long as it stays below the domain transit time; larger steps mean fewer
    re-interpolations of the field.  The boundary trace is recorded on its
    own grid of spacing ``trace_dt`` (default: the step), filled inside each
    step by tracing back to the previous field row, and feet that cross x=0
    mid-step read it at the crossing time.

    Records snapshots, the requested norm series, and the boundary trace.
    """
    if scheme not in ("upwind", "characteristics"):
        raise ConfigError(f"unknown scheme {scheme!r}")
    u = u0.u.copy()
    h = u0.spacing
    lam = sys.speed_values(u)
    lam_max = float(lam.max())
    if cfl is None:
        cfl = 0.9 if scheme == "upwind" else 1.0
    if dt is None:
        dt = cfl * h / lam_max
    nsteps = max(1, int(math.ceil(T / dt - 1e-12)))
    dt = T / nsteps
    if scheme == "upwind" and dt * lam_max > h * (1 + 1e-12):
        raise ConfigError(
            f"CFL violation: dt*max_speed = {dt * lam_max:.3e} > spacing {h:.3e}")
    if compat == "check":
        rep = check_compatibility(sys, u0, order=1,
                                  tol=max(1e-6, 5 * h * (1 + np.max(np.abs(u)))))
        if not rep["passed"]:
            raise ConfigError(
                f"initial data grossly violates compatibility: {rep['residuals']}")
    snap_every = max(1, nsteps // max(1, snapshots))
    x = u0.x
    xpos = x / h
    # components with state-independent speed trace in one interpolation
    probe = np.linspace(-1e-3, 1e-3, 5)
    const_speed = []
    lam0_const = []
    for i in range(sys.n):
        vals = np.asarray(sys.speeds[i](probe), dtype=float)
        const_speed.append(bool(np.all(vals == vals.flat[0])))
        lam0_const.append(float(np.atleast_1d(vals).flat[0]))
    if scheme == "characteristics" and dt * lam_max > 0.95:
        raise ConfigError(
            "characteristics step exceeds the domain transit time")
    n_sub = 1
    if trace_dt is not None and trace_dt < dt:
        n_sub = max(1, int(round(dt / trace_dt)))
    dt_tr = dt / n_sub
    traj = Trajectory(times=np.empty(0), snapshots=[], meta={
        "scheme": scheme, "dt": dt, "cells": u0.cells, "cfl": cfl,
        "trace_dt": dt_tr})
    snap_times = []
    norm_rows = []
    trace_vals = np.empty((nsteps * n_sub + 1, sys.n))
    trace_vals[0] = u[:, 0]

    def snap(k, t, state_u):
        gs = GridState(x, state_u.copy(), t)
        traj.snapshots.append(gs)
        snap_times.append(t)
        norm_rows.append(discrete_norms(gs, norms) if norms else {})

    snap(0, 0.0, u)
    init_c1 = discrete_norms(u0, ("c1",))["c1"]

    def boundary_cols(vals):
        """Apply G to every column of an (n, m) array."""
        if not callable(sys.boundary):
            return np.asarray(sys.boundary, dtype=float) @ vals
        return np.column_stack([sys.apply_boundary(vals[:, j])
                                for j in range(vals.shape[1])])

    def feet_of(i, cols, row, tau):
        """Fractional foot positions of component i at node columns ``cols``
        traced back over a lag ``tau`` (scalar or per-column array)."""
        if const_speed[i]:
            return xpos[cols] - lam0_const[i] * tau / h
        v = row[i, cols].copy()
        for _ in range(3):
            feet = np.maximum(xpos[cols] - _speed_of(sys, i, v) * tau / h, 0.0)
            v = _interp_columns(row[i:i + 1], feet)[0]
        return xpos[cols] - _speed_of(sys, i, v) * tau / h

    for k in range(1, nsteps + 1):
        if scheme == "upwind":
            lam = sys.speed_values(u)
            nu = lam * dt / h
            if np.max(nu) > 1 + 1e-12:
                raise DynamicsError("speed grew beyond the CFL budget")
            unew = u.copy()
            unew[:, 1:] = u[:, 1:] - nu[:, 1:] * (u[:, 1:] - u[:, :-1])
            unew[:, 0] = sys.apply_boundary(unew[:, -1])
            trace_vals[k] = unew[:, 0]
        else:
            # semi-Lagrangian step.  The boundary trace segment is filled on
            # the fine sub-grid first, by tracing (tau, x=1) back into the
            # previous field row and applying G; then the interior is
            # traced, feet that cross x=0 reading the recorded trace at the
            # crossing time.
            unew = np.empty_like(u)
            t_old = (k - 1) * dt
            t_new = k * dt
            last = u.shape[1] - 1
            taus = t_old + dt_tr * np.arange(1, n_sub + 1)
            exit_vals = np.empty((sys.n, n_sub))
            lastcol = np.full(n_sub, last, dtype=int)
            for i in range(sys.n):
                feet = feet_of(i, lastcol, u, taus - t_old)
                if np.any(feet < 0):
                    raise DynamicsError(
                        "time step exceeds the domain transit time")
                exit_vals[i] = _interp_columns(u[i:i + 1], feet)[0]
            rows = slice((k - 1) * n_sub + 1, k * n_sub + 1)
            trace_vals[rows] = boundary_cols(exit_vals).T
            unew[:, -1] = exit_vals[:, -1]
            unew[:, 0] = trace_vals[k * n_sub]
            bt = SampledSignal(0.0, dt_tr, trace_vals[:k * n_sub + 1])
            cols = np.arange(1, last)
            for i in range(sys.n):
                feet = feet_of(i, cols, u, dt)
                inside = feet >= 0.0
                vals = np.empty(feet.size)
                if np.any(inside):
                    vals[inside] = _interp_columns(u[i:i + 1], feet[inside])[0]
                if np.any(~inside):
                    # the characteristic crossed x=0 during the step at time
                    # t* = t_new - x_j / lambda_i(v); v is constant along it
                    xj = x[cols][~inside]
                    tstar = np.full(xj.size, t_old)
                    for _ in range(12):
                        vb = bt.eval(np.clip(tstar, 0.0, bt.t1))[:, i]
                        lam_b = _speed_of(sys, i, vb)
                        tnext = t_new - xj / lam_b
                        done = np.max(np.abs(tnext - tstar)) < 1e-14 * max(T, 1.0)
                        tstar = tnext
                        if done:
                            break
                    vals[~inside] = bt.eval(np.clip(tstar, 0.0, bt.t1))[:, i]
                unew[i, 1:-1] = vals
        u = unew
        t = k * dt
        if k % snap_every == 0 or k == nsteps:
            snap(k, t, u)
            if init_c1 > 0:
                c1 = discrete_norms(traj.snapshots[-1], ("c1",))["c1"]
                if c1 > c1_ceiling * init_c1:
                    raise DynamicsError(
                        f"loss of regularity: discrete C1 norm {c1:.3e} exceeded "
                        f"{c1_ceiling:.0e} x initial at t = {t:.4f}")
    traj.times = np.array(snap_times)
    for key in (norm_rows[0] if norm_rows else {}):
        traj.norm_series[key] = np.array([row[key] for row in norm_rows])
    traj.trace = SampledSignal(0.0, dt_tr, trace_vals)
    return traj


@dataclass
class DecayFit:
    nu: float
    prefactor: float
    residual: float
    window: tuple
    trimmed: bool = False


def estimate_decay(traj: Trajectory, norm_id, window=None):
    """Least-squares exponential fit  norm(t) ~ C exp(-nu t)  on a window."""
    if norm_id not in traj.norm_series:
        raise InputError(f"trajectory has no norm series {norm_id!r}")
    t = np.asarray(traj.times, dtype=float)
    y = np.asarray(traj.norm_series[norm_id], dtype=float)
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
        t, y = t[mask], y[mask]
    trimmed = False
    pos = y > 0
    if not np.all(pos):
        trimmed = True
        first_bad = int(np.argmin(pos))
        t, y = t[:first_bad], y[:first_bad]
    if len(t) < 8:
        raise InputError("need at least 8 positive-norm snapshots in the window")
    logy = np.log(y)
    coef = np.polyfit(t, logy, 1)
    fit = np.polyval(coef, t)
    residual = float(np.sqrt(np.mean((logy - fit) ** 2)))
    return DecayFit(nu=float(-coef[0]), prefactor=float(np.exp(coef[1])),
                    residual=residual, window=(float(t[0]), float(t[-1])),
                    trimmed=trimmed)


@dataclass
class TimeVaryingLinearSystem:
    A: object          # (t, x array) -> (n, len(x)) positive diagonal speeds
    K: object          # t -> (n, n) boundary gain
    n: int
    Q: object = None   # (t, x array, v (n, len(x))) -> source (n, len(x))


def _check_tv_hypotheses(sysTV, T, p, nt=25, nx=21):
    ts = np.linspace(0.0, T, nt)
    xs = np.linspace(0.0, 1.0, nx)
    from .spectral import induced_norm
    a_vals = np.stack([np.asarray(sysTV.A(t, xs), dtype=float) for t in ts])
    lam_ref = a_vals.mean(axis=(0, 2))
    dev0 = np.max(np.abs(a_vals - lam_ref[None, :, None]))
    dtau = ts[1] - ts[0]
    dev_t = np.max(np.abs(np.diff(a_vals, axis=0))) / dtau
    dev_x = np.max(np.abs(np.diff(a_vals, axis=2))) / (xs[1] - xs[0])
    k_hat = max(induced_norm(np.asarray(sysTV.K(t), dtype=float), p) for t in ts)
    kp = max(induced_norm(
        (np.asarray(sysTV.K(t + 1e-6), dtype=float)
         - np.asarray(sysTV.K(t - 1e-6), dtype=float)) / 2e-6, p)
        for t in ts[1:-1])
    q_bound = 0.0
    if sysTV.Q is not None:
        rng = np.random.default_rng(0)
        for t in ts[::5]:
            v = rng.standard_normal((sysTV.n, nx))
            v /= np.max(np.abs(v))
            q_bound = max(q_bound, float(np.max(np.abs(
                np.asarray(sysTV.Q(t, xs, v), dtype=float)))))
    return {
        "K_hat": float(k_hat),
        "K_prime_sup": float(kp),
        "A_deviation_C1": float(dev0 + dev_t + dev_x),
        "A_reference": lam_ref,
        "Q_bound": q_bound,
        "met": bool(k_hat < 1.0),
    }


def simulate_timevarying(sysTV: TimeVaryingLinearSystem, v0: GridState, T,
                         p=2, dt=None, cfl=0.9, snapshots=200):
    """Upwind integration of v_t + A(t,x) v_x = Q(t,x)(v,v) with boundary row
    v(t,0) = K(t) v(t,1); returns the trajectory with its W^{1,p} series and
    a decay verdict checked against the contraction hypotheses."""
    checks = _check_tv_hypotheses(sysTV, T, p)
    u = v0.u.copy()
    h = v0.spacing
    x = v0.x
    lam_max = float(np.max(np.asarray(sysTV.A(0.0, x), dtype=float))) * 1.1
    if dt is None:
        dt = cfl * h / lam_max
    nsteps = max(1, int(math.ceil(T / dt - 1e-12)))
    dt = T / nsteps
    key = "w1p:inf" if p == math.inf else f"w1p:{p:g}"
    snap_every = max(1, nsteps // snapshots)
    times = [0.0]
    series = [discrete_norms(GridState(x, u), (key,))[key]]
    snaps = [GridState(x, u.copy(), 0.0)]
    for k in range(1, nsteps + 1):
        t = (k - 1) * dt
        a = np.asarray(sysTV.A(t, x), dtype=float)
        if np.any(a <= 0):
            raise DynamicsError("time-varying speeds lost positivity")
        nu = a * dt / h
        if np.max(nu) > 1 + 1e-12:
            raise DynamicsError("CFL budget exceeded by A(t,x)")
        unew = u.copy()
        unew[:, 1:] = u[:, 1:] - nu[:, 1:] * (u[:, 1:] - u[:, :-1])
        if sysTV.Q is not None:
            unew[:, 1:] += dt * np.asarray(sysTV.Q(t, x, u), dtype=float)[:, 1:]
        unew[:, 0] = np.asarray(sysTV.K(t + dt), dtype=float) @ unew[:, -1]
        u = unew
        if k % snap_every == 0 or k == nsteps:
            times.append(k * dt)
            snaps.append(GridState(x, u.copy(), k * dt))
            series.append(discrete_norms(snaps[-1], (key,))[key])
    traj = Trajectory(times=np.array(times), snapshots=snaps,
                      norm_series={key: np.array(series)},
                      meta={"hypotheses": checks, "p": p, "dt": dt})
    if np.max(series) == 0.0:
        verdict = {"nu": 0.0, "prefactor": 0.0, "fit_residual": 0.0,
                   "decays": True, "hypotheses": checks,
                   "status": "norm identically zero"}
        return traj, verdict
    fit = estimate_decay(traj, key, window=(T * 0.1, T))
    verdict = {
        "nu": fit.nu,
        "prefactor": fit.prefactor,
        "fit_residual": fit.residual,
        "decays": bool(fit.nu > 0),
        "hypotheses": checks,
        "status": ("decay confirmed" if fit.nu > 0 else "no decay observed")
                  + ("" if checks["met"] else " (hypotheses unmet)"),
    }
    return traj, verdict
