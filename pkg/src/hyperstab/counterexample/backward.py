"""Backward construction of the initial data u0 from the trace.

The system is diagonal with speeds Lambda1 (constant) and 1/(r2 + u2), so
the backward Cauchy problem with boundary data g = G^{-1} v at x = 1 and
zero data at t = r1 has an exact characteristic solution:

* component 1:  u0_1(x) = g_1((1 - x) r1)
* component 2:  u0_2(x) = g_2(s) with the transit-time fixed point
  s = (1 - x)(r2 + g_2(s)), solved by damped Newton (a contraction while
  |g_2'| stays small).

Both components are exactly zero near x = 0 and x = 1 because the trace
vanishes near 0, r2 and r1, so the compatibility conditions hold at every
order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import hypersolver
from ..errors import DynamicsError
from .config import CounterexampleConfig
from .trace import BumpTrace


@dataclass
class BackwardReport:
    c1_u0: float                 # measured on the evaluation grid
    c1_u0_upper: float           # analytic bound from trace suprema
    c1_trace_upper: float
    ratio_measured: float        # c1_u0 / trace C1 (the choice-u0 constant)
    compat_residuals: dict
    compat_passed: bool
    fixed_point_iters: int


class InitialData:
    """Pointwise-exact evaluator for u0 and its derivative."""

    def __init__(self, config: CounterexampleConfig, trace: BumpTrace):
        self.config = config
        self.trace = trace
        self.ginv = np.linalg.inv(config.G_float)
        self.r1 = float(config.r1)
        self.r2 = float(config.r2)
        self.last_iters = 0

    def _g(self, times):
        return self.trace.eval(times) @ self.ginv.T

    def _gprime(self, times):
        return self.trace.eval_derivative(times) @ self.ginv.T

    def _transit_times(self, x):
        """Solve s = (1 - x)(r2 + g2(s)) per grid point (damped Newton)."""
        x = np.asarray(x, dtype=float)
        onemx = 1.0 - x
        s = onemx * self.r2
        iters = 0
        for _ in range(60):
            g2 = self._g(s)[:, 1]
            dg2 = self._gprime(s)[:, 1]
            if np.max(np.abs(onemx * dg2)) >= 0.5:
                raise DynamicsError(
                    "transit-time fixed point is not contracting: trace too large")
            f = s - onemx * (self.r2 + g2)
            fp = 1.0 - onemx * dg2
            step = f / fp
            s = s - step
            iters += 1
            if np.max(np.abs(step)) < 1e-16 * max(self.r1, 1.0):
                break
        self.last_iters = iters
        return np.clip(s, 0.0, self.r1)

    def eval(self, x):
        """u0 on the nodes ``x``; returns (2, len(x))."""
        x = np.asarray(x, dtype=float)
        u1 = self._g((1.0 - x) * self.r1)[:, 0]
        s = self._transit_times(x)
        u2 = self._g(s)[:, 1]
        return np.vstack([u1, u2])

    def eval_derivative(self, x):
        """d u0 / dx on the nodes ``x``."""
        x = np.asarray(x, dtype=float)
        du1 = -self.r1 * self._gprime((1.0 - x) * self.r1)[:, 0]
        s = self._transit_times(x)
        g2 = self._g(s)[:, 1]
        dg2 = self._gprime(s)[:, 1]
        sprime = -(self.r2 + g2) / (1.0 - (1.0 - x) * dg2)
        return np.vstack([du1, dg2 * sprime])


def backward_initial_data(config: CounterexampleConfig, trace: BumpTrace,
                          cells=2000, sys=None):
    """Sample u0 on a grid and validate norms and compatibility.

    Returns (GridState, BackwardReport, InitialData evaluator).
    """
    data = InitialData(config, trace)
    x = np.linspace(0.0, 1.0, cells + 1)
    u0 = data.eval(x)
    state = hypersolver.GridState(x, u0, 0.0)
    if sys is None:
        sys = counterexample_system(config)
    compat = hypersolver.check_compatibility(sys, state, order=1, tol=1e-10)
    # measured C1 on a refined grid plus exact node derivatives
    fine = np.linspace(0.0, 1.0, 4 * cells + 1)
    vals = data.eval(fine)
    ders = data.eval_derivative(fine)
    c1_meas = max(float(np.max(np.abs(vals))), float(np.max(np.abs(ders))))
    # u0 is built from g = G^{-1} v, whose free bump data bounds it directly:
    # u0_1' = -r1 g1'((1-x) r1) and u0_2' = g2'(s) s' with |s'| <= r2(1+..)
    if hasattr(trace, "gfree"):
        gv, gd = trace.gfree.component_sups()
    else:
        ginv_abs = np.abs(np.linalg.inv(config.G_float))
        sup_v, sup_d = trace.component_sups()
        gv = ginv_abs @ np.array(sup_v)
        gd = ginv_abs @ np.array(sup_d)
    r2f = float(config.r2)
    slope2 = (r2f + float(gv[1])) / (1.0 - min(0.9, float(gd[1]))) * float(gd[1])
    c1_upper = max(float(np.max(gv)), data.r1 * float(gd[0]), slope2)
    trace_c1 = trace.c1_norm_bound()
    report = BackwardReport(
        c1_u0=c1_meas, c1_u0_upper=c1_upper, c1_trace_upper=trace_c1,
        ratio_measured=c1_meas / trace_c1 if trace_c1 > 0 else 0.0,
        compat_residuals=compat["residuals"], compat_passed=compat["passed"],
        fixed_point_iters=data.last_iters)
    return state, report, data


def counterexample_system(config: CounterexampleConfig):
    """The diagonal hyperbolic system of the construction: speeds Lambda1 and
    1/(r2 + u2), linear boundary gain G."""
    lam1 = float(config.Lambda1)
    r2 = float(config.r2)
    return hypersolver.HyperbolicSystem(
        speeds=[lambda u, c=lam1: c * np.ones_like(np.asarray(u, dtype=float)),
                lambda u: 1.0 / (r2 + np.asarray(u, dtype=float))],
        boundary=config.G_float,
        n=2,
        domain_radius=r2 / 2,
    )
