"""The acceptance suite: every shipping criterion, runnable from pytest
(tests/test_acceptance.py) or the CLI (``hyperstab accept``).

Each criterion returns a CriterionResult with one-line pass/fail rendering;
runtime limits are part of the criterion where stated.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import delay, hypersolver, spectral
from .counterexample import (build_config, counterexample_system,
                             mismatch_scaling, run_certificate)
from .hypersolver import GridState, HyperbolicSystem, TimeVaryingLinearSystem
from .signals import SampledSignal


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    elapsed: float
    runtime_limit: float | None
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        lim = f"/{self.runtime_limit:.0f}s" if self.runtime_limit else ""
        head = f"[{status}] criterion {self.cid}: {self.name} ({self.elapsed:.1f}s{lim})"
        if self.failures:
            head += " :: " + "; ".join(self.failures)
        return head


def _result(cid, name, limit, t0, failures, details):
    elapsed = time.time() - t0
    if limit is not None and elapsed > limit:
        failures.append(f"runtime {elapsed:.1f}s exceeded {limit:.0f}s")
    return CriterionResult(cid, name, not failures, elapsed, limit,
                           failures, details)


def criterion_1():
    """Reference matrix a[[1,1],[-1,1]]: scaled 2-index sqrt(2)a, inf-index 2a."""
    t0 = time.time()
    failures, details = [], {}
    for a in (0.5, 1.0):
        m = a * np.array([[1.0, 1.0], [-1.0, 1.0]])
        r2 = spectral.rho_hat_p(m, 2).value
        rinf = spectral.rho_hat_p(m, math.inf).value
        details[f"rho2(a={a})"] = r2
        details[f"rhoinf(a={a})"] = rinf
        if abs(r2 - math.sqrt(2) * a) > 1e-6:
            failures.append(f"rho2(a={a}) = {r2} vs {math.sqrt(2) * a}")
        if abs(rinf - 2 * a) > 1e-6:
            failures.append(f"rhoinf(a={a}) = {rinf} vs {2 * a}")
    return _result(1, "reference-matrix indices", 1.0, t0, failures, details)


def criterion_2():
    """Ordering rho0 <= rho2 <= rhoinf on 100 seeded random matrices."""
    t0 = time.time()
    failures, details = [], {}
    rng = np.random.default_rng(0)
    worst01 = -math.inf
    worst12 = -math.inf
    for idx in range(100):
        n = 2 if idx < 50 else 3
        m = rng.uniform(-1.0, 1.0, size=(n, n))
        opts = spectral.RhoOptions(seed=0)
        r0 = spectral.rho_hat_zero(m, opts=opts).value
        r2 = spectral.rho_hat_p(m, 2, opts).value
        rinf = spectral.rho_hat_p(m, math.inf, opts).value
        worst01 = max(worst01, r0 - r2)
        worst12 = max(worst12, r2 - rinf)
    details["max rho0 - rho2"] = worst01
    details["max rho2 - rhoinf"] = worst12
    if worst01 > 1e-6:
        failures.append(f"rho0 exceeded rho2 by {worst01:.2e}")
    if worst12 > 1e-6:
        failures.append(f"rho2 exceeded rhoinf by {worst12:.2e}")
    return _result(2, "index ordering on random matrices", 60.0, t0,
                   failures, details)


def criterion_3():
    """Equality of the phase index and the scaled 2-index for n <= 3."""
    t0 = time.time()
    failures, details = [], {}
    rng = np.random.default_rng(1)
    worst = 0.0
    for n in (1, 2, 3):
        for _ in range(25):
            m = rng.uniform(-1.0, 1.0, size=(n, n))
            r0 = spectral.rho_hat_zero(m).value
            r2 = spectral.rho_hat_p(m, 2).value
            gap = abs(r0 - r2)
            if gap > worst:
                worst = gap
                details["worst matrix"] = m.tolist()
    details["max |rho0 - rho2|"] = worst
    if worst > 1e-3:
        failures.append(f"|rho0 - rho2| = {worst:.2e} > 1e-3")
    return _result(3, "low-dimension equality of indices", 120.0, t0,
                   failures, details)


def criterion_4():
    """Scalar delay analytics: exact decay, root at -ln 2, winding count."""
    t0 = time.time()
    failures, details = [], {}
    sys1 = delay.DelaySystem([[0.5]], [1.0])
    hist = SampledSignal(-1.0, 1 / 32, np.ones((33, 1)))
    sig = delay.simulate_linear(sys1, hist, 6.0)
    ts = sig.times()
    expect = 0.5 ** (np.floor(ts + 1e-12) + 1)
    err = float(np.max(np.abs(sig.values[:, 0] - expect)))
    details["geometric decay error"] = err
    if err > 1e-12:
        failures.append(f"decay error {err:.2e} > 1e-12")
    rep = delay.rightmost_roots(sys1, rect=(-2.0, 1.0, 20.0))
    details["rightmost"] = rep.rightmost
    details["winding"] = rep.winding_total
    details["roots"] = len(rep.roots)
    if abs(rep.rightmost + math.log(2)) > 1e-10:
        failures.append(f"rightmost root {rep.rightmost} vs {-math.log(2)}")
    if not rep.complete or rep.winding_total != len(rep.roots):
        failures.append(
            f"winding {rep.winding_total} != roots {len(rep.roots)}")
    return _result(4, "scalar delay analytics", None, t0, failures, details)


def _transport_bump(x):
    return np.where(np.abs(x - 0.5) < 0.25,
                    np.cos(np.pi * (x - 0.5) / 0.5) ** 2, 0.0)[None, :]


def criterion_5():
    """Upwind convergence, characteristics exactness and the ln 2 decay."""
    t0 = time.time()
    failures, details = [], {}
    sys1 = HyperbolicSystem.linear([1.0], [[0.5]])
    errs = []
    for cells in (200, 400, 800):
        g = GridState.from_function(_transport_bump, cells, 1)
        up = hypersolver.solve_forward(sys1, g, 1.0, scheme="upwind",
                                       snapshots=4, norms=())
        ch = hypersolver.solve_forward(sys1, g, 1.0, scheme="characteristics",
                                       snapshots=4, norms=())
        errs.append(float(np.max(np.abs(up.snapshots[-1].u - ch.snapshots[-1].u))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    details["upwind errors"] = errs
    details["upwind orders"] = orders
    if min(orders) < 0.9:
        failures.append(f"upwind order {min(orders):.3f} < 0.9")
    g = GridState.from_function(_transport_bump, 400, 1)
    traj = hypersolver.solve_forward(sys1, g, 12.0, scheme="characteristics",
                                     snapshots=480, norms=("c0",))
    i3 = int(np.argmin(np.abs(traj.times - 3.0)))
    char_err = float(np.max(np.abs(traj.snapshots[i3].u - 0.125 * g.u)))
    details["characteristics error at t=3"] = char_err
    if char_err > 1e-6:
        failures.append(f"characteristics error {char_err:.2e} > 1e-6")
    fit = hypersolver.estimate_decay(traj, "c0", window=(0.5, 11.5))
    details["fitted nu"] = fit.nu
    if abs(fit.nu - math.log(2)) > 0.02 * math.log(2):
        failures.append(f"decay nu {fit.nu:.4f} vs ln2 +-2%")
    return _result(5, "transport solver convergence and decay", None, t0,
                   failures, details)


def _tv_system(q_amp):
    lam = np.array([1.0, 2.0])

    def a_fun(t, x):
        mod = 1.0 + 0.01 * math.sin(2 * math.pi * t)
        wig = 1.0 + 0.002 * np.sin(2 * math.pi * x)
        return lam[:, None] * mod * wig[None, :]

    def k_fun(t):
        return 0.8 * np.eye(2)

    q_fun = None
    if q_amp:
        def q_fun(t, x, v):
            return q_amp * v * v
    return TimeVaryingLinearSystem(a_fun, k_fun, 2, q_fun)


def _tv_initial(x):
    prof = np.where((x > 0.15) & (x < 0.85),
                    np.sin(np.pi * (x - 0.15) / 0.7) ** 2, 0.0)
    return 0.01 * np.vstack([prof, -0.6 * prof])


def criterion_6():
    """Time-varying contraction desk check: positive fitted decay for
    p in {1, 2, inf} with and without a small quadratic source."""
    t0 = time.time()
    failures, details = [], {}
    for q_amp in (0.0, 0.05):
        sysTV = _tv_system(q_amp)
        v0 = GridState.from_function(_tv_initial, 240, 2)
        for p in (1, 2, math.inf):
            traj, verdict = hypersolver.simulate_timevarying(
                sysTV, v0, 20.0, p=p, snapshots=300)
            tag = f"p={p} q={q_amp}"
            details[tag] = {"nu": verdict["nu"],
                            "residual": verdict["fit_residual"],
                            "K_hat": verdict["hypotheses"]["K_hat"]}
            if verdict["nu"] <= 0:
                failures.append(f"{tag}: no decay (nu = {verdict['nu']:.3f})")
            if verdict["fit_residual"] > 0.1:
                failures.append(
                    f"{tag}: fit residual {verdict['fit_residual']:.3f} > 0.1")
            if not verdict["hypotheses"]["met"]:
                failures.append(f"{tag}: hypotheses unexpectedly unmet")
    return _result(6, "time-varying decay desk check", 60.0, t0,
                   failures, details)


def criterion_7():
    """Growth certificate at T in {6, 9, 12}: distinctness, contraction,
    quadratic mismatch scaling, amplification growth, solver agreement."""
    t0 = time.time()
    failures, details = [], {}
    amps = []
    for t_req in (6.0, 9.0, 12.0):
        cfg = build_config(T=t_req, eps_request=1e-3)
        art = run_certificate(cfg, cells=800)
        cert = art.certificate
        tag = f"T={t_req}"
        details[tag] = {
            "T": cfg.T_float, "eps": cfg.eps_float,
            "amplification": cert.amplification,
            "floor/4": cert.theoreticalFloor / 4,
            "cross gap": cert.details["min_cross_class_gap"],
            "mismatch/eps^2": cert.details["mismatch_over_eps2"],
        }
        # (a) distinctness with gap >= eps/2 is enforced inside run_certificate;
        # re-assert on the report values
        if cert.details["min_cross_class_gap"] < cfg.eps_float / 2:
            failures.append(f"{tag}: cross-class gap below eps/2")
        # (b) the dv recursion asserts contraction <= c on every edge and
        # would have raised; record the constant
        details[tag]["c"] = cert.details["c"]
        # (d) amplification floor
        if cert.amplification < cert.theoreticalFloor / 4:
            failures.append(
                f"{tag}: amplification {cert.amplification:.4f} < floor/4")
        amps.append(cert.amplification)
        # (c) quadratic mismatch scaling in eps
        scal = mismatch_scaling(T=t_req, eps_values=(1e-3, 5e-4, 2.5e-4))
        details[tag]["mismatch slope"] = scal["slope"]
        if abs(scal["slope"] - 2.0) > 0.15:
            failures.append(
                f"{tag}: mismatch slope {scal['slope']:.3f} outside 2 +- 0.15")
        # (e) delay engine vs PDE boundary trace under refinement.  The trace
        # features are eps/8 wide, so this comparison runs its own
        # certificate at an amplitude the grids can resolve (eps is pinned by
        # (c) only for the mismatch-scaling study).
        cfg_e = build_config(T=t_req, eps_request=0.02)
        art_e = run_certificate(cfg_e, cells=400)
        ref = delay.simulate_state_dependent(
            cfg_e.G_float[:, 0], cfg_e.G_float[:, 1], float(cfg_e.r1),
            float(cfg_e.r2), art_e.trace, cfg_e.T_float,
            dt=art_e.synthesis.width_base / 16)
        sup_errs = []
        sys2 = counterexample_system(cfg_e)
        grids = (1000, 2000, 4000)
        dt_long = 0.45 / float(cfg_e.Lambda2)
        for cells in grids:
            x = np.linspace(0.0, 1.0, cells + 1)
            state = GridState(x, art_e.u0_eval.eval(x))
            traj = hypersolver.solve_forward(
                sys2, state, cfg_e.T_float, scheme="characteristics",
                snapshots=4, norms=(), dt=dt_long,
                trace_dt=art_e.synthesis.width_base / 12)
            tt = traj.trace.times()
            keep = tt <= ref.t1 + 1e-12
            diff = traj.trace.values[keep] - ref.eval(tt[keep])
            sup_errs.append(float(np.max(np.abs(diff))))
        fit = np.polyfit(np.log(grids), np.log(sup_errs), 1)
        order = -float(fit[0])
        details[tag]["trace sup errors"] = sup_errs
        details[tag]["trace agreement order"] = order
        if order < 1.0:
            failures.append(f"{tag}: trace agreement order {order:.2f} < 1")
    if not (amps[0] < amps[1] < amps[2]):
        failures.append(f"amplification not increasing in T: {amps}")
    return _result(7, "growth certificate", 600.0, t0, failures, details)


def criterion_8():
    """Round trip: backward data then forward solve reproduces the trace."""
    t0 = time.time()
    failures, details = [], {}
    cfg = build_config(T=6.0, eps_request=1e-3)
    art = run_certificate(cfg, cells=4000)
    rep = art.u0_report
    details["compat order 0"] = rep.compat_residuals[0]
    details["compat order 1"] = rep.compat_residuals[1]
    if max(rep.compat_residuals.values()) > 1e-10:
        failures.append(
            f"compatibility residuals {rep.compat_residuals} > 1e-10")
    sys2 = counterexample_system(cfg)
    traj = hypersolver.solve_forward(sys2, art.u0_state, float(cfg.r1),
                                     scheme="characteristics", snapshots=4,
                                     norms=())
    tt = traj.trace.times()
    sup = float(np.max(np.abs(traj.trace.values - art.trace.eval(tt))))
    details["round-trip sup error"] = sup
    details["cells"] = 4000
    if sup > 5e-6:
        failures.append(f"round-trip sup error {sup:.2e} > 5e-6")
    return _result(8, "backward/forward round trip", None, t0,
                   failures, details)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
}


def run(ids=None, report=print):
    """Run the requested criteria (all by default); returns (results, ok)."""
    results = []
    for cid in sorted(ids or CRITERIA):
        res = CRITERIA[cid]()
        results.append(res)
        if report:
            report(res.line())
    return results, all(r.passed for r in results)
