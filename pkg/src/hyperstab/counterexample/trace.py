"""Synthesis of the boundary trace: a C^1 (or C^m) function on [0, r1] that
matches the prescribed value V and m-th derivative dV at every tree node
inside (0, r1) and vanishes identically near 0, r2 and r1.

Nodes sharing a value class (equal depth and twos-count) sit at
seed-perturbation distance from each other and carry the same V, so the
synthesizer puts one wide value bump per class plus one narrow
derivative-correction bump per member; a bump per node at quarter-gap width
would blow up the C^1 norm by V / gap on clustered nodes.

Kernels are compactly supported polynomials with exact rational
coefficients, vanishing to second order at the support edges (C^2 margin, so
the m = 1 and m = 2 variants share one synthesizer).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp
import numpy as np

from ..errors import ConfigError, InputError
from .config import CounterexampleConfig
from .tree import TimeTree

_EDGE_ORDER = 2      # kernels vanish with 2 derivatives at the support edges


def _solve_fraction_system(rows, rhs):
    n = len(rows)
    a = [list(map(Fraction, row)) + [Fraction(v)] for row, v in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise ValueError("singular kernel system")
        a[col], a[piv] = a[piv], a[col]
        inv = Fraction(1, 1) / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def _falling(k, j):
    out = 1
    for i in range(j):
        out *= (k - i)
    return out


def _kernel_coeffs(center_order, target):
    """Polynomial on [-1,1]: derivatives 0.._EDGE_ORDER vanish at z = +-1,
    derivative j at 0 equals delta_{j,target} for j = 0..center_order."""
    ncond = 2 * (_EDGE_ORDER + 1) + center_order + 1
    degree = ncond - 1
    rows, rhs = [], []
    for z0 in (-1, 1):
        for j in range(_EDGE_ORDER + 1):
            rows.append([_falling(k, j) * (z0 ** (k - j) if k >= j else 0)
                         for k in range(degree + 1)])
            rhs.append(0)
    for j in range(center_order + 1):
        rows.append([_falling(k, j) if k == j else 0 for k in range(degree + 1)])
        rhs.append(1 if j == target else 0)
    return _solve_fraction_system(rows, rhs)


class TraceKernels:
    """Value kernel phi0 and m-th-derivative kernel phim on [-1, 1]."""

    def __init__(self, m):
        self.m = m
        center = max(1, m)
        self.phi_val = _kernel_coeffs(center, 0)
        self.phi_der = _kernel_coeffs(center, m)
        self._float = {0: np.array([float(c) for c in self.phi_val]),
                       m: np.array([float(c) for c in self.phi_der])}
        self._mp_cache = {}
        z = np.linspace(-1.0, 1.0, 4001)
        self.sup = {}
        for name, coeffs in (("val", self._float[0]), ("der", self._float[m])):
            p = np.polynomial.Polynomial(coeffs)
            self.sup[name, 0] = float(np.max(np.abs(p(z))))
            self.sup[name, 1] = float(np.max(np.abs(p.deriv()(z))))

    def _mp_coeffs(self, coeffs, order):
        """Horner-ready mpf coefficients of the order-th derivative, cached
        per working precision."""
        key = (id(coeffs), order, mp.mp.prec)
        hit = self._mp_cache.get(key)
        if hit is None:
            hit = [mp.mpf(c.numerator) / c.denominator * _falling(k, order)
                   for k, c in enumerate(coeffs)][order:][::-1]
            self._mp_cache[key] = hit
        return hit

    def eval_mp(self, coeffs, z, order):
        """order-th derivative of the kernel polynomial at mpf z (|z| <= 1)."""
        acc = mp.mpf(0)
        for c in self._mp_coeffs(coeffs, order):
            acc = acc * z + c
        return acc

    def eval_float(self, which_order, z, order):
        coeffs = self._float[which_order]
        p = np.polynomial.Polynomial(coeffs)
        for _ in range(order):
            p = p.deriv()
        return p(z)


@dataclass
class Bump:
    tau: object                   # mpf center
    w: object                     # mpf half-width
    c_val: tuple                  # (mpf, mpf) value coefficients
    c_der: tuple                  # (mpf, mpf) m-th derivative coefficients


@dataclass
class BumpTrace:
    """Sum of compactly supported kernel bumps; exact mpf evaluation plus a
    vectorized float path for grid-based consumers (bumps narrower than
    ``float_width_floor`` are invisible at double resolution and skipped
    there)."""

    r1: float
    m: int
    kernels: TraceKernels
    bumps: list
    dps: int
    float_width_floor: float = 1e-13
    _tiers: list = field(default_factory=list)

    def __post_init__(self):
        self.bumps = sorted(self.bumps, key=lambda b: b.tau)
        # candidate search by width tier: clustered nodes put thousands of
        # hair-width bumps inside one wide support, so a single window sized
        # by the global max width would scan whole clusters per evaluation
        tiers = {}
        for b in self.bumps:
            mag = mp.floor(mp.log(b.w, 4)) if b.w > 0 else mp.mpf(0)
            tiers.setdefault(int(mag), []).append(b)
        self._tiers = []
        for mag, blist in sorted(tiers.items()):
            blist.sort(key=lambda b: b.tau)
            self._tiers.append((max(b.w for b in blist),
                                [b.tau for b in blist], blist))
        arr = [(float(b.tau), float(b.w), float(b.c_val[0]), float(b.c_val[1]),
                float(b.c_der[0]), float(b.c_der[1]))
               for b in self.bumps if b.w >= self.float_width_floor]
        self._farr = np.array(arr, dtype=float).reshape(-1, 6)

    # --- exact path ---------------------------------------------------------

    def eval_jet_mp(self, t, order=None):
        """Jet (value, dv, [ddv]) at mpf time t; each entry an (mpf, mpf) pair."""
        order = self.m if order is None else order
        with mp.workdps(self.dps):
            t = mp.mpf(t)
            jet = [(mp.mpf(0), mp.mpf(0)) for _ in range(order + 1)]
            for wmax, taus, blist in self._tiers:
                lo = bisect.bisect_left(taus, t - wmax)
                hi = bisect.bisect_right(taus, t + wmax)
                for b in blist[lo:hi]:
                    if abs(t - b.tau) >= b.w:
                        continue
                    z = (t - b.tau) / b.w
                    for j in range(order + 1):
                        pv = self.kernels.eval_mp(self.kernels.phi_val, z, j)
                        pd = self.kernels.eval_mp(self.kernels.phi_der, z, j)
                        scale_v = b.w ** (-j)
                        scale_d = b.w ** (self.m - j)
                        jet[j] = (jet[j][0] + b.c_val[0] * pv * scale_v
                                  + b.c_der[0] * pd * scale_d,
                                  jet[j][1] + b.c_val[1] * pv * scale_v
                                  + b.c_der[1] * pd * scale_d)
            return tuple(jet)

    # --- float path (SampledSignal-like protocol) ---------------------------

    @property
    def t0(self):
        return 0.0

    @property
    def t1(self):
        return self.r1

    def _eval_float(self, times, order):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros((times.size, 2))
        srt = np.argsort(times)
        ts = times[srt]
        for tau, w, cv1, cv2, cd1, cd2 in self._farr:
            lo = np.searchsorted(ts, tau - w, side="right")
            hi = np.searchsorted(ts, tau + w, side="left")
            if hi <= lo:
                continue
            z = (ts[lo:hi] - tau) / w
            pv = self.kernels.eval_float(0, z, order)
            pd = self.kernels.eval_float(self.m, z, order)
            sv = w ** (-order)
            sd = w ** (self.m - order)
            idx = srt[lo:hi]
            out[idx, 0] += cv1 * pv * sv + cd1 * pd * sd
            out[idx, 1] += cv2 * pv * sv + cd2 * pd * sd
        return out

    def eval(self, times):
        scalar = np.isscalar(times)
        out = self._eval_float(times, 0)
        return out[0] if scalar else out

    def eval_derivative(self, times):
        scalar = np.isscalar(times)
        out = self._eval_float(times, 1)
        return out[0] if scalar else out

    # --- norms ---------------------------------------------------------------

    def component_sups(self):
        """Per-component upper bounds for sup|v_i| and sup|v_i'|.

        Sound upper bounds: per-bump kernel extrema, summed where supports can
        overlap (a narrow bump always sits inside one wide bump).
        """
        k = self.kernels
        sup_v = [0.0, 0.0]
        sup_d = [0.0, 0.0]
        wide_v = [0.0, 0.0]
        wide_d = [0.0, 0.0]
        wmax = max((float(b.w) for b in self.bumps), default=0.0)
        for b in self.bumps:
            w = float(b.w)
            for i in range(2):
                cv, cd = abs(float(b.c_val[i])), abs(float(b.c_der[i]))
                v = cv * k.sup["val", 0] + cd * w ** self.m * k.sup["der", 0]
                d = (cv * k.sup["val", 1] / w
                     + cd * w ** (self.m - 1) * k.sup["der", 1])
                if w >= 0.5 * wmax:      # class-level bump
                    wide_v[i] = max(wide_v[i], v)
                    wide_d[i] = max(wide_d[i], d)
                else:
                    sup_v[i] = max(sup_v[i], v)
                    sup_d[i] = max(sup_d[i], d)
        return ([wide_v[i] + sup_v[i] for i in range(2)],
                [wide_d[i] + sup_d[i] for i in range(2)])

    def c1_norm_bound(self):
        vs, ds = self.component_sups()
        return max(max(vs), max(ds))


@dataclass
class SynthesisReport:
    n_classes: int
    n_bumps: int
    n_nodes: int
    width_base: float              # the eps/8 cap
    c1_upper: float
    sup_values: tuple
    sup_derivatives: tuple
    derivative_cap: float          # A = max ||dV||_inf over window nodes
    v1_constant: float             # measured constant of the C^1 bound


class ConsistentTrace:
    """Trace of the construction, consistent with the forward dynamics.

    For t in (r2, r1] the second delay channel of the solution is fed by the
    boundary, not by the initial data, so only the first component of
    g = G^{-1} v remains free there.  The object stores the free data as a
    bump sum in g-coordinates -- both channels on [0, r2), the g1 channel on
    (r2, r1] -- and derives v on (r2, r1] through the relation

        v(t) = g1(t) G1 + v2(t*) G2,   t* + r2 + v2(t*) = t,

    whose preimage t* always lands in the free region (t* < r1 - r2 < r2).
    Node values V and, on the free region, node derivatives dV are matched
    exactly; on (r2, r1] the derivative carries the relation's intrinsic
    O(eps^2) correction, which is what the solution actually does.
    """

    def __init__(self, gfree: BumpTrace, config):
        self.gfree = gfree
        self.m = config.m
        self.dps = config.dps
        self.r1 = float(config.r1)
        self.r2 = float(config.r2)
        self.r2_mp = config.r2
        self.G = config.G_float
        self.G1_mp, self.G2_mp = config.G_columns_mp()

    @property
    def t0(self):
        return 0.0

    @property
    def t1(self):
        return self.r1

    # --- float path -----------------------------------------------------

    def _free_v(self, times, order=0):
        g = self.gfree._eval_float(times, order)
        return g @ self.G.T

    def _preimages(self, times):
        ts = np.asarray(times, dtype=float) - self.r2
        for _ in range(40):
            v2 = self._free_v(ts)[:, 1]
            f = ts + self.r2 + v2 - times
            fp = 1.0 + self._free_v(ts, 1)[:, 1]
            step = f / fp
            ts = ts - step
            if np.max(np.abs(step)) < 1e-16 * max(self.r1, 1.0):
                break
        return ts

    def _eval(self, times, order):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.empty((times.size, 2))
        lo = times <= self.r2
        if np.any(lo):
            out[lo] = self._free_v(times[lo], order)
        hi = ~lo
        if np.any(hi):
            th = times[hi]
            g1 = self.gfree._eval_float(th, order)[:, 0]
            tstar = self._preimages(th)
            if order == 0:
                chan2 = self._free_v(tstar)[:, 1]
            else:
                d2 = self._free_v(tstar, 1)[:, 1]
                chan2 = d2 / (1.0 + d2)
            out[hi] = (np.outer(g1, self.G[:, 0])
                       + np.outer(chan2, self.G[:, 1]))
        return out

    def eval(self, times):
        scalar = np.isscalar(times)
        out = self._eval(times, 0)
        return out[0] if scalar else out

    def eval_derivative(self, times):
        scalar = np.isscalar(times)
        out = self._eval(times, 1)
        return out[0] if scalar else out

    # --- exact path -------------------------------------------------------

    def free_jet_mp(self, t, order=None):
        """g-space jet of the free data at mpf time t."""
        return self.gfree.eval_jet_mp(t, order=order)

    def eval_jet_mp(self, t, order=None):
        """v-space jet at mpf time t (scalar, exact)."""
        order = max(1, self.m) if order is None else order
        with mp.workdps(self.dps):
            t = mp.mpf(t)
            gj = self.gfree.eval_jet_mp(t, order=order)
            if t <= self.r2_mp:
                return tuple(
                    tuple(gj[j][0] * self.G1_mp[k] + gj[j][1] * self.G2_mp[k]
                          for k in range(2))
                    for j in range(order + 1))
            # preimage under the delayed time map (scalar Newton)
            ts = t - self.r2_mp
            for _ in range(80):
                vj = self.gfree.eval_jet_mp(ts, order=1)
                v2 = vj[0][0] * self.G1_mp[1] + vj[0][1] * self.G2_mp[1]
                d2 = vj[1][0] * self.G1_mp[1] + vj[1][1] * self.G2_mp[1]
                f = ts + self.r2_mp + v2 - t
                ts = ts - f / (1 + d2)
                if abs(f) < mp.mpf(10) ** (-(self.dps - 5)):
                    break
            vj = self.gfree.eval_jet_mp(ts, order=order)
            chain = [vj[j][0] * self.G1_mp[1] + vj[j][1] * self.G2_mp[1]
                     for j in range(order + 1)]
            one = mp.mpf(1)
            chan2 = [chain[0]]
            if order >= 1:
                chan2.append(chain[1] / (one + chain[1]))
            if order >= 2:
                chan2.append(chain[2] / (one + chain[1]) ** 3)
            jets = []
            for j in range(order + 1):
                jets.append(tuple(gj[j][0] * self.G1_mp[k]
                                  + chan2[j] * self.G2_mp[k]
                                  for k in range(2)))
            return tuple(jets)

    # --- norms --------------------------------------------------------------

    def component_sups(self):
        g_sv, g_sd = self.gfree.component_sups()
        gabs = np.abs(self.G)
        v_lo = gabs @ np.array(g_sv)
        d_lo = gabs @ np.array(g_sd)
        cap = min(0.9, float(d_lo[1]))
        v_hi = gabs[:, 0] * g_sv[0] + gabs[:, 1] * v_lo[1]
        d_hi = gabs[:, 0] * g_sd[0] + gabs[:, 1] * d_lo[1] / (1.0 - cap)
        return (tuple(np.maximum(v_lo, v_hi)), tuple(np.maximum(d_lo, d_hi)))

    def c1_norm_bound(self):
        vs, ds = self.component_sups()
        return max(max(vs), max(ds))


def synthesize_trace(tree: TimeTree, config: CounterexampleConfig = None):
    """Build the consistent trace from the tree's (0, r1) nodes.

    Free data in g-coordinates: one wide bump per value class plus narrow
    per-node derivative corrections.  Classes below r2 prescribe both
    channels (g(T) = G^{-1}V, g'(T) = G^{-1}dV); classes above r2 prescribe
    the g1 channel only -- the other channel is owned by the relation.
    """
    cfg = config or tree.config
    kernels = TraceKernels(cfg.m)
    with mp.workdps(cfg.dps):
        window_nodes = tree.in_unit_window()
        if not window_nodes:
            gfree = BumpTrace(float(cfg.r1), cfg.m, kernels, [], cfg.dps)
            return (ConsistentTrace(gfree, cfg),
                    SynthesisReport(0, 0, 0, float(cfg.eps_mp / 8), 0.0,
                                    (0.0, 0.0), (0.0, 0.0), 0.0, 0.0))
        zero = mp.mpf(0)

        def g_targets(nd):
            gv = cfg.G_inverse_apply(nd.V[0], nd.V[1])
            gd = cfg.G_inverse_apply(nd.dV[0], nd.dV[1])
            if nd.time > cfg.r2:
                return (gv[0], zero), (gd[0], zero)
            return gv, gd

        classes = {}
        for nd in window_nodes:
            if nd.dV is None:
                raise InputError("run dv_recursion before synthesizing the trace")
            classes.setdefault((nd.depth, nd.twos), []).append(nd)
        for members in classes.values():
            members.sort(key=lambda nd: nd.time)
        anchors = sorted(
            ((members[0].time + members[-1].time) / 2, key)
            for key, members in classes.items())
        anchor_times = [a for a, _ in anchors]
        exclusions = (mp.mpf(0), cfg.r2, cfg.r1)
        w_cap = cfg.eps_mp / 8
        bumps = []
        for pos, (anchor, key) in enumerate(anchors):
            members = classes[key]
            gap_neighbors = []
            if pos > 0:
                gap_neighbors.append(anchor - anchor_times[pos - 1])
            if pos + 1 < len(anchors):
                gap_neighbors.append(anchor_times[pos + 1] - anchor)
            dist_excl = min(abs(anchor - e) for e in exclusions)
            if dist_excl < cfg.eps_mp / 4:
                raise InputError(
                    f"class {key} too close to an exclusion zone "
                    f"({float(dist_excl):.3e}): eps selection failed")
            w_class = min([w_cap, dist_excl / 4]
                          + [g / 4 for g in gap_neighbors])
            spread = members[-1].time - members[0].time
            if spread > w_class / 8:
                raise ConfigError(
                    f"class {key} spread {float(spread):.3e} is not small "
                    f"against its bump width {float(w_class):.3e}")
            if len(members) == 1:
                gv, gd = g_targets(members[0])
                bumps.append(Bump(members[0].time, w_class, gv, gd))
                continue
            gv_class, _ = g_targets(members[0])
            wide = Bump(anchor, w_class, gv_class, (zero, zero))
            bumps.append(wide)
            for i, nd in enumerate(members):
                gaps = []
                if i > 0:
                    gaps.append(nd.time - members[i - 1].time)
                if i + 1 < len(members):
                    gaps.append(members[i + 1].time - nd.time)
                room = (w_class - abs(nd.time - anchor)) / 4
                w_i = min(gaps + [room]) / 4 if gaps else room
                if w_i <= 0:
                    raise ConfigError(f"degenerate narrow width at node {nd.word}")
                z = (nd.time - anchor) / w_class
                pv0 = kernels.eval_mp(kernels.phi_val, z, 0)
                pvm = kernels.eval_mp(kernels.phi_val, z, cfg.m)
                gv, gd = g_targets(nd)
                c_val = tuple(gv[c] - wide.c_val[c] * pv0 for c in range(2))
                c_der = tuple(gd[c] - wide.c_val[c] * pvm
                              * w_class ** (-cfg.m) for c in range(2))
                bumps.append(Bump(nd.time, w_i, c_val, c_der))
        gfree = BumpTrace(float(cfg.r1), cfg.m, kernels, bumps, cfg.dps)
        trace = ConsistentTrace(gfree, cfg)
        a_cap = max(max(abs(nd.dV[0]), abs(nd.dV[1])) for nd in window_nodes)
        sup_v, sup_d = trace.component_sups()
        c1_upper = trace.c1_norm_bound()
        eps_f = float(cfg.eps_mp)
        denom = max(eps_f ** 2, float(a_cap))
        report = SynthesisReport(
            n_classes=len(classes), n_bumps=len(bumps),
            n_nodes=len(window_nodes), width_base=float(w_cap),
            c1_upper=c1_upper, sup_values=tuple(sup_v),
            sup_derivatives=tuple(sup_d), derivative_cap=float(a_cap),
            v1_constant=c1_upper / denom)
    return trace, report
