"""Configuration and parameter validation for the growth-certificate
construction.

All constraints are checked at build time and every violated inequality is
reported by name.  Times and seed perturbations are handled in extended
precision (mpmath): the seed scale eps^(2+m)/4^n sits far below double
resolution relative to horizon-sized times, so the working precision is
raised automatically until those splits are representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp
import numpy as np

from ..errors import ConfigError

#: defaults keep xi, eta near 1.01 (so the gain matrix matches the reference
#: margins) while staying irrational and distinct, mimicking the algebraic
#: independence the construction assumes.
DEFAULT_A = Fraction(51, 100)
_XI_EXPR = "1.01 + 1/(1000*pi)"
_ETA_EXPR = "1.01 + 1/(1000*e)"


@dataclass
class CounterexampleConfig:
    Lambda1: object
    Lambda2: object
    r1: object
    r2: object
    a: Fraction
    xi: object
    eta: object
    T: object                    # adjusted, lattice-avoiding horizon (mpf)
    T_requested: float
    eps: Fraction                # exact dyadic amplitude
    eps_mp: object
    m: int
    c: object                    # contraction constant (mpf)
    n_levels: int
    lattice_gap: float
    min_pair_gap: float
    dps: int
    rho2: float
    rho_inf: float
    extras: dict = field(default_factory=dict)

    @property
    def T_float(self):
        return float(self.T)

    @property
    def eps_float(self):
        return float(self.eps)

    @property
    def a_mp(self):
        if "a_mp" not in self.extras:
            self.extras["a_mp"] = mp.mpf(self.a.numerator) / self.a.denominator
        return self.extras["a_mp"]

    @property
    def G_float(self):
        a = float(self.a)
        return np.array([[a, a * float(self.xi)], [-a, a * float(self.eta)]])

    def G_columns_mp(self):
        a = self.a_mp
        return (a, -a), (a * self.xi, a * self.eta)

    def G_apply(self, s, t):
        """G (s, t)^T = a (s + xi t, -s + eta t)^T in the operand type."""
        a = self.a_mp
        return (a * (s + self.xi * t), a * (-s + self.eta * t))

    def G_inverse_apply(self, v1, v2):
        """G^{-1} (v1, v2)^T = (eta v1 - xi v2, v1 + v2) / (a (eta + xi))."""
        if "ginv_den" not in self.extras:
            self.extras["ginv_den"] = self.a_mp * (self.eta + self.xi)
        den = self.extras["ginv_den"]
        return ((self.eta * v1 - self.xi * v2) / den, (v1 + v2) / den)

    def theoretical_floor(self):
        """c^{-T/(2 r1)}: the certified growth scale of the construction."""
        return float(mp.power(self.c, -self.T / (2 * self.r1)))


def _lattice_values(r1, r2, bound):
    vals = []
    k = 0
    while k * r1 <= bound:
        v = k * r1
        l = 0
        while v + l * r2 <= bound:
            vals.append(v + l * r2)
            l += 1
        k += 1
    return sorted(vals)


def _adjust_horizon(t_req, lattice, search=0.75, min_half=0.015):
    """Closest adequately-wide lattice-free interval midpoint near the
    request (falls back to the widest nearby interval when none clears the
    width floor)."""
    best = None
    widest = None
    for lo, hi in zip(lattice[:-1], lattice[1:]):
        mid = (lo + hi) / 2
        dist = abs(float(mid) - t_req)
        if dist > search:
            continue
        half = float(hi - lo) / 2
        if widest is None or half > widest[0]:
            widest = (half, mid)
        if half < min_half:
            continue
        if best is None or dist < best[0]:
            best = (dist, mid, half)
    if best is not None:
        return best[1], best[2]
    if widest is not None:
        return widest[1], widest[0]
    raise ConfigError(
        f"no lattice-free interval within {search} of T = {t_req}")


def build_config(T=9.0, a=DEFAULT_A, xi=None, eta=None, Lambda1=1.0,
                 Lambda2=None, eps_request=1e-3, m=1, dps=50,
                 adjust_T=True, validate_rho2=True):
    """Validate and derive all construction parameters.

    The horizon is nudged (when ``adjust_T``) to the midpoint of the widest
    nearby interval free of the delay lattice {k r1 + l r2}, the amplitude is
    capped by the lattice gaps and rounded down to an exact dyadic rational,
    and the working precision is raised until the seed scale is resolvable.
    """
    if m not in (1, 2):
        raise ConfigError("derivative order m must be 1 or 2")
    a = Fraction(a).limit_denominator(10 ** 9)
    if not (0 < a):
        raise ConfigError("gain a must be positive")
    with mp.workdps(max(dps, 50)):
        lam1 = mp.mpf(Lambda1)
        lam2 = mp.sqrt(2) if Lambda2 is None else mp.mpf(Lambda2)
        if not (0 < lam1 < lam2):
            raise ConfigError("need speeds 0 < Lambda1 < Lambda2 (so r1 > r2)")
        r1 = 1 / lam1
        r2 = 1 / lam2
        xi = mp.mpf("1.01") + 1 / (1000 * mp.pi) if xi is None else mp.mpf(xi)
        eta = mp.mpf("1.01") + 1 / (1000 * mp.e) if eta is None else mp.mpf(eta)
        if not (xi > 1 and eta > 1):
            raise ConfigError("need xi > 1 and eta > 1")
        a_mp = mp.mpf(a.numerator) / a.denominator
        if a_mp * (1 + xi + eta) > 2:
            raise ConfigError(
                f"constraint a(1+xi+eta) <= 2 violated: {float(a_mp * (1 + xi + eta))}")
        bound = max(xi, eta) / (a_mp * (xi + eta))
        if bound >= 1:
            raise ConfigError(
                "contraction constraint max(xi,eta)/(a(xi+eta)) < 1 violated: "
                f"{float(bound)}")
        c = (1 + bound) / 2
        lattice = _lattice_values(r1, r2, mp.mpf(T) + r1 + 1)
        if adjust_T:
            t_mp, gap = _adjust_horizon(float(T), lattice)
        else:
            t_mp = mp.mpf(T)
            gap = float(min(abs(t_mp - v) for v in lattice))
            if gap <= 0:
                raise ConfigError(f"T = {T} lies on the delay lattice")
        diffs = [float(b - x) for x, b in zip(lattice[:-1], lattice[1:])
                 if b <= t_mp and b - x > 1e-12]
        min_pair_gap = min(diffs) if diffs else float(r2)
        eps_cap = min(float(eps_request), 0.9 * float(gap), 0.4 * min_pair_gap)
        if eps_cap <= 0:
            raise ConfigError("lattice gaps leave no room for a positive eps")
        eps = Fraction(math.floor(eps_cap * 2 ** 52), 2 ** 52)
        if eps == 0:
            raise ConfigError("eps underflows the dyadic grid")
        n_levels = int(mp.floor(t_mp / r2)) + 1
        # working precision must resolve seed-scale splits against T
        b_log10 = (2 + m) * math.log10(float(eps)) - n_levels * math.log10(4)
        needed = int(math.ceil(math.log10(float(t_mp) * 8 * (n_levels + 1))
                               - b_log10)) + 12
        dps_eff = max(dps, needed)
    cfg = CounterexampleConfig(
        Lambda1=lam1, Lambda2=lam2, r1=r1, r2=r2, a=a, xi=xi, eta=eta,
        T=t_mp, T_requested=float(T), eps=eps,
        eps_mp=mp.mpf(eps.numerator) / eps.denominator, m=m, c=c,
        n_levels=n_levels, lattice_gap=float(gap), min_pair_gap=min_pair_gap,
        dps=dps_eff, rho2=math.nan, rho_inf=math.nan,
        extras={"xi_expr": _XI_EXPR, "eta_expr": _ETA_EXPR})
    if validate_rho2:
        from .. import spectral
        g = cfg.G_float
        r2h = spectral.rho_hat_p(g, 2)
        if r2h.value >= 1:
            raise ConfigError(
                f"rho_hat_2(G) = {r2h.value:.6f} >= 1: gain is not H2-dissipative")
        cfg.rho2 = r2h.value
        cfg.rho_inf = spectral.spectral_radius(np.abs(g))
    return cfg
