import math

import numpy as np
import pytest

from hyperstab import delay
from hyperstab.delay import (DelaySystem, characteristic_value,
                             invert_time_map, rightmost_roots,
                             robustness_sweep, simulate_linear,
                             simulate_state_dependent)
from hyperstab.errors import DynamicsError, InputError
from hyperstab.signals import SampledSignal


def _ones_history(n, rmax, dt=None):
    dt = dt or rmax / 32
    m = int(round(rmax / dt)) + 1
    return SampledSignal(-rmax, dt, np.ones((m, n)))


def test_simulate_linear_scalar_geometric_exact():
    sys1 = DelaySystem([[0.5]], [1.0])
    sig = simulate_linear(sys1, _ones_history(1, 1.0), 6.0)
    t = sig.times()
    expect = 0.5 ** (np.floor(t + 1e-12) + 1)
    assert np.max(np.abs(sig.values[:, 0] - expect)) < 1e-13


def test_simulate_linear_zero_gain():
    sys0 = DelaySystem(np.zeros((2, 2)), [0.7, 1.0])
    sig = simulate_linear(sys0, _ones_history(2, 1.0), 3.0)
    assert np.max(np.abs(sig.values[1:])) == 0.0


def test_simulate_linear_cross_coupled_hand_iterated():
    # hand-iterating x_i(t) = 0.5 x_j(t - 1) from history (1,1) gives the
    # same geometric staircase in both components
    sys2 = DelaySystem([[0.0, 0.5], [0.5, 0.0]], [1.0, 1.0])
    sig = simulate_linear(sys2, _ones_history(2, 1.0), 4.0)
    expect = 0.5 ** (np.floor(sig.times() + 1e-12) + 1)
    assert np.max(np.abs(sig.values - expect[:, None])) < 1e-13


def test_simulate_linear_linearity_and_shift():
    sys2 = DelaySystem([[0.3, 0.2], [-0.1, 0.4]], [0.8, 1.3])
    rmax = 1.3
    dt = 0.8 / 32
    m = int(math.ceil(rmax / dt)) + 1
    t = -rmax + dt * np.arange(m)
    h1 = SampledSignal(-rmax, dt, np.column_stack([np.sin(t), np.cos(2 * t)]))
    h2 = SampledSignal(-rmax, dt, np.column_stack([t * t, np.exp(t / 2)]))
    both = SampledSignal(-rmax, dt, 2 * h1.values - 3 * h2.values)
    s1 = simulate_linear(sys2, h1, 4.0, dt=dt)
    s2 = simulate_linear(sys2, h2, 4.0, dt=dt)
    sb = simulate_linear(sys2, both, 4.0, dt=dt)
    assert np.max(np.abs(sb.values - (2 * s1.values - 3 * s2.values))) < 1e-10
    # shift equivariance: restarting from the simulated segment reproduces
    # the tail of the one-shot run
    t1 = 2.0
    k1 = int(round(t1 / dt))
    win = s1.values[k1 - int(round(rmax / dt)): k1 + 1]
    h_tail = SampledSignal(-rmax, dt, win)
    tail = simulate_linear(sys2, h_tail, 2.0, dt=dt)
    assert np.max(np.abs(tail.values - s1.values[k1: k1 + tail.nsamples])) < 1e-9


def test_characteristic_value_examples():
    sys1 = DelaySystem([[0.5]], [1.0])
    assert characteristic_value(sys1, 0.0) == pytest.approx(0.5)
    assert abs(characteristic_value(sys1, -math.log(2))) < 1e-14
    sys0 = DelaySystem(np.zeros((3, 3)), [1.0, 2.0, 0.5])
    assert characteristic_value(sys0, 1.7 + 0.3j) == pytest.approx(1.0)


def test_rightmost_roots_scalar_band():
    sys1 = DelaySystem([[0.5]], [1.0])
    rep = rightmost_roots(sys1, rect=(-2.0, 1.0, 20.0))
    assert rep.complete
    # closed form: roots at -ln2 + 2 pi i k
    ks = [0, 1, 2, 3]
    expected = sorted([-math.log(2)] * 1 + [abs(2 * math.pi * k) for k in ks])
    assert len(rep.roots) == 7
    assert rep.winding_total == 7
    assert rep.rightmost == pytest.approx(-math.log(2), abs=1e-10)
    for z in rep.roots:
        assert z.real == pytest.approx(-math.log(2), abs=1e-8)


def test_rightmost_roots_coarse_grid_flagged_incomplete():
    # a 2x2 seed grid misses most of the seven roots in the band, and the
    # winding count exposes it
    sys1 = DelaySystem([[0.5]], [1.0])
    rep = rightmost_roots(sys1, rect=(-2.0, 1.0, 20.0), grid=(2, 2))
    assert not rep.complete
    assert rep.winding_total > len(rep.roots)


def test_simulate_linear_short_history_rejected():
    sys1 = DelaySystem([[0.5]], [1.0])
    short = SampledSignal(-0.5, 1 / 64, np.ones((17, 1)))
    with pytest.raises(InputError):
        simulate_linear(sys1, short, 2.0)


def test_rightmost_roots_empty_and_unstable():
    rep = rightmost_roots(DelaySystem(np.zeros((2, 2)), [1.0, 0.5]),
                          rect=(-2.0, 1.0, 10.0))
    assert rep.roots == [] and rep.winding_total == 0 and rep.complete
    rep = rightmost_roots(DelaySystem([[2.0]], [1.0]), rect=(-1.0, 1.5, 5.0))
    assert rep.rightmost == pytest.approx(math.log(2), abs=1e-10)


def test_root_free_half_plane_implies_decay():
    sys1 = DelaySystem([[0.5]], [1.0])
    delta = 0.3
    rep = rightmost_roots(sys1, rect=(-delta, 1.0, 50.0))
    assert rep.complete and rep.winding_total == 0
    sig = simulate_linear(sys1, _ones_history(1, 1.0), 20.0)
    t = sig.times()
    mask = (t > 1.0) & (sig.values[:, 0] > 0)
    slope = np.polyfit(t[mask], np.log(sig.values[mask, 0]), 1)[0]
    assert slope <= -delta / 2


def test_robustness_sweep_scalar_closed_form():
    sys1 = DelaySystem([[0.5]], [1.0])
    eps = 0.1
    rep = robustness_sweep(sys1, eps, samples=12, seed=1,
                           rect=(-2.0, 0.5, 15.0))
    # perturbing r rescales the real root to -ln2 / r~
    worst_expected = -math.log(2) / (1.0 + eps)
    assert rep.worst_real_part <= worst_expected + 1e-8
    assert rep.worst_real_part >= -math.log(2) / (1.0 - eps) - 1e-8
    assert "robustly stable" in rep.rho0_verdict


def test_robustness_sweep_zero_gain_and_diagonal():
    rep = robustness_sweep(DelaySystem(np.zeros((1, 1)), [1.0]), 0.2,
                           samples=4, seed=0, rect=(-2.0, 0.5, 10.0))
    assert rep.worst_real_part == -math.inf
    assert "robustly stable" in rep.rho0_verdict

    sys2 = DelaySystem(np.diag([0.9, 0.9]), [1.0, 0.7])
    rep = robustness_sweep(sys2, 0.05, samples=8, seed=2,
                           rect=(-1.0, 0.3, 15.0))
    for rt, val in rep.samples:
        oracle = max(math.log(0.9) / r for r in rt)
        assert val == pytest.approx(oracle, abs=1e-7)
    assert rep.worst_real_part < 0


def _c2_bump(t, c, w):
    z = np.clip((t - c) / w, -1.0, 1.0)
    return np.where(np.abs(z) < 1, (1 - z * z) ** 3, 0.0)


def _c2_bump_deriv(t, c, w):
    z = np.clip((t - c) / w, -1.0, 1.0)
    return np.where(np.abs(z) < 1, -6 * z * (1 - z * z) ** 2 / w, 0.0)


def _bump_trace(dt, r1, specs):
    n = int(round(r1 / dt)) + 1
    t = dt * np.arange(n)
    vals = np.zeros((n, 2))
    ders = np.zeros((n, 2))
    for c, w, a1, a2 in specs:
        vals[:, 0] += a1 * _c2_bump(t, c, w)
        vals[:, 1] += a2 * _c2_bump(t, c, w)
        ders[:, 0] += a1 * _c2_bump_deriv(t, c, w)
        ders[:, 1] += a2 * _c2_bump_deriv(t, c, w)
    return SampledSignal(0.0, dt, vals, ders)


G1 = np.array([0.51, -0.51])
G2 = np.array([0.51 * 1.01, 0.51 * 1.01])
R1, R2 = 1.0, 2 ** -0.5


def test_state_dependent_zero_trace():
    tr = _bump_trace(R1 / 512, R1, [])
    out = simulate_state_dependent(G1, G2, R1, R2, tr, 4.0)
    assert np.max(np.abs(out.values)) == 0.0


def test_state_dependent_constant_offset_shifts_delay():
    # v2 == delta on the read window makes the second delay exactly r2+delta
    delta = 0.02
    dt = R1 / 2048
    n = int(round(R1 / dt)) + 1
    t = dt * np.arange(n)
    vals = np.column_stack([1e-3 * _c2_bump(t, 0.45, 0.08),
                            np.full(n, delta)])
    ders = np.column_stack([1e-3 * _c2_bump_deriv(t, 0.45, 0.08), np.zeros(n)])
    tr = SampledSignal(0.0, dt, vals, ders)
    out = simulate_state_dependent(G1, G2, R1, R2, tr, R1 + R2 / 2, dt=dt)
    s = np.linspace(R1 + 0.05, R1 + R2 / 2 - 0.05, 40)
    expect = (np.outer(tr.eval(s - R1)[:, 0], G1)
              + np.outer(tr.eval(s - R2 - delta)[:, 1], G2))
    assert np.max(np.abs(out.eval(s) - expect)) < 1e-9


def test_state_dependent_frozen_matches_linear_twin():
    dt = R1 / 2048
    tr = _bump_trace(dt, R1, [(0.45, 0.05, 1e-3, 5e-4),
                              (0.62, 0.04, -8e-4, 6e-4)])
    out = simulate_state_dependent(G1, G2, R1, R2, tr, 4.0, dt=dt,
                                   state_coupling=False)
    hist = SampledSignal(-R1, dt, tr.values, tr.derivatives)
    lin = simulate_linear(DelaySystem(np.column_stack([G1, G2]), [R1, R2]),
                          hist, 4.0 - R1, dt=dt)
    s = lin.times() + R1
    keep = s <= out.t1 + 1e-12
    assert np.max(np.abs(out.eval(s[keep]) - lin.values[keep])) < 1e-9


def test_monotone_map_inversion_round_trip():
    dt = R1 / 1024
    tr = _bump_trace(dt, R1, [(0.45, 0.05, 1e-3, 5e-4)])
    out = simulate_state_dependent(G1, G2, R1, R2, tr, 4.0, dt=dt)

    def eval_past(ts):
        ts = np.asarray(ts, dtype=float)
        return out.eval(ts), out.eval_derivative(ts)

    s = np.linspace(R1 + 0.1, 3.9, 50)
    tstar = invert_time_map(eval_past, R2, s)
    fwd = tstar + R2 + out.eval(tstar)[:, 1]
    assert np.max(np.abs(fwd - s)) < 1e-12


def test_state_dependent_guard_rails():
    dt = R1 / 256
    n = int(round(R1 / dt)) + 1
    t = dt * np.arange(n)
    big = np.column_stack([np.zeros(n), 0.6 * R2 * np.sin(np.pi * t) ** 2])
    dbig = np.gradient(big, dt, axis=0)
    with pytest.raises(DynamicsError):
        simulate_state_dependent(G1, G2, R1, R2,
                                 SampledSignal(0.0, dt, big, dbig), 2.0)
    short = SampledSignal(0.0, dt, np.zeros((n // 2, 2)), np.zeros((n // 2, 2)))
    with pytest.raises(InputError):
        simulate_state_dependent(G1, G2, R1, R2, short, 2.0)


def test_apply_state_relation_matches_engine():
    dt = R1 / 2048
    tr = _bump_trace(dt, R1, [(0.45, 0.05, 1e-3, 5e-4),
                              (0.62, 0.04, -8e-4, 6e-4)])
    out = simulate_state_dependent(G1, G2, R1, R2, tr, 3.0, dt=dt)

    def eval_past(ts):
        ts = np.asarray(ts, dtype=float)
        return out.eval(ts), out.eval_derivative(ts)

    s = 2.25
    tstar = float(invert_time_map(eval_past, R2, np.array([s]))[0])
    child1 = (tuple(out.eval(s - R1)), tuple(out.eval_derivative(s - R1)))
    child2 = (tuple(out.eval(tstar)), tuple(out.eval_derivative(tstar)))
    jet = delay.apply_state_relation(child1, child2, G1, G2, order=1)
    assert np.allclose(jet[0], out.eval(s), atol=1e-9)
    assert np.allclose(jet[1], out.eval_derivative(s), atol=1e-8)


def test_apply_state_relation_mpf_operands():
    import mpmath as mp
    z, o = mp.mpf(0), mp.mpf("0.001")
    child1 = ((o, z), (2 * o, z), (z, z))
    child2 = ((z, o), (z, 3 * o), (z, o))
    jet = delay.apply_state_relation(child1, child2,
                                     (mp.mpf("0.51"), mp.mpf("-0.51")),
                                     (mp.mpf("0.515"), mp.mpf("0.515")),
                                     order=2)
    assert isinstance(jet[0][0], mp.mpf)
    # the derivative channel carries the - d2^2/(1+d2) correction
    d2 = 3 * o
    corr = d2 - d2 * d2 / (1 + d2)
    assert abs(jet[1][0] - (2 * o * mp.mpf("0.51") + corr * mp.mpf("0.515"))) < 1e-20


def test_system_file_round_trip(tmp_path):
    sys2 = DelaySystem([[0.1, -0.2], [0.3, 0.4]], [0.9, 1.1])
    path = tmp_path / "sys.txt"
    sys2.to_file(path)
    back = DelaySystem.from_file(path)
    assert np.array_equal(back.K, sys2.K)
    assert np.array_equal(back.r, sys2.r)
