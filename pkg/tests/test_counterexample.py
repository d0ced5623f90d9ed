import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest

from hyperstab import counterexample as ce
from hyperstab import delay, hypersolver
from hyperstab.errors import ConfigError


@pytest.fixture(scope="module")
def cfg6():
    return ce.build_config(T=6.0, eps_request=1e-3)


@pytest.fixture(scope="module")
def art6(cfg6):
    return ce.run_certificate(cfg6, cells=400)


def test_build_config_reference_arithmetic():
    cfg = ce.build_config(T=6.0, a=Fraction(51, 100), xi="1.01", eta="1.01",
                          eps_request=1e-3, validate_rho2=False)
    a, xi, eta = 0.51, 1.01, 1.01
    assert a * (1 + xi + eta) == pytest.approx(1.5402)
    bound = max(xi, eta) / (a * (xi + eta))
    assert bound == pytest.approx(0.98043, abs=5e-5)
    assert float(cfg.c) == pytest.approx(0.99022, abs=5e-5)
    assert cfg.n_levels == int(cfg.T_float / float(cfg.r2)) + 1


def test_build_config_default_margins(cfg6):
    assert cfg6.rho2 == pytest.approx(0.7285, abs=2e-3)
    assert cfg6.rho2 < 1
    assert cfg6.rho_inf > 1
    assert float(cfg6.eps) <= 0.9 * cfg6.lattice_gap
    assert float(cfg6.eps) <= 0.4 * cfg6.min_pair_gap


def test_build_config_rejects_broken_contraction():
    with pytest.raises(ConfigError):
        ce.build_config(T=6.0, a=Fraction(2, 5), xi="1.01", eta="1.01")


def test_build_config_rejects_lattice_horizon():
    with pytest.raises(ConfigError):
        ce.build_config(T=6.0, Lambda1=1.0, adjust_T=False,
                        validate_rho2=False)


def test_seed_points_frozen_example():
    cfg = ce.build_config(T=1.3, eps_request=0.1, adjust_T=False,
                          validate_rho2=False)
    assert cfg.n_levels == 2
    cfg.eps = Fraction(1, 10)
    seeds = ce.seed_points(cfg)
    B = Fraction(1, 1000) / 16
    assert float(B) == pytest.approx(6.25e-5)
    assert seeds.s[0] == B / 4 and float(seeds.s[0]) == pytest.approx(1.5625e-5)
    assert float(seeds.t[0]) == pytest.approx(7.8125e-6)
    assert float(seeds.s[1]) == pytest.approx(3.125e-5)
    assert float(seeds.t[1]) == pytest.approx(2.34375e-5)
    allc = seeds.s + seeds.t
    assert all(0 < c <= B for c in allc)
    assert len(set(seeds.s)) == len(seeds.s)
    assert len(set(seeds.t)) == len(seeds.t)


def test_st_recursion_hand_example():
    cfg = ce.build_config(T=1.3, eps_request=0.1, adjust_T=False,
                          validate_rho2=False)
    seeds = ce.seed_points(cfg)
    seeds.s[0] = Fraction(4, 10000)
    seeds.t[1] = Fraction(8, 10000)
    with mp.workdps(cfg.dps):
        levels = ce.st_recursion(seeds, Fraction(1, 2), mp.mpf(1), mp.mpf(1))
        s11, t11 = ce.st_value(levels, 1, 1)
        assert float(s11) == pytest.approx(6e-4, abs=1e-18)
        assert float(t11) == pytest.approx(2e-4, abs=1e-18)
        from hyperstab.errors import InputError
        with pytest.raises(InputError):
            ce.st_value(levels, 1, len(levels[1]) + 1)
        with pytest.raises(InputError):
            ce.st_value(levels, len(levels), 1)


def test_st_recursion_zero_seeds_stay_zero():
    cfg = ce.build_config(T=4.0, eps_request=1e-3, validate_rho2=False)
    seeds = ce.seed_points(cfg)
    seeds.s = [Fraction(0)] * len(seeds.s)
    seeds.t = [Fraction(0)] * len(seeds.t)
    with mp.workdps(cfg.dps):
        levels = ce.st_recursion(seeds, cfg.a, cfg.xi, cfg.eta)
        assert all(x == 0 and y == 0 for lev in levels for x, y in lev)


def test_st_magnitude_bound(cfg6):
    seeds = ce.seed_points(cfg6)
    B = float(seeds.B)
    with mp.workdps(cfg6.dps):
        levels = ce.st_recursion(seeds, cfg6.a, cfg6.xi, cfg6.eta)
        for k, lev in enumerate(levels):
            cap = 4.0 ** k * B * (1 + 1e-12)
            assert all(abs(float(s)) <= cap and abs(float(t)) <= cap
                       for s, t in lev)


def test_tree_reference_times():
    # T = 10.3 avoids the delay lattice (an integer horizon with r1 = 1
    # sits on it); the child times follow the defining subtractions exactly
    cfg = ce.build_config(T=10.3, adjust_T=False, eps_request=1e-4,
                          validate_rho2=False)
    seeds = ce.seed_points(cfg)
    with mp.workdps(cfg.dps):
        levels = ce.st_recursion(seeds, cfg.a, cfg.xi, cfg.eta)
        tree = ce.build_time_tree(cfg, levels)
        t1 = tree.node((1,)).time
        assert t1 == cfg.T - cfg.r1        # exactly T - r1, bit for bit
        t2 = tree.node((2,)).time
        corr = cfg.T - cfg.r2 - t2
        eps3 = float(cfg.eps) ** 3
        assert 0 < abs(float(corr)) <= eps3


def test_tree_matches_bruteforce_enumerator(cfg6, art6):
    tree = art6.tree
    seeds = ce.seed_points(cfg6)
    with mp.workdps(cfg6.dps):
        levels = ce.st_recursion(seeds, cfg6.a, cfg6.xi, cfg6.eta)
        oracle = ce.enumerate_words_bruteforce(cfg6, levels, 12)
    words = {w for w in tree.nodes if 1 <= len(w) <= 12}
    assert words == set(oracle)
    for w in words:
        assert tree.node(w).time == oracle[w]   # bit-exact


def test_lattice_deviation_bound(art6):
    # every node time sits within C eps^(2+m) of its lattice point
    assert art6.distinctness.lattice_dev_constant < 10.0


def test_verify_distinct_passes_default(art6, cfg6):
    rep = art6.distinctness
    assert rep.passed
    assert rep.min_cross_class_gap >= float(cfg6.eps) / 2
    assert rep.min_gap_global > 0
    assert rep.n_in_window > 0


def test_verify_distinct_degenerate_seeds_collide():
    cfg = ce.build_config(T=6.0, eps_request=1e-3, validate_rho2=False)
    seeds = ce.seed_points(cfg)
    seeds.s = [Fraction(0)] * len(seeds.s)
    seeds.t = [Fraction(0)] * len(seeds.t)
    with mp.workdps(cfg.dps):
        levels = ce.st_recursion(seeds, cfg.a, cfg.xi, cfg.eta)
        tree = ce.build_time_tree(cfg, levels)
    rep = ce.verify_distinct(tree)
    assert not rep.passed
    assert rep.colliding_pair is not None
    w1, w2 = rep.colliding_pair
    assert tree.node(w1).time == tree.node(w2).time


def test_verify_distinct_small_horizon_trivial():
    cfg = ce.build_config(T=1.3, eps_request=1e-3, validate_rho2=False)
    seeds = ce.seed_points(cfg)
    with mp.workdps(cfg.dps):
        levels = ce.st_recursion(seeds, cfg.a, cfg.xi, cfg.eta)
        tree = ce.build_time_tree(cfg, levels)
    assert ce.verify_distinct(tree).passed


def test_dv_recursion_reference_values():
    cfg = ce.build_config(T=6.0, a=Fraction(51, 100), xi="1.01", eta="1.01",
                          eps_request=1e-3, validate_rho2=False)
    seeds = ce.seed_points(cfg)
    with mp.workdps(cfg.dps):
        levels = ce.st_recursion(seeds, cfg.a, cfg.xi, cfg.eta)
        tree = ce.build_time_tree(cfg, levels)
        ce.dv_recursion(tree)
        eps = float(cfg.eps)
        d1 = tree.node((1,)).dV
        d2 = tree.node((2,)).dV
        assert float(d1[0]) / eps == pytest.approx(0.98043, abs=5e-5)
        assert float(d1[1]) == 0
        assert float(d2[1]) / eps == pytest.approx(0.97073, abs=5e-5)
        assert float(d2[0]) == 0
        # contraction and alternating sparsity on every edge
        c = float(cfg.c)
        for nd in tree.nodes.values():
            assert min(abs(float(nd.dV[0])), abs(float(nd.dV[1]))) == 0
            for letter in (1, 2):
                ch = tree.nodes.get(nd.word + (letter,))
                if ch is None:
                    continue
                pn = max(abs(float(nd.dV[0])), abs(float(nd.dV[1])))
                cn = max(abs(float(ch.dV[0])), abs(float(ch.dV[1])))
                assert cn <= c * pn * (1 + 1e-12)
                assert float(ch.dV[1 if letter == 1 else 0]) == 0


def test_dv_depth_bound_in_window(art6, cfg6):
    c = float(cfg6.c)
    eps = float(cfg6.eps)
    for nd in art6.tree.in_unit_window():
        cap = eps * c ** nd.depth * (1 + 1e-9)
        assert max(abs(float(nd.dV[0])), abs(float(nd.dV[1]))) <= cap
        assert nd.depth > cfg6.T_float / (2 * float(cfg6.r1))


def test_dv_contraction_guard():
    cfg = ce.build_config(T=4.0, eps_request=1e-3, validate_rho2=False)
    seeds = ce.seed_points(cfg)
    with mp.workdps(cfg.dps):
        levels = ce.st_recursion(seeds, cfg.a, cfg.xi, cfg.eta)
        tree = ce.build_time_tree(cfg, levels)
        cfg.c = mp.mpf("0.9")      # below the true contraction bound
        with pytest.raises(ConfigError):
            ce.dv_recursion(tree)


def test_trace_interpolation_at_nodes(art6, cfg6):
    tree, trace = art6.tree, art6.trace
    eps = float(cfg6.eps)
    r2 = float(cfg6.r2)
    scale = max(eps, 1.0)
    for nd in tree.in_unit_window():
        jet = trace.eval_jet_mp(nd.time, order=1)
        for k in range(2):
            assert abs(float(jet[0][k] - nd.V[k])) < 1e-14 * scale
        if float(nd.time) < r2:
            for k in range(2):
                assert abs(float(jet[1][k] - nd.dV[k])) < 1e-12
        else:
            # on (r2, r1) the relation feeds the second channel, so the
            # derivative carries its intrinsic O(eps^2) correction
            diff = math.hypot(float(jet[1][0] - nd.dV[0]),
                              float(jet[1][1] - nd.dV[1]))
            assert diff < 10 * eps ** 2


def test_trace_vanishes_near_exclusions(art6, cfg6):
    eps = float(cfg6.eps)
    r1, r2 = float(cfg6.r1), float(cfg6.r2)
    for t0 in (0.0, r2, r1):
        probes = t0 + np.linspace(-eps / 3, eps / 3, 11)
        probes = probes[(probes >= 0) & (probes <= r1)]
        assert np.max(np.abs(art6.trace.eval(probes))) == 0.0


def test_trace_c1_norm_bound(art6, cfg6):
    rep = art6.synthesis
    eps = float(cfg6.eps)
    measured = max(max(rep.sup_values), max(rep.sup_derivatives))
    assert measured <= 20 * max(eps ** 2, rep.derivative_cap)
    assert rep.v1_constant < 20


def test_empty_window_gives_zero_trace(cfg6):
    seeds = ce.seed_points(cfg6)
    with mp.workdps(cfg6.dps):
        levels = ce.st_recursion(seeds, cfg6.a, cfg6.xi, cfg6.eta)
        tree = ce.TimeTree(cfg6, levels,
                           {(): ce.TreeNode((), mp.mpf(cfg6.T),
                                            ce.st_value(levels,
                                                        cfg6.n_levels, 1))})
    trace, rep = ce.synthesize_trace(tree, cfg6)
    assert rep.n_bumps == 0
    assert np.max(np.abs(trace.eval(np.linspace(0, 1, 100)))) == 0.0


def test_backward_zero_trace_zero_data(cfg6, art6):
    seeds = ce.seed_points(cfg6)
    with mp.workdps(cfg6.dps):
        levels = ce.st_recursion(seeds, cfg6.a, cfg6.xi, cfg6.eta)
        tree = ce.TimeTree(cfg6, levels,
                           {(): ce.TreeNode((), mp.mpf(cfg6.T),
                                            ce.st_value(levels,
                                                        cfg6.n_levels, 1))})
    trace, _ = ce.synthesize_trace(tree, cfg6)
    state, rep, data = ce.backward_initial_data(cfg6, trace, cells=200)
    assert np.max(np.abs(state.u)) == 0.0


def test_backward_transit_bookkeeping(art6, cfg6):
    data = art6.u0_eval
    x = np.linspace(0.0, 1.0, 801)
    s = data._transit_times(x)
    r2 = float(cfg6.r2)
    assert np.all(s >= (1 - x) * r2 * 0.75 - 1e-15)
    assert np.all(s <= (1 - x) * r2 * 1.25 + 1e-15)


def test_backward_supports_and_compat(art6, cfg6):
    state = art6.u0_state
    x = state.x
    eps = float(cfg6.eps)
    edge = x > 1 - eps / 3
    assert np.max(np.abs(state.u[:, edge])) == 0.0
    edge0 = x < eps / 3
    assert np.max(np.abs(state.u[:, edge0])) == 0.0
    assert art6.u0_report.compat_passed
    assert max(art6.u0_report.compat_residuals.values()) <= 1e-10
    assert art6.u0_report.c1_u0 <= art6.u0_report.c1_u0_upper * (1 + 1e-9)


def test_certificate_fields(art6, cfg6):
    cert = art6.certificate
    eps = float(cfg6.eps)
    # v'(T) lands on eps (1, 0) up to the quadratic defect
    assert art6.propagation.deriv_at_T[0] == pytest.approx(eps, rel=5e-3)
    assert abs(art6.propagation.deriv_at_T[1]) < 10 * eps ** 2
    assert cert.dvTarget == pytest.approx(eps)
    assert cert.mismatch < 10 * eps ** 2
    assert cert.details["value_residual"] < 1e-30
    assert cert.details["time_residual"] < 1e-30
    assert cert.amplification >= cert.theoreticalFloor / 4
    assert cert.passed


def test_certificate_aborts_on_collision():
    cfg = ce.build_config(T=6.0, eps_request=1e-3, validate_rho2=False)
    # forcing equal seeds makes same-class times collide exactly
    import hyperstab.counterexample.certificate as cert_mod
    orig = ce.seed_points

    def degenerate(config):
        seeds = orig(config)
        seeds.s = [Fraction(0)] * len(seeds.s)
        seeds.t = [Fraction(0)] * len(seeds.t)
        return seeds

    cert_mod.seed_points, saved = degenerate, cert_mod.seed_points
    try:
        with pytest.raises(ConfigError):
            ce.run_certificate(cfg, cells=100)
    finally:
        cert_mod.seed_points = saved


def test_delay_engine_hits_node_values(art6, cfg6):
    # feeding the synthesized trace into the generic state-dependent engine
    # reproduces V at every isolated tree node inside its horizon
    r1 = float(cfg6.r1)
    out = delay.simulate_state_dependent(
        cfg6.G_float[:, 0], cfg6.G_float[:, 1], r1, float(cfg6.r2),
        art6.trace, cfg6.T_float, dt=art6.synthesis.width_base / 16)
    jets = art6.propagation.jets
    checked = 0
    for nd in art6.tree.sorted_nodes():
        tf = float(nd.time)
        if tf > out.t1:
            continue
        approx = out.eval(tf)
        exact = np.array([float(nd.V[0]), float(nd.V[1])])
        assert np.max(np.abs(approx - exact)) < 1e-8
        checked += 1
    assert checked > 10


def test_certificate_mismatch_scaling_small_horizon():
    scal = ce.mismatch_scaling(T=4.0, eps_values=(2e-3, 1e-3, 5e-4))
    assert scal["slope"] == pytest.approx(2.0, abs=0.15)


def test_m2_variant_runs():
    cfg = ce.build_config(T=4.0, eps_request=1e-2, m=2, validate_rho2=False)
    art = ce.run_certificate(cfg, cells=200)
    eps = float(cfg.eps)
    # seeds shrink with the higher derivative order
    assert float(ce.seed_points(cfg).B) == pytest.approx(
        eps ** 4 / 4.0 ** cfg.n_levels)
    assert art.certificate.derivAtT == pytest.approx(eps, rel=0.02)
    assert art.certificate.mismatch < 10 * eps ** 2


def test_round_trip_against_forward_solver(art6, cfg6):
    sys2 = ce.counterexample_system(cfg6)
    traj = hypersolver.solve_forward(sys2, art6.u0_state, float(cfg6.r1),
                                     scheme="characteristics", snapshots=4,
                                     norms=())
    tt = traj.trace.times()
    sup = float(np.max(np.abs(traj.trace.values - art6.trace.eval(tt))))
    assert sup < 5e-6


def test_tree_csv_dump(tmp_path, art6):
    path = tmp_path / "tree.csv"
    ce.tree_to_csv(art6.tree, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("word,depth,twos,time")
    assert len(lines) == len(art6.tree.nodes) + 1
