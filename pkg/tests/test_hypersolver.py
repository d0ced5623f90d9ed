import math

import numpy as np
import pytest

from hyperstab import hypersolver as hs
from hyperstab.errors import ConfigError, DynamicsError, InputError


def _bump(x, c=0.5, w=0.25):
    return np.where(np.abs(x - c) < w, np.cos(np.pi * (x - c) / (2 * w)) ** 2,
                    0.0)


def transport_system(gain=0.5):
    return hs.HyperbolicSystem.linear([1.0], [[gain]])


def test_compatibility_examples():
    sys2 = hs.HyperbolicSystem.linear([1.0, 2.0], 2 * np.eye(2))
    x = np.linspace(0, 1, 101)
    zero = hs.GridState(x, np.zeros((2, 101)))
    assert hs.check_compatibility(sys2, zero, order=1)["passed"]

    c = 0.3
    const = hs.GridState(x, np.full((2, 101), c))
    rep = hs.check_compatibility(sys2, const, order=0)
    assert rep["residuals"][0] == pytest.approx(abs(c))
    assert not rep["passed"]

    # data vanishing near both endpoints passes orders 0 and 1
    u = np.vstack([_bump(x), -0.5 * _bump(x)])
    vanish = hs.GridState(x, u)
    rep = hs.check_compatibility(sys2, vanish, order=1)
    assert rep["passed"]

    with pytest.raises(InputError):
        hs.check_compatibility(sys2, zero, order=2)


def test_forward_zero_data_stays_zero():
    sys1 = transport_system()
    g = hs.GridState.from_function(lambda x: np.zeros((1, x.size)), 64, 1)
    traj = hs.solve_forward(sys1, g, 2.0, scheme="upwind", norms=("c0",))
    assert traj.norm_series["c0"][-1] == 0.0


def test_characteristics_exact_halving():
    sys1 = transport_system()
    g = hs.GridState.from_function(lambda x: _bump(x)[None, :], 256, 1)
    traj = hs.solve_forward(sys1, g, 3.0, scheme="characteristics",
                            snapshots=12, norms=("c0",))
    k = int(np.argmin(np.abs(traj.times - 3.0)))
    assert traj.times[k] == pytest.approx(3.0, abs=1e-12)
    assert np.max(np.abs(traj.snapshots[k].u - 0.125 * g.u)) < 1e-12


def test_upwind_maximum_principle():
    sys1 = transport_system(gain=-0.9)
    g = hs.GridState.from_function(lambda x: _bump(x)[None, :], 200, 1)
    traj = hs.solve_forward(sys1, g, 4.0, scheme="upwind", snapshots=80,
                            norms=("c0",))
    c0 = traj.norm_series["c0"]
    assert np.all(np.diff(c0) <= 1e-14)


def test_value_set_containment_upwind():
    sys1 = transport_system(gain=0.7)
    g = hs.GridState.from_function(lambda x: _bump(x)[None, :], 150, 1)
    lo, hi = g.u.min(), g.u.max()
    traj = hs.solve_forward(sys1, g, 2.5, scheme="upwind", snapshots=20,
                            norms=())
    for snap in traj.snapshots:
        assert snap.u.min() >= min(lo, 0.7 * lo) - 1e-12
        assert snap.u.max() <= max(hi, 0.7 * hi) + 1e-12


def test_upwind_cfl_guard():
    sys1 = transport_system()
    g = hs.GridState.from_function(lambda x: _bump(x)[None, :], 64, 1)
    with pytest.raises(ConfigError):
        hs.solve_forward(sys1, g, 1.0, scheme="upwind", dt=1.0 / 32)


def test_incompatible_data_rejected():
    sys1 = transport_system()
    g = hs.GridState.from_function(
        lambda x: np.full((1, x.size), 0.5), 64, 1)
    with pytest.raises(ConfigError):
        hs.solve_forward(sys1, g, 1.0)


def test_blow_up_ceiling():
    sys1 = transport_system(gain=3.0)   # amplifying boundary
    g = hs.GridState.from_function(lambda x: 1e-2 * _bump(x)[None, :], 128, 1)
    with pytest.raises(DynamicsError):
        hs.solve_forward(sys1, g, 12.0, scheme="characteristics",
                         snapshots=200, c1_ceiling=1e2, compat="off")


def test_discrete_norms_examples():
    x = np.linspace(0, 1, 201)
    zero = hs.GridState(x, np.zeros((1, 201)))
    res = hs.discrete_norms(zero, ("c0", "c1", "w2p:2", "w2p:inf"))
    assert all(v == 0 for v in res.values())

    lin = hs.GridState(x, x[None, :])
    res = hs.discrete_norms(lin, ("c0", "c1", "w2p:inf"))
    assert res["c0"] == pytest.approx(1.0)
    assert res["c1"] == pytest.approx(1.0)
    assert res["w2p:inf"] == pytest.approx(1.0, abs=1e-8)

    sine = hs.GridState(x, np.sin(2 * np.pi * x)[None, :])
    res = hs.discrete_norms(sine, ("w2p:2",))
    w = 2 * np.pi
    oracle = math.sqrt(0.5 + w ** 2 / 2 + w ** 4 / 2)   # exact channel integrals
    assert res["w2p:2"] == pytest.approx(oracle, rel=1e-3)
    # the second-derivative channel alone contributes (2 pi)^2 sqrt(1/2)
    assert math.sqrt(w ** 4 / 2) == pytest.approx(27.9155, abs=1e-3)


def test_discrete_norms_refinement_consistency():
    f = lambda x: np.sin(2 * np.pi * x)[None, :]
    coarse = hs.discrete_norms(hs.GridState.from_function(f, 100, 1), ("w2p:2",))
    fine = hs.discrete_norms(hs.GridState.from_function(f, 200, 1), ("w2p:2",))
    assert abs(coarse["w2p:2"] - fine["w2p:2"]) < 1e-2


def test_estimate_decay_examples():
    t = np.linspace(0, 10, 40)
    traj = hs.Trajectory(times=t, snapshots=[],
                         norm_series={"c0": np.exp(-0.5 * t),
                                      "flat": np.ones_like(t)})
    fit = hs.estimate_decay(traj, "c0")
    assert fit.nu == pytest.approx(0.5, abs=1e-12)
    assert fit.residual < 1e-12
    assert hs.estimate_decay(traj, "flat").nu == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InputError):
        hs.estimate_decay(traj, "missing")


def test_estimate_decay_trims_zeros():
    t = np.linspace(0, 10, 30)
    series = np.exp(-t)
    series[20:] = 0.0
    traj = hs.Trajectory(times=t, snapshots=[], norm_series={"c0": series})
    fit = hs.estimate_decay(traj, "c0")
    assert fit.trimmed
    assert fit.nu == pytest.approx(1.0, abs=1e-10)


def _tv_initial(x):
    prof = np.where((x > 0.2) & (x < 0.8),
                    np.sin(np.pi * (x - 0.2) / 0.6) ** 2, 0.0)
    return 0.01 * np.vstack([prof, -prof])


def test_timevarying_constant_coefficients_rate():
    lam = np.array([1.0, 2.0])
    sysTV = hs.TimeVaryingLinearSystem(
        A=lambda t, x: lam[:, None] * np.ones_like(x)[None, :],
        K=lambda t: 0.8 * np.eye(2), n=2)
    v0 = hs.GridState.from_function(_tv_initial, 200, 2)
    traj, verdict = hs.simulate_timevarying(sysTV, v0, 20.0, p=2)
    assert verdict["decays"]
    assert verdict["hypotheses"]["K_hat"] == pytest.approx(0.8, abs=1e-12)
    # decoupled channels decay at about lambda_min ln(1/0.8)
    assert verdict["nu"] == pytest.approx(math.log(1 / 0.8), rel=0.3)


def test_timevarying_zero_initial():
    sysTV = hs.TimeVaryingLinearSystem(
        A=lambda t, x: np.ones((2, x.size)), K=lambda t: 0.5 * np.eye(2), n=2)
    v0 = hs.GridState.from_function(lambda x: np.zeros((2, x.size)), 100, 2)
    traj, verdict = hs.simulate_timevarying(sysTV, v0, 10.0, p=1)
    key = next(iter(traj.norm_series))
    assert traj.norm_series[key][-1] == 0.0


def test_timevarying_hypotheses_unmet_flag():
    sysTV = hs.TimeVaryingLinearSystem(
        A=lambda t, x: np.ones((1, x.size)), K=lambda t: np.array([[1.2]]), n=1)
    v0 = hs.GridState.from_function(
        lambda x: 0.01 * _bump(x)[None, :], 100, 1)
    traj, verdict = hs.simulate_timevarying(sysTV, v0, 6.0, p=2)
    assert not verdict["hypotheses"]["met"]
    assert "hypotheses unmet" in verdict["status"]


def test_trajectory_csv_outputs(tmp_path):
    sys1 = transport_system()
    g = hs.GridState.from_function(lambda x: _bump(x)[None, :], 64, 1)
    traj = hs.solve_forward(sys1, g, 1.0, scheme="upwind", norms=("c0", "c1"))
    traj.norms_to_csv(tmp_path / "norms.csv")
    traj.snapshots[-1].to_csv(tmp_path / "state.csv")
    header = (tmp_path / "norms.csv").read_text().splitlines()[0]
    assert header == "t,c0,c1"
    header = (tmp_path / "state.csv").read_text().splitlines()[0]
    assert header == "x,u1"
