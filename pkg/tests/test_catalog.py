import math

import numpy as np
import pytest

from ihoc.catalog import (EXPECTED, EntryId, build, entry_ids, fishery_equilibrium, fishery_stock,
                          halkin_adjoint, no_ponzi_witness, ramsey_rule_rate, ramsey_utility)
from ihoc.errors import BadParams
from ihoc.problem import dynamics_residual, integrate_state
from ihoc.verdicts import Verdict

R2 = math.sqrt(2.0)


@pytest.mark.parametrize("eid", entry_ids())
def test_closed_form_satisfies_dynamics(eid):
    e = build(eid)
    ref = e.reference(T=min(e.horizon, 50.0), n_nodes=501)
    assert dynamics_residual(e.problem, ref) <= 1e-10
    # the stored xdot is phi along the closed form; compare with its derivative
    h = 1e-5
    for t in np.linspace(0.5, min(e.horizon, 50.0) - 0.5, 7):
        dx = (e.closed_form.x(t + h) - e.closed_form.x(t - h)) / (2 * h)
        phi = e.problem.dyn(t, e.closed_form.x(t), e.closed_form.u(t))
        assert np.allclose(dx, phi, rtol=1e-7, atol=1e-8)


@pytest.mark.parametrize("eid", ["RegulatorB1", "HalkinModified", "RamseyGrowth", "FisheryNashPlayer"])
def test_round_trip_twenty(eid):
    e = build(eid)
    traj = integrate_state(e.problem, e.closed_form.u, 20.0, 1e-12)
    err = max(np.max(np.abs(x - e.closed_form.x(t))) for t, x in zip(traj.grid, traj.x))
    assert err <= 1e-6


def test_regulator_defaults():
    e = build("RegulatorB2")
    assert e.closed_form.x(1.0)[0] == pytest.approx(2 * math.exp(1 - R2))
    assert e.closed_form.u(1.0)[0] == pytest.approx(-2 * (1 + R2) * math.exp(1 - R2))
    assert float(e.problem.triple.omega(1.0)) == pytest.approx(math.exp(-2.0))
    assert float(e.problem.triple.nu(1.0)) == pytest.approx(math.exp(-3.0))
    assert e.params["eta_rate"] == pytest.approx((R2 - 1) / 2)


def test_halkin_adjoint_formula():
    t = np.linspace(0, 5, 11)
    p = halkin_adjoint(t, 0.3, 0.0, 0.5)
    assert np.allclose(p, 0.3 * np.exp(-t), rtol=1e-14)
    p1 = halkin_adjoint(t, 0.0, 1.0, 0.5)
    dp = -p1 + np.exp(-0.5 * t)
    h = 1e-6
    fd = (halkin_adjoint(t + h, 0.0, 1.0, 0.5) - halkin_adjoint(t - h, 0.0, 1.0, 0.5)) / (2 * h)
    assert np.allclose(fd, dp, atol=1e-8)


def test_fishery_closed_form():
    e = build("FisheryNashPlayer", {"c1": 1.0, "c2": 3.0, "alpha": 2.0, "r": 0.4, "x0": 3.0})
    u1, u2 = fishery_equilibrium(1.0, 3.0)
    assert u1 == pytest.approx(3.0 / 16.0, abs=1e-15) and u2 == pytest.approx(1.0 / 16.0, abs=1e-15)
    assert e.closed_form.u(3.0)[0] == pytest.approx(u1, abs=1e-8)
    c0 = (2.0 - 1.0 / 4.0) / 0.4
    z0 = math.log(3.0)
    for t in (0.0, 1.0, 10.0):
        assert e.closed_form.x(t)[0] == pytest.approx((z0 - c0) * math.exp(-0.4 * t) + c0, abs=1e-12)
    assert fishery_stock(e.closed_form.x(0.0))[0] == pytest.approx(3.0)
    other = build("FisheryNashPlayer", {"c1": 1.0, "c2": 3.0, "alpha": 2.0, "r": 0.4, "x0": 3.0, "player": 2})
    assert other.closed_form.u(3.0)[0] == pytest.approx(u2, abs=1e-8)


def test_ramsey_rule_rate_examples():
    assert ramsey_rule_rate({"r": 0.04, "n": 0.01, "m": 0.02, "rho": 0.02, "sigma": 2.0}) == pytest.approx(-0.005)
    assert ramsey_rule_rate({"r": 0.06, "n": 0.01, "m": 0.02, "rho": 0.03, "sigma": 2.0}) == pytest.approx(0.0, abs=1e-15)
    assert ramsey_rule_rate({"r": 0.02, "n": 0.01, "m": 0.03, "rho": 0.05, "sigma": 1.0}) == pytest.approx(-0.07)
    with pytest.raises(BadParams):
        ramsey_rule_rate({"sigma": 0.0})


def test_ramsey_candidate_follows_rule():
    e = build("RamseyGrowth")
    g = ramsey_rule_rate(e.params)
    c = e.closed_form.u
    assert math.log(c(10.0)[0] / c(0.0)[0]) / 10.0 == pytest.approx(g, rel=1e-12)
    assert ramsey_utility(1.0, 0.5) == pytest.approx(0.0)
    assert ramsey_utility(math.e, 1.0) == pytest.approx(1.0)


def test_no_ponzi_witness():
    q = build("RamseyGrowth").params
    w5, w10 = no_ponzi_witness(N=5.0), no_ponzi_witness(N=10.0)
    u_half = abs(float(ramsey_utility(q["wage"] / 2, q["sigma"])))
    assert w5.lower_bound == pytest.approx(5.0 - u_half / q["rho"], abs=1e-12)
    assert w10.lower_bound > w5.lower_bound
    for w in (w5, w10):
        assert w.objective >= w.lower_bound
        assert w.decay.verdict is Verdict.PASS
        assert w.limit <= 1e-4 * max(1.0, abs(w.k_at_N))
    assert w10.objective > w5.objective
    tiny = no_ponzi_witness(N=1e-9)
    assert tiny.lower_bound == pytest.approx(-u_half / q["rho"], abs=1e-8)
    with pytest.raises(BadParams):
        no_ponzi_witness(N=0.0)


@pytest.mark.parametrize("eid,params", [
    ("HalkinModified", {"rho": 1.0}),
    ("HalkinModified", {"rho": 0.0}),
    ("FisheryNashPlayer", {"alpha": 0.1}),
    ("FisheryNashPlayer", {"a": 1.0}),
    ("RegulatorB2", {"eta_rate": 0.5}),
    ("RegulatorB2", {"bogus": 1.0}),
    ("RegulatorB1", {"a": "abc"}),
    ("RamseyGrowth", {"r": 0.5}),
    ("NoSuchEntry", {}),
])
def test_bad_params(eid, params):
    with pytest.raises(BadParams):
        build(eid, params)


def test_expected_table_covers_every_entry():
    assert set(EXPECTED) == set(EntryId)
    assert EXPECTED[EntryId.HALKIN]["lambda0"] == 0.0
    assert EXPECTED[EntryId.RAMSEY]["degenerate"] is True
    assert EXPECTED[EntryId.FISHERY]["sufficiency_via"] == "ScriptH_x"
