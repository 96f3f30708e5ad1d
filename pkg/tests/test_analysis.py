import math
from dataclasses import replace

import numpy as np
import pytest

from gfl_lvrt import analysis, cases, kernels
from gfl_lvrt.analysis import (
    NotFound, classify_fault, critical_angle, ep_exists_onfault, ep_solve_postfault,
    postfault_equivalent, q_crossover, qp_surface, stability_map, voltage_at,
)
from gfl_lvrt.control import ControlParams, Mode
from gfl_lvrt.network import FaultSpec, TheveninEquivalent, polar
from gfl_lvrt.simulator import initialize, simulate


@pytest.fixture(scope="module")
def surface():
    return qp_surface(cases.SURFACE_CONTROL)


def test_surface_grid_size(surface):
    assert surface.shape == (181, 121)


def test_zero_angle_row_is_ideal(surface):
    k = int(np.argmin(np.abs(surface.theta_v)))
    assert surface.theta_v[k] == 0.0
    assert np.array_equal(surface.P_actual[k], surface.P_ideal[k])
    assert np.allclose(surface.Q_actual[k], surface.Q_ideal[k], atol=1e-15)


def test_lagging_pll_loses_reactive_power(surface):
    k = int(np.argmin(np.abs(surface.theta_v + math.radians(45))))
    live = surface.U_c > 0
    assert np.all(surface.Q_actual[k, live] < surface.Q_ideal[k, live])


def test_mirror_relation(surface):
    # P(theta) + P(-theta) = 2 U I_cd cos(theta); rows k and n-1-k mirror in angle
    n = len(surface.theta_v)
    for k in (0, 30, 75):
        c = np.cos(surface.theta_v[k])
        s = surface.P_actual[k] + surface.P_actual[n - 1 - k]
        assert np.allclose(s, 2 * surface.P_ideal[k] * c, atol=1e-12)


def test_crossover_definition():
    p = cases.SURFACE_CONTROL
    for deg in (5, 20, 40):
        th = math.radians(deg)
        u = q_crossover(th, p)
        g = qp_surface(p, U_step=0.001, theta_deg=(deg, deg))
        above = g.U_c > u + 1e-3
        below = (g.U_c < u - 1e-3) & (g.U_c > 0)
        assert np.all(g.Q_actual[0, above] > g.Q_ideal[0, above])
        assert np.all(g.Q_actual[0, below] <= g.Q_ideal[0, below])
    assert math.isnan(q_crossover(-0.3, p))


# classification -------------------------------------------------------------

def _classify(scn, fault=None):
    return classify_fault(scn.network, fault or scn.fault, scn.control, scn.pll,
                          scn.bases.current_scale)


def test_classify_table_rows():
    assert _classify(cases.case2_like(), FaultSpec(0j, 0j, 0.1, 0.2)).row == "PCC,Negligible"
    assert _classify(cases.casefig7()).row == "Nearby,Decrease"
    assert _classify(cases.case2_like()).row == "Remote,Increase"
    reactive = _classify(cases.case2_like(), FaultSpec(0.05j, 0j, 0.1, 0.2))
    assert reactive.row == "Nearby,Negligible"


@pytest.mark.parametrize("factory", [cases.case2_like, cases.casefig7])
def test_classification_matches_short_simulation(factory):
    scn = factory(fault=None, t_end=0.3)
    scn = replace(scn, control=replace(scn.control, tau_c=0.0),
                  fault=FaultSpec(scn.fault.Z_cf, scn.fault.Z_f, 0.1, 0.12))
    fc = _classify(scn)
    ts = simulate(scn)
    k0, k1 = (int(np.argmin(abs(ts.t - t))) for t in (0.1, 0.12))
    drift = ts["delta_c"][k1] - ts["delta_c"][k0]
    assert np.sign(drift) == (1 if fc.delta_trend == "Increase" else -1)
    assert abs(drift) < 3 * abs(fc.drift)


# critical angle ---------------------------------------------------------------

def _fig_setups():
    for factory in (cases.case2_like, cases.casefig7):
        scn = factory()
        st = initialize(scn)
        yield scn, postfault_equivalent(scn), st


@pytest.mark.parametrize("idx", [0, 1])
def test_critical_angles_self_consistent(idx):
    scn, eq, st = list(_fig_setups())[idx]
    p = scn.control
    res = critical_angle(eq, st.delta_c, p, U_c0=st.algebraic.U_c)
    for d in res.angles:
        assert abs(voltage_at(d, eq, p).U_c - res.reference) < 1e-6
    # brute-force scan at 0.05 deg: every sign change must bracket a returned angle
    grid = np.radians(np.arange(-180.0, 180.0 + 1e-9, 0.05))
    vals = np.array([voltage_at(d, eq, p).U_c - res.reference for d in grid])
    flips = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    assert len(flips) == len(res.angles)
    for k in flips:
        assert any(grid[k] - 1e-9 <= d <= grid[k + 1] + 1e-9 for d in res.angles)


def test_critical_angles_symmetric_on_lossless_toy():
    # deep sag keeps the current saturated at (0, -I_max) everywhere on the circle
    p = ControlParams(I_max=1.2, K_q=10.0, U_low=0.9, I_cd_ref=0.0)
    eq = TheveninEquivalent(0.3 + 0j, 0.1j)
    res = critical_angle(eq, 0.0, p, U_c0=0.35)
    a = sorted(res.angles)
    assert len(a) == 2
    assert a[0] == pytest.approx(-a[1], abs=1e-7)
    ep = ep_solve_postfault(eq, p)
    assert ep.delta_c == pytest.approx(0.0, abs=1e-9)


def test_im_reference_mode():
    scn, eq, st = next(_fig_setups())
    res = critical_angle(eq, 1.0, scn.control, use_im_reference=True)
    assert res.reference == pytest.approx(voltage_at(1.0, eq, scn.control).U_c)
    assert any(abs(d - 1.0) < 1e-6 for d in res.angles)
    with pytest.raises(ValueError):
        critical_angle(eq, 1.0, scn.control)


# equilibrium points -------------------------------------------------------------

SAT = ControlParams(I_max=1.2, K_q=1.5, U_low=0.9, I_cd_ref=0.8)


def test_ep_exists_reactive_fault():
    ok, res = ep_exists_onfault(0.05j, SAT)
    assert ok and res == pytest.approx(0.0, abs=1e-12)


def test_ep_missing_resistive_fault():
    ok, res = ep_exists_onfault(0.05 + 0j, SAT)
    assert not ok
    assert abs(res) == pytest.approx(math.pi / 2, abs=1e-6)
    assert res < 0


def test_ep_exists_at_matching_sag():
    # theta_c = -60 deg needs I_cq = -I_max sin 60 = -K_q (U_low - U)
    U = SAT.U_low - SAT.I_max * math.sin(math.radians(60)) / SAT.K_q
    Z = polar(U / SAT.I_max, math.radians(60))
    ok, res = ep_exists_onfault(Z, SAT)
    assert ok, res
    ok_off, _ = ep_exists_onfault(Z * 1.2, SAT)
    assert not ok_off


def test_postfault_ep_traditional_matches_prefault_state():
    scn = cases.case2_like()
    st = initialize(scn)
    ep = ep_solve_postfault(postfault_equivalent(scn), scn.control)
    assert ep.delta_c == pytest.approx(st.delta_c, abs=1e-9)
    assert ep.U_c == pytest.approx(st.algebraic.U_c, abs=1e-9)
    assert ep.residual < 1e-10


def test_postfault_ep_decoupled_family():
    scn = cases.case2_like()
    ep = ep_solve_postfault(postfault_equivalent(scn), scn.control, Mode.DECOUPLED)
    assert len(ep.family) == 8
    assert max(err for _, err in ep.family) < 1e-8


def test_postfault_ep_bypassed_source():
    ep = ep_solve_postfault(TheveninEquivalent(0j, 0.05j), SAT)
    assert ep.U_c == pytest.approx(0.06)
    with pytest.raises(NotFound):
        ep_solve_postfault(TheveninEquivalent(0j, 0.05 + 0j), SAT)


# stability map ---------------------------------------------------------------------

@pytest.mark.parametrize("mode", [Mode.TRADITIONAL, Mode.DECOUPLED])
def test_stability_map_extremes(mode):
    sm = stability_map(cases.case2_like(), mode, offsets=[0.0], omegas=[0.0, 500.0])
    assert sm.labels[0, 0] == kernels.LABEL_STABLE
    assert sm.labels[0, 1] == kernels.LABEL_LOS
    assert analysis.LABEL_NAMES[int(sm.labels[0, 1])] == "LOS"


def test_stability_map_needs_impedance_load():
    with pytest.raises(ValueError):
        stability_map(cases.case3(), n_delta=3, n_omega=3)
