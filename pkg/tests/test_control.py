import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gfl_lvrt.control import (
    ControlParams, CurrentRefs, DcCollapse, DcLinkState, Law, Mode, apply_law, dc_link_step,
    lvrt_decoupled, lvrt_traditional, lvrt_transition, power_actual, power_ideal, rotate,
    select_mode,
)

P3A = ControlParams(I_max=1.2, K_q=2.0, U_low=0.9, I_cd_ref=0.8)


def test_deep_sag_saturates():
    r = lvrt_traditional(0.2, P3A)
    assert (r.I_cd, r.I_cq) == (0.0, -1.2)


def test_proportional_branch():
    r = lvrt_traditional(0.5, P3A)
    assert r.I_cq == pytest.approx(-0.8)
    assert r.I_cd == pytest.approx(0.8)


def test_threshold_and_boundary():
    r = lvrt_traditional(0.9, P3A)
    assert (r.I_cd, r.I_cq) == (0.8, 0.0)
    b = lvrt_traditional(P3A.saturation_voltage, P3A)
    assert b.I_cq == pytest.approx(-1.2) and b.I_cd == pytest.approx(0.0, abs=1e-7)


def test_decoupled_rotation_examples():
    assert lvrt_decoupled(0.5, 0.0, P3A) == lvrt_traditional(0.5, P3A)
    r = rotate(CurrentRefs(1.0, 0.0), math.radians(30))
    assert r.I_cd == pytest.approx(0.8660254, abs=1e-6)
    assert r.I_cq == pytest.approx(0.5, abs=1e-6)


@given(st.floats(0, 1.2), st.floats(-math.pi / 2, math.pi / 2))
def test_rotation_isometry_and_ceiling(U, th):
    a = lvrt_traditional(U, P3A)
    b = lvrt_decoupled(U, th, P3A)
    assert b.magnitude == pytest.approx(a.magnitude, abs=1e-12)
    assert b.I_cd ** 2 + b.I_cq ** 2 <= P3A.I_max ** 2 + 1e-9


@given(st.floats(0, 1.2), st.floats(-math.pi / 2, math.pi / 2))
def test_decoupling_identity(U, th):
    ideal = power_ideal(lvrt_traditional(U, P3A), U)
    actual = power_actual(lvrt_decoupled(U, th, P3A), U, th)
    assert actual.P_c == pytest.approx(ideal.P_c, abs=1e-9)
    assert actual.Q_c == pytest.approx(ideal.Q_c, abs=1e-9)


def test_reactive_current_monotone_in_sag():
    U = np.linspace(P3A.saturation_voltage, P3A.U_low, 200)
    iq = [lvrt_traditional(u, P3A).I_cq for u in U]
    assert all(b >= a for a, b in zip(iq, iq[1:]))


def test_power_examples():
    assert power_ideal(CurrentRefs(0.8, -0.8), 0.5) == pytest.approx(power_ideal(CurrentRefs(0.8, -0.8), 0.5))
    p = power_ideal(CurrentRefs(0.8, -0.8), 0.5)
    assert (p.P_c, p.Q_c) == pytest.approx((0.4, 0.4))
    assert power_ideal(CurrentRefs(0.8, 0.0), 0.7).Q_c == 0.0
    z = power_ideal(CurrentRefs(0.8, -0.3), 0.0)
    assert (z.P_c, z.Q_c) == (0.0, 0.0)
    a = power_actual(CurrentRefs(1.0, 0.0), 1.0, math.pi / 2)
    assert (a.P_c, a.Q_c) == pytest.approx((0.0, 1.0), abs=1e-12)
    b = power_actual(CurrentRefs(0.0, -1.2), 0.3, -math.pi / 2)
    assert (b.P_c, b.Q_c) == pytest.approx((0.36, 0.0), abs=1e-12)
    r = CurrentRefs(0.6, -0.5)
    assert power_actual(r, 0.8, 0.0) == power_ideal(r, 0.8)


@given(st.floats(0, 1.2), st.floats(-math.pi, math.pi))
def test_power_bounded_by_apparent(U, th):
    r = lvrt_traditional(U, P3A)
    a = power_actual(r, U, th)
    assert abs(a.P_c) <= P3A.I_max * U + 1e-9 and abs(a.Q_c) <= P3A.I_max * U + 1e-9


def test_select_mode():
    trad = ControlParams(mode=Mode.TRADITIONAL)
    dec = ControlParams(mode=Mode.DECOUPLED)
    assert select_mode(0.5, trad, True) is Law.TRADITIONAL
    assert select_mode(0.05, dec, True) is Law.TRADITIONAL
    assert select_mode(0.15, dec, True) is Law.DECOUPLED
    assert select_mode(0.15, dec, False) is Law.NORMAL
    assert apply_law(Law.NORMAL, 0.3, 0.2, ControlParams(I_cd_ref=0.7, I_cq_ref=-0.1)) == CurrentRefs(0.7, -0.1)


def test_hysteresis():
    p = ControlParams()
    assert lvrt_transition(False, 0.89, p)
    assert not lvrt_transition(False, 0.9, p)
    assert lvrt_transition(True, 0.905, p)
    assert not lvrt_transition(True, 0.911, p)


def test_param_validation():
    with pytest.raises(ValueError):
        ControlParams(I_cd_ref=1.5, I_max=1.2)
    with pytest.raises(ValueError):
        ControlParams(U_low=1.2)
    assert ControlParams(I_max=0.0, I_cd_ref=0.0).saturation_voltage == 0.9


def test_dc_link_balance_and_sign():
    s = DcLinkState(1.0, 0.1, 0.8)
    assert dc_link_step(s, 0.8, 1e-3).U_dc == 1.0
    assert dc_link_step(s, -0.2, 1e-3).U_dc > 1.0
    with pytest.raises(ValueError):
        dc_link_step(s, 0.8, 0.0)
    with pytest.raises(DcCollapse):
        dc_link_step(DcLinkState(0.01, 0.1, 0.0), 5.0, 0.01)


def test_dc_link_energy_balance():
    s = DcLinkState(1.0, 0.1, 0.9)
    P_c, dt, n = 0.2, 1e-3, 200
    for _ in range(n):
        s = dc_link_step(s, P_c, dt)
    energy_in = (0.9 - P_c) * dt * n
    assert 0.1 * (s.U_dc ** 2 - 1.0) / 2 == pytest.approx(energy_in, rel=1e-9)
