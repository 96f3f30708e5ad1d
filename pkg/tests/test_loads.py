import math

import pytest
from hypothesis import given, strategies as st

from gfl_lvrt.loads import (
    ImParams, ImState, LoadDescriptor, breakdown_slip, composite_load, equilibrium_slip,
    im_impedance, im_slip_derivative, im_torque, size_motor,
)

T3 = ImParams(Z_s=0.295j, X_r=0.12, R_r=0.02, X_m=3.5)


def test_open_rotor_limit():
    assert im_impedance(1e-12, T3) == pytest.approx(T3.Z_s + 3.5j, rel=1e-6)
    assert im_impedance(0.0, T3) == T3.Z_s + 3.5j


def test_locked_rotor_hand_value():
    # j3.5 || (0.02 + j0.12) by hand: num = j3.5*(0.02+j0.12) = -0.42 + j0.07,
    # den = 0.02 + j3.62, ratio = (-0.42+j0.07)(0.02-j3.62)/(0.02^2+3.62^2)
    num = complex(-0.42, 0.07) * complex(0.02, -3.62)
    den = 0.02 ** 2 + 3.62 ** 2
    expected = 0.295j + num / den
    assert im_impedance(1.0, T3) == pytest.approx(expected, abs=1e-12)
    assert expected.real == pytest.approx(0.0186954, abs=1e-6)


def test_infinite_magnetizing_branch():
    p = ImParams(Z_s=0.295j, X_r=0.12, R_r=0.02, X_m=1e12)
    s = 0.05
    assert im_impedance(s, p) == pytest.approx(0.295j + 0.02 / s + 0.12j, rel=1e-9)


def test_torque_trivial_cases():
    assert im_torque(0j, 0.02, T3) == 0.0
    full = im_torque(1.0, 0.02, T3)
    assert im_torque(0.5, 0.02, T3) == pytest.approx(full / 4, rel=1e-12)


def test_slip_derivative_signs():
    p = ImParams(T_m=0.6, H_m=0.5)
    assert im_slip_derivative(ImState(0.02), 0.6, p) == 0.0
    assert im_slip_derivative(ImState(0.02), 0.0, p) == pytest.approx(0.6)


@given(st.floats(1e-4, 1.0))
def test_passivity(s):
    assert im_impedance(s, T3).real > 0


def test_impedance_shrinks_with_slip():
    s0 = equilibrium_slip(1.0, replace_tm(0.7))
    grid = [s0 + k * (1 - s0) / 200 for k in range(201)]
    mags = [abs(im_impedance(s, T3)) for s in grid]
    assert all(b < a for a, b in zip(mags, mags[1:]))


def replace_tm(tm):
    from dataclasses import replace
    return replace(T3, T_m=tm)


def test_equilibrium_and_breakdown():
    p = replace_tm(0.7)
    s = equilibrium_slip(1.0, p)
    assert im_torque(1.0, s, p) == pytest.approx(0.7, abs=1e-8)
    assert s < breakdown_slip(1.0, p)
    with pytest.raises(ValueError):
        equilibrium_slip(0.2, p)


def test_composite_limits_and_split():
    z_imp, z_m = 2.0 + 0.5j, 1.5 + 0.8j
    assert composite_load(z_imp, z_m, 0.0) == z_imp
    assert composite_load(z_imp, z_m, 1.0) == z_m
    # each branch alone represents the full load; at mix=0.5 each draws half
    z = composite_load(z_imp, z_m, 0.5)
    U = 1.0
    total = (abs(U) ** 2 / z.conjugate())
    p_imp = (abs(U) ** 2 / (z_imp / 0.5).conjugate())
    p_m = (abs(U) ** 2 / (z_m / 0.5).conjugate())
    assert total == pytest.approx(p_imp + p_m)
    assert p_imp.real == pytest.approx(0.5 * (1 / z_imp.conjugate()).real)


def test_size_motor_power_and_equilibrium():
    U = 0.98 * complex(math.cos(0.1), math.sin(0.1))
    m = size_motor(T3, U, 0.9, 0.02)
    z = im_impedance(0.02, m) / m.size
    assert (abs(U) ** 2 / z.conjugate()).real == pytest.approx(0.9)
    assert im_torque(U, 0.02, m) == pytest.approx(m.T_m)


def test_load_descriptor_validation():
    with pytest.raises(ValueError):
        LoadDescriptor(mix=0.5)
    with pytest.raises(ValueError):
        LoadDescriptor(Z_imp=1.0, im=T3, mix=1.5)
    assert LoadDescriptor().is_open()
