import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gfl_lvrt.loads import LoadDescriptor, OPEN
from gfl_lvrt.network import (
    DegenerateNetwork, FaultSpec, Source, TwoBusNetwork, YBusNetwork,
    angle, onfault_exact, onfault_overlay, parallel, polar, solve_ybus, thevenin_reduce,
    twobus_stage, twobus_to_ybus, wrap,
)
from gfl_lvrt.simulator import Bases

FIG6 = TwoBusNetwork(1.1, 0.2j, 0.2j, LoadDescriptor(Z_imp=0.495 + 0.0495j))


def test_thevenin_regression_values():
    eq = thevenin_reduce(FIG6, FIG6.load.Z_imp)
    assert eq.U_g_eq.real == pytest.approx(0.9214, abs=1e-3)
    assert eq.U_g_eq.imag == pytest.approx(-0.3544, abs=1e-3)
    assert eq.Z_eq.real == pytest.approx(0.0644, abs=1e-3)
    assert eq.Z_eq.imag == pytest.approx(0.3675, abs=1e-3)


def test_thevenin_without_grid_impedance():
    net = TwoBusNetwork(1.0, 0j, 0.1j, LoadDescriptor(Z_imp=1 + 0.2j))
    eq = thevenin_reduce(net, 1 + 0.2j)
    assert eq.U_g_eq == pytest.approx(1.0)
    assert eq.Z_eq == pytest.approx(0.1j)


def test_thevenin_open_load():
    eq = thevenin_reduce(FIG6, OPEN)
    assert eq.U_g_eq == 1.1
    assert eq.Z_eq == pytest.approx(0.4j)


def test_degenerate_network():
    with pytest.raises(DegenerateNetwork):
        thevenin_reduce(TwoBusNetwork(1.0, 0.2j, 0.0, LoadDescriptor(Z_imp=1.0)), -0.2j)


def test_angle_range():
    assert angle(complex(-1, -0.0)) == pytest.approx(math.pi)
    assert angle(-1j) == pytest.approx(-math.pi / 2)
    assert wrap(3 * math.pi) == pytest.approx(math.pi)
    assert abs(polar(2.0, 0.3)) == pytest.approx(2.0)


def test_parallel_open_branch():
    assert parallel(OPEN, 2 + 1j) == 2 + 1j
    assert parallel(2.0, 2.0) == pytest.approx(1.0)


@given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_phasor_field_roundtrip(a, b):
    if abs(b) < 1e-3:
        return
    assert abs((a / b) * b - a) < 1e-12 * max(1.0, abs(a))
    assert abs((a + b) - b - a) < 1e-12 * max(1.0, abs(a), abs(b))
    assert abs((a * b).conjugate() - a.conjugate() * b.conjugate()) < 1e-12 * max(1.0, abs(a * b))


@given(st.floats(0.1, 10.0))
def test_thevenin_scaling(k):
    base = thevenin_reduce(FIG6, FIG6.load.Z_imp)
    net = TwoBusNetwork(1.1, 0.2j * k, 0.2j * k, FIG6.load)
    eq = thevenin_reduce(net, FIG6.load.Z_imp * k)
    assert eq.Z_eq == pytest.approx(base.Z_eq * k, rel=1e-12)
    assert eq.U_g_eq == pytest.approx(base.U_g_eq, rel=1e-12)


def test_passive_impedance_angle():
    eq = thevenin_reduce(FIG6, FIG6.load.Z_imp)
    assert -math.pi / 2 < eq.theta_z <= math.pi / 2


# Fault circuits.  Z_cf is counted from the converter terminal (see the module
# docstring), so a PCC fault has Z_cf = 0 and a load-bus fault Z_cf = Z_c.

def test_overlay_pcc_bolted():
    eq = onfault_overlay(FIG6, FaultSpec(0j, 0j, 0.1, 0.2))
    assert eq.U_g_eq == 0 and eq.Z_eq == 0


def test_overlay_series_path():
    eq = onfault_overlay(FIG6, FaultSpec(FIG6.Z_c + 0.3j, 0j, 0.1, 0.2))
    assert eq.U_g_eq == 0
    assert eq.Z_eq == pytest.approx(FIG6.Z_c + 0.3j)


def test_exact_vs_bypass_with_small_fault_resistance():
    bases = Bases(S_b=100.0, S_c=100.0, U_b=230.0)
    Zf = bases.ohm_to_pu(1.0)
    assert Zf == pytest.approx(0.00189, abs=1e-5)
    fault = FaultSpec(0.03 + 0.3j, Zf, 0.1, 0.2)
    net = TwoBusNetwork(1.1, 0.5j, 0.2j, LoadDescriptor(Z_imp=2.0 + 0.2j))
    exact = onfault_exact(net, fault, net.load.Z_imp)
    approx = onfault_overlay(net, fault)
    assert abs(exact.Z_eq - approx.Z_eq) / abs(exact.Z_eq) < 0.05
    # residual source left behind the small fault resistance is tiny
    assert abs(exact.U_g_eq) < 0.05


def _ybus_twin(net, Z_l):
    return twobus_to_ybus(net, Z_l)


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_ybus_matches_closed_form(ir, ii):
    I = complex(ir, ii)
    eq = thevenin_reduce(FIG6, FIG6.load.Z_imp)
    yn = _ybus_twin(FIG6, FIG6.load.Z_imp)
    V = solve_ybus(yn, I)
    assert abs(V[yn.injection_bus] - eq.voltage(I)) < 1e-10


def test_ybus_residual_and_superposition():
    yn = _ybus_twin(FIG6, FIG6.load.Z_imp)
    Y = yn.admittance()
    I1, I2 = 0.3 - 0.2j, -0.5 + 0.9j
    V1, V2, V12, V0 = (solve_ybus(yn, i) for i in (I1, I2, I1 + I2, 0j))
    inj = yn.source_currents()
    inj[yn.injection_bus] += I1
    assert np.max(np.abs(Y @ V1 - inj)) < 1e-10
    assert np.max(np.abs(V12 - (V1 + V2 - V0))) < 1e-10


def test_ybus_zero_injection_is_source_only():
    # source 1.0 behind j0.1, line j0.2 to the PCC, 1 ohm shunt at the PCC
    y = 1 / 0.2j
    net = YBusNetwork(np.array([[y, -y], [-y, y + 1.0]]), [Source(0, 1.0, 0.1j)], injection_bus=1)
    V = solve_ybus(net, 0j)
    assert V[1] == pytest.approx(1.0 / (1.0 + 0.3j))


def test_twobus_stage_faulted_matches_ybus():
    fault = FaultSpec(0.1j, 0.01, 0.1, 0.2)        # on the feeder
    far = FaultSpec(0.3 + 0.25j, 0.02, 0.1, 0.2)    # on the grid line
    for f in (fault, far):
        sol = twobus_stage(FIG6, FIG6.load.Z_imp, f)
        # brute force: three-node mesh with the fault node explicit
        V_pcc = _mesh_solve(FIG6, FIG6.load.Z_imp, f, 0.4 - 0.7j)
        assert abs(sol.pcc.voltage(0.4 - 0.7j) - V_pcc) < 1e-10


def _mesh_solve(net, Z_l, f, I):
    """Nodes: PCC, load bus, fault point, grid source behind Z_g (or its split)."""
    if abs(f.Z_cf) <= abs(net.Z_c):
        a, b = f.Z_cf, net.Z_c - f.Z_cf
        # PCC -a- F -b- L -Zg- src ; F -Zf- gnd ; L -Zl- gnd
        branches = [(0, 2, a), (2, 1, b)]
        Zsrc, src_node = net.Z_g, 1
    else:
        c = f.Z_cf - net.Z_c
        branches = [(0, 1, net.Z_c), (1, 2, c)]
        Zsrc, src_node = net.Z_g - c, 2
    Y = np.zeros((3, 3), complex)
    for i, j, z in branches:
        if abs(z) == 0:
            z = 1e-12
        Y[i, i] += 1 / z; Y[j, j] += 1 / z; Y[i, j] -= 1 / z; Y[j, i] -= 1 / z
    Y[1, 1] += 1 / Z_l
    Y[2, 2] += 1 / f.Z_f
    Y[src_node, src_node] += 1 / Zsrc
    rhs = np.zeros(3, complex)
    rhs[src_node] += net.U_g / Zsrc
    rhs[0] += I
    return np.linalg.solve(Y, rhs)[0]


def test_fault_times():
    with pytest.raises(ValueError):
        FaultSpec(0j, 0j, 0.2, 0.1)
    assert FaultSpec(0j, 0j, 0.1, 0.1).duration == 0.0


def test_ohm_conversion_10_ohm():
    b = Bases(S_b=100.0, S_c=120.0, U_b=230.0)
    assert b.ohm_to_pu(10.0) == pytest.approx(10 * 100 / 230 ** 2)
    assert b.ohm_to_pu(10.0).real == pytest.approx(0.0189, abs=1e-4)
