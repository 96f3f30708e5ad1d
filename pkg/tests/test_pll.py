import pytest
from hypothesis import given, strategies as st

from gfl_lvrt.pll import PllParams, PllState, pll_derivatives, pll_equilibrium_check

P = PllParams(20.0, 500.0)


def test_equilibrium():
    assert pll_derivatives(PllState(0.3, 0.0), 0.0, P) == (0.0, 0.0)
    assert pll_equilibrium_check(PllState(0.3, 0.0), 0.0, P)
    assert not pll_equilibrium_check(PllState(0.3, 0.0), 0.05, P)


def test_direct_evaluation():
    assert pll_derivatives(PllState(), 0.1, P) == pytest.approx((2.0, 50.0))


@given(st.floats(-1, 1), st.floats(-5, 5))
def test_linearity(u, x):
    # with x_i = 0 both derivatives scale exactly with U_cq
    d1 = pll_derivatives(PllState(0.0, 0.0), u, P)
    d2 = pll_derivatives(PllState(0.0, 0.0), 2 * u, P)
    assert d2 == pytest.approx((2 * d1[0], 2 * d1[1]))


def _integrate(c, T, n=1000):
    s, h = PllState(), T / n
    for _ in range(n):
        def f(st):
            return pll_derivatives(st, c, P)
        k1 = f(s)
        k2 = f(PllState(s.delta_c + h / 2 * k1[0], s.x_i + h / 2 * k1[1]))
        k3 = f(PllState(s.delta_c + h / 2 * k2[0], s.x_i + h / 2 * k2[1]))
        k4 = f(PllState(s.delta_c + h * k3[0], s.x_i + h * k3[1]))
        s = PllState(s.delta_c + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                     s.x_i + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))
    return s


def test_closed_form_constant_input():
    c, T = 0.07, 0.01
    s = _integrate(c, T)
    assert s.delta_c == pytest.approx(P.K_p * c * T + P.K_i * c * T * T / 2, abs=1e-6)
    assert s.x_i == pytest.approx(P.K_i * c * T, abs=1e-9)


def test_sign_law():
    traj = [_integrate(-0.05, T, 100).delta_c for T in (0.01, 0.02, 0.03, 0.04)]
    steps = [b - a for a, b in zip([0.0] + traj, traj)]
    assert all(d < 0 for d in steps)
    assert all(abs(b) > abs(a) for a, b in zip(steps, steps[1:]))


def test_gain_validation():
    with pytest.raises(ValueError):
        PllParams(0.0, 1.0)
