"""Built-in scenario library.

``case2_like`` and ``casefig7`` are the two-bus parameter sets used for the
post-fault phase-diagram studies; ``case3`` is the motor-load two-bus case;
``case4``/``case5`` use a modified IEEE 9-bus system in which the generator
at bus 2 is replaced by the converter, tied to bus 7 through ``Z_7``.
"""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Callable

import numpy as np

from .control import ControlParams, Mode
from .loads import ImParams, LoadDescriptor, im_impedance, size_motor
from .network import FaultSpec, Source, TwoBusNetwork, YBusNetwork, branch_admittance
from .pll import PllParams
from .simulator import Bases, Scenario, SimSettings

# constants for the power-injection surface; the active reference is not
# stated with them, full active current is assumed
SURFACE_CONTROL = ControlParams(I_max=1.2, K_q=2.0, U_low=0.9, I_cd_ref=1.0)

# two-bus parameter sets ---------------------------------------------------

FIG6_LOAD = complex(0.495, 0.0495)
# fault point half-way along the grid line, slightly resistive
REMOTE_ZCF = complex(0.01, 0.3)


def case2_like(mode: Mode = Mode.TRADITIONAL, fault: FaultSpec | None = None,
               t_end: float = 1.0) -> Scenario:
    """Impedance-load two-bus system with a remote fault on the grid line."""
    net = TwoBusNetwork(1.1, 0.2j, 0.2j, LoadDescriptor(Z_imp=FIG6_LOAD))
    fault = fault or FaultSpec(Z_cf=REMOTE_ZCF, Z_f=0.0, t_on=0.1, t_clear=0.2)
    return Scenario(
        name="case2_like", network=net, fault=fault,
        control=ControlParams(I_max=1.2, K_q=1.5, U_low=0.9, I_cd_ref=0.8, mode=mode),
        pll=PllParams(20.0, 500.0, 100 * math.pi),
        sim=SimSettings(dt=1e-4, t_end=t_end),
        bases=Bases(S_b=100.0, S_c=100.0, U_b=230.0),
    )


FIG7_ZC = complex(0.0684, 0.1879)


def casefig7(mode: Mode = Mode.TRADITIONAL, fault: FaultSpec | None = None,
             t_end: float = 1.0) -> Scenario:
    """Variant with a resistive feeder and stronger droop: faults at the load bus are nearby."""
    net = TwoBusNetwork(1.1, 0.2j, FIG7_ZC, LoadDescriptor(Z_imp=FIG6_LOAD))
    fault = fault or FaultSpec(Z_cf=FIG7_ZC, Z_f=0.0, t_on=0.1, t_clear=0.2)
    scn = case2_like(mode, fault, t_end)
    return replace(scn, name="casefig7", network=net,
                   control=replace(scn.control, K_q=2.0))


def table1_scenarios(mode: Mode = Mode.TRADITIONAL, duration: float = 0.1,
                     t_end: float = 0.5) -> dict[str, Scenario]:
    """One fault per fault category on the two-bus study systems."""
    t0 = 0.1

    def f(z_cf, z_f):
        return FaultSpec(Z_cf=z_cf, Z_f=z_f, t_on=t0, t_clear=t0 + duration)

    return {
        "pcc_bolted": replace(case2_like(mode, f(0j, 0j), t_end), name="pcc_bolted"),
        "nearby_reactive": replace(case2_like(mode, f(0.05j, 0j), t_end), name="nearby_reactive"),
        "nearby_resistive": replace(casefig7(mode, f(FIG7_ZC, 0j), t_end), name="nearby_resistive"),
        "remote": replace(case2_like(mode, f(REMOTE_ZCF, 0j), t_end), name="remote"),
    }


# motor-load two-bus case ---------------------------------------------------

CASE3_BASES = Bases(S_b=100.0, S_c=120.0, U_b=230.0, U_dc=640.0, omega_0=120 * math.pi)
CASE3_T_M = 0.7
CASE3_R_CF = 0.0
CASE3_MOTOR_SIZE = 2.0


def case3(mode: Mode = Mode.TRADITIONAL, duration: float = 0.18, t_on: float = 0.1,
          horizon: float = 1.2, T_m: float = CASE3_T_M, H_m: float = 0.6,
          R_cf: float = CASE3_R_CF, motor_size: float = CASE3_MOTOR_SIZE) -> Scenario:
    """Motor load fed through ``Z_g``; nearby fault at the load bus through 10 ohm."""
    im = ImParams(Z_s=0.295j, X_r=0.12, R_r=0.02, X_m=3.5, H_m=H_m, T_m=T_m, size=motor_size)
    net = TwoBusNetwork(1.2, 0.12j, 0.12j, LoadDescriptor(im=im, mix=1.0))
    fault = FaultSpec(Z_cf=complex(R_cf, 0.12), Z_f=CASE3_BASES.ohm_to_pu(10.0),
                      t_on=t_on, t_clear=t_on + duration)
    return Scenario(
        name="case3", network=net, fault=fault,
        control=ControlParams(I_max=1.0, K_q=2.0, U_low=0.9, I_cd_ref=0.833, I_cq_ref=0.0,
                              mode=mode),
        pll=PllParams(20.0, 1000.0, 120 * math.pi),
        sim=SimSettings(dt=1e-4, t_end=t_on + duration + horizon),
        bases=CASE3_BASES,
    )


# modified IEEE 9-bus -------------------------------------------------------

NINE_BUS_BASES = Bases(S_b=100.0, S_c=200.0, U_b=230.0, U_dc=640.0, omega_0=100 * math.pi)

# (from, to, R + jX, total charging B), buses numbered from 1
NINE_BUS_BRANCHES = (
    (1, 4, 0.0576j, 0.0),
    (3, 9, 0.0586j, 0.0),
    (4, 5, complex(0.010, 0.085), 0.176),
    (4, 6, complex(0.017, 0.092), 0.158),
    (5, 7, complex(0.032, 0.161), 0.306),
    (6, 9, complex(0.039, 0.170), 0.358),
    (7, 8, complex(0.0085, 0.072), 0.149),
    (8, 9, complex(0.0119, 0.1008), 0.209),
)
NINE_BUS_LOADS = {5: complex(1.25, 0.50), 6: complex(0.90, 0.30), 8: complex(1.00, 0.35)}
NINE_BUS_GEN_XD = {1: 0.0608, 3: 0.1813}
NINE_BUS_PV = {3: (0.85, 1.025)}
NINE_BUS_SLACK = (1, 1.04)


def power_flow(Y: np.ndarray, slack: int, V_slack: float, pv: dict, pq_load: dict,
               gfl_bus: int, gfl_current: complex, tol: float = 1e-11, maxit: int = 30) -> np.ndarray:
    """Newton power flow (0-based buses).

    The converter bus injects the fixed current ``gfl_current`` expressed in
    the frame of its own voltage (real part active), so its power is
    ``|V|*conj(gfl_current)``.  Returns complex bus voltages.
    """
    n = Y.shape[0]
    Vm = np.ones(n)
    Va = np.zeros(n)
    Vm[slack] = V_slack
    for b, (_, v) in pv.items():
        Vm[b] = v
    ang_idx = [b for b in range(n) if b != slack]
    mag_idx = [b for b in range(n) if b != slack and b not in pv]

    def mismatch(x):
        va, vm = Va.copy(), Vm.copy()
        va[ang_idx] = x[:len(ang_idx)]
        vm[mag_idx] = x[len(ang_idx):]
        V = vm * np.exp(1j * va)
        S = V * np.conj(Y @ V)
        spec = np.zeros(n, dtype=complex)
        for b, (p, _) in pv.items():
            spec[b] += p
        for b, s in pq_load.items():
            spec[b] -= s
        spec[gfl_bus] += vm[gfl_bus] * np.conj(gfl_current)
        d = S - spec
        return np.concatenate([d.real[ang_idx], d.imag[mag_idx]]), V

    x = np.concatenate([Va[ang_idx], Vm[mag_idx]])
    for _ in range(maxit):
        f, V = mismatch(x)
        if np.max(np.abs(f)) < tol:
            return V
        J = np.empty((len(x), len(x)))
        for j in range(len(x)):
            xp = x.copy()
            xp[j] += 1e-7
            J[:, j] = (mismatch(xp)[0] - f) / 1e-7
        x = x - np.linalg.solve(J, f)
    raise RuntimeError("9-bus power flow did not converge")


# steady current angle of the converter (rad); a small reactive injection
NINE_BUS_CURRENT_ANGLE = 0.123


def nine_bus(Z_7: complex, mix: float, I_cd_ref: float = 0.817, s0: float = 0.02,
             im: ImParams | None = None, I_cq_ref: float = 0.0) -> tuple[YBusNetwork, np.ndarray]:
    """Converter-fed 9-bus network with loads turned into impedances at the flow solution."""
    n = 9
    branches = [(i - 1, j - 1, z, b) for i, j, z, b in NINE_BUS_BRANCHES]
    branches.append((1, 6, Z_7, 0.0))
    Y = branch_admittance(n, branches)
    scale = NINE_BUS_BASES.current_scale
    pv = {b - 1: v for b, v in NINE_BUS_PV.items()}
    loads = {b - 1: s for b, s in NINE_BUS_LOADS.items()}
    V = power_flow(Y, NINE_BUS_SLACK[0] - 1, NINE_BUS_SLACK[1], pv, loads, 1,
                   complex(I_cd_ref, I_cq_ref) * scale)

    I_bus = Y @ V
    sources = []
    for b, xd in NINE_BUS_GEN_XD.items():
        k = b - 1
        E = V[k] + 1j * xd * I_bus[k]
        sources.append(Source(k, complex(E), complex(0.0, xd)))

    im = im or ImParams()
    load_buses = []
    for k, S in loads.items():
        U = complex(V[k])
        if mix > 0:
            motor = size_motor(im, U, S.real, s0)
            z_m = im_impedance(s0, motor) / motor.size / mix
            S_m = abs(U) ** 2 / z_m.conjugate()
            z_b = abs(U) ** 2 / (S - S_m).conjugate()
            load_buses.append((k, LoadDescriptor(Z_imp=z_b * (1 - mix), im=motor, mix=mix)))
        else:
            load_buses.append((k, LoadDescriptor(Z_imp=abs(U) ** 2 / S.conjugate())))
    names = [f"BUS{b}" for b in range(1, n + 1)]
    return YBusNetwork(Y, sources, injection_bus=1, load_buses=load_buses, names=names), V


def _nine_bus_case(name, Z_7, mix, mode, duration, t_end):
    im = ImParams() if mix > 0 else None
    i_q = -0.817 * math.tan(NINE_BUS_CURRENT_ANGLE)
    net, _ = nine_bus(Z_7, mix, im=im, I_cq_ref=i_q)
    fault = FaultSpec(Z_cf=Z_7, Z_f=NINE_BUS_BASES.ohm_to_pu(1.0), t_on=0.1,
                      t_clear=0.1 + duration, bus=6)
    return Scenario(
        name=name, network=net, fault=fault,
        control=ControlParams(I_max=1.2, K_q=1.5, U_low=0.9, I_cd_ref=0.817, I_cq_ref=i_q, mode=mode),
        pll=PllParams(20.0, 500.0, 100 * math.pi),
        sim=SimSettings(dt=1e-4, t_end=t_end),
        bases=NINE_BUS_BASES,
        meta=(("type", "ieee9"), ("Z_7", Z_7), ("mix", mix), ("s0", 0.02), ("im", im)),
    )


def case4(mode: Mode = Mode.TRADITIONAL, duration: float = 0.1, t_end: float = 1.0) -> Scenario:
    """Remote fault at bus 7, half the load as induction motors."""
    return _nine_bus_case("case4", complex(0.03, 0.3), 0.5, mode, duration, t_end)


def case5(mode: Mode = Mode.TRADITIONAL, duration: float = 0.1, t_end: float = 1.0) -> Scenario:
    """Nearby fault at bus 7, impedance load only."""
    return _nine_bus_case("case5", complex(0.05, 0.07), 0.0, mode, duration, t_end)


BUILTIN: dict[str, Callable[..., Scenario]] = {
    "case2_like": case2_like,
    "casefig7": casefig7,
    "case3": case3,
    "case4": case4,
    "case5": case5,
}


def builtin(name: str, mode: Mode = Mode.TRADITIONAL) -> Scenario:
    try:
        factory = BUILTIN[name]
    except KeyError:
        raise KeyError(f"unknown built-in case {name!r}; choose from {sorted(BUILTIN)}") from None
    return factory(mode=mode)
