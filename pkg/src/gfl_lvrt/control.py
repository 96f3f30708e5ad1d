"""LVRT current-reference laws, converter power and the DC-link proxy.

Currents are in the converter base, expressed in the PLL frame unless noted.
A negative ``I_cq`` injects reactive power into the grid.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class Mode(str, enum.Enum):
    TRADITIONAL = "traditional"
    DECOUPLED = "decoupled"


class Law(enum.IntEnum):
    """Effective law applied at an instant (codes shared with the kernels)."""

    NORMAL = 0
    TRADITIONAL = 1
    DECOUPLED = 2


class DcCollapse(RuntimeError):
    pass


@dataclass(frozen=True)
class ControlParams:
    I_max: float = 1.2
    K_q: float = 1.5
    U_low: float = 0.9
    I_cd_ref: float = 0.8
    mode: Mode = Mode.TRADITIONAL
    t_decouple_delay: float = 0.1
    I_cq_ref: float = 0.0
    hysteresis: float = 0.01
    tau_c: float = 0.005

    def __post_init__(self):
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(self.mode))
        if self.I_max < 0 or self.K_q <= 0:
            raise ValueError("I_max must be non-negative and K_q positive")
        if not 0.0 <= self.I_cd_ref <= self.I_max:
            raise ValueError("I_cd_ref must lie in [0, I_max]")
        if not 0.0 < self.U_low <= 1.0:
            raise ValueError("U_low must lie in (0, 1]")
        if self.tau_c < 0 or self.t_decouple_delay < 0 or self.hysteresis < 0:
            raise ValueError("time constants and hysteresis must be non-negative")

    @property
    def saturation_voltage(self) -> float:
        """Voltage below which the reactive current saturates at ``-I_max``."""
        return self.U_low - self.I_max / self.K_q


@dataclass(frozen=True)
class CurrentRefs:
    I_cd: float
    I_cq: float

    @property
    def magnitude(self) -> float:
        return math.hypot(self.I_cd, self.I_cq)

    @property
    def theta_c(self) -> float:
        return math.atan2(self.I_cq, self.I_cd)


@dataclass(frozen=True)
class PowerPair:
    P_c: float
    Q_c: float


@dataclass(frozen=True)
class PhaseError:
    theta_v: float
    theta_c: float


def reactive_law(U_c: float, p: ControlParams) -> CurrentRefs:
    """Voltage-proportional reactive current with the remaining capacity for active current."""
    if U_c < p.saturation_voltage:
        return CurrentRefs(0.0, -p.I_max)
    i_q = min(0.0, max(-p.I_max, -p.K_q * (p.U_low - U_c)))
    i_d = min(math.sqrt(max(p.I_max * p.I_max - i_q * i_q, 0.0)), p.I_cd_ref)
    return CurrentRefs(i_d, i_q)


def lvrt_traditional(U_c: float, p: ControlParams) -> CurrentRefs:
    return reactive_law(U_c, p)


def rotate(refs: CurrentRefs, theta_v: float) -> CurrentRefs:
    """Express references given along ``U_c`` in the PLL frame."""
    c, s = math.cos(theta_v), math.sin(theta_v)
    return CurrentRefs(refs.I_cd * c - refs.I_cq * s, refs.I_cq * c + refs.I_cd * s)


def lvrt_decoupled(U_c: float, theta_v: float, p: ControlParams) -> CurrentRefs:
    return rotate(reactive_law(U_c, p), theta_v)


def normal_refs(p: ControlParams) -> CurrentRefs:
    return CurrentRefs(p.I_cd_ref, p.I_cq_ref)


def power_ideal(refs: CurrentRefs, U_c: float) -> PowerPair:
    return PowerPair(refs.I_cd * U_c, -refs.I_cq * U_c)


def power_actual(refs: CurrentRefs, U_c: float, theta_v: float) -> PowerPair:
    c, s = math.cos(theta_v), math.sin(theta_v)
    return PowerPair(refs.I_cd * U_c * c + refs.I_cq * U_c * s,
                     refs.I_cd * U_c * s - refs.I_cq * U_c * c)


def select_mode(t_since_activation: float, p: ControlParams, lvrt_active: bool) -> Law:
    """Switches of the delayed-activation scheme: LVRT on/off, then law type."""
    if not lvrt_active:
        return Law.NORMAL
    if p.mode is Mode.DECOUPLED and t_since_activation >= p.t_decouple_delay - 1e-12:
        return Law.DECOUPLED
    return Law.TRADITIONAL


def lvrt_transition(active: bool, U_c: float, p: ControlParams) -> bool:
    """Next LVRT activation flag; exit needs ``U_low + hysteresis``."""
    if active:
        return U_c < p.U_low + p.hysteresis
    return U_c < p.U_low


def apply_law(law: Law, U_c: float, theta_v: float, p: ControlParams) -> CurrentRefs:
    if law is Law.NORMAL:
        return normal_refs(p)
    if law is Law.TRADITIONAL:
        return lvrt_traditional(U_c, p)
    return lvrt_decoupled(U_c, theta_v, p)


@dataclass(frozen=True)
class DcLinkState:
    """Energy-balance proxy of the DC link, ``C_dc*U_dc*dU_dc/dt = P_in - P_c``."""

    U_dc: float = 1.0
    C_dc: float = 0.1
    P_in: float = 0.0


def dc_link_derivative(U_dc: float, P_in: float, P_c: float, C_dc: float) -> float:
    if U_dc <= 0:
        raise DcCollapse("DC-link voltage proxy reached zero")
    return (P_in - P_c) / (C_dc * U_dc)


def dc_link_step(state: DcLinkState, P_c: float, dt: float) -> DcLinkState:
    """One RK4 step with ``P_c`` held over ``dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")

    def f(u):
        return dc_link_derivative(u, state.P_in, P_c, state.C_dc)

    u = state.U_dc
    k1 = f(u)
    k2 = f(u + 0.5 * dt * k1)
    k3 = f(u + 0.5 * dt * k2)
    k4 = f(u + dt * k3)
    u_new = u + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    if u_new <= 0:
        raise DcCollapse("DC-link voltage proxy reached zero")
    return DcLinkState(u_new, state.C_dc, state.P_in)
