"""Composite load: constant impedance in parallel with a single-cage induction motor.

The motor circuit is stator ``Z_s`` in series with ``jX_m || (R_r/s + jX_r)``.
Motor parameters are per-unit on the motor's own rating; ``size`` is that
rating expressed in system per-unit, so the system-side impedance is
``Z_motor / size``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

OPEN = complex(math.inf, 0.0)
S_MIN = 1e-9


@dataclass(frozen=True)
class ImParams:
    Z_s: complex = 0.295j
    X_r: float = 0.12
    R_r: float = 0.02
    X_m: float = 3.5
    H_m: float = 0.6
    T_m: float = 0.7
    size: float = 1.0

    def __post_init__(self):
        if self.R_r <= 0 or self.X_m <= 0 or self.H_m <= 0 or self.size <= 0:
            raise ValueError("induction motor needs R_r, X_m, H_m, size > 0")


@dataclass(frozen=True)
class ImState:
    s_r: float


@dataclass(frozen=True)
class LoadDescriptor:
    """Impedance part ``Z_imp`` (full-size) and optional motor taking fraction ``mix``."""

    Z_imp: complex = OPEN
    im: Optional[ImParams] = None
    mix: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.mix <= 1.0:
            raise ValueError(f"load mix fraction must lie in [0, 1], got {self.mix}")
        if self.mix > 0 and self.im is None:
            raise ValueError("a motor share needs motor parameters")

    @property
    def has_motor(self) -> bool:
        return self.im is not None and self.mix > 0

    def is_open(self) -> bool:
        return not self.has_motor and math.isinf(abs(self.Z_imp))

    def impedance(self, s_r: Optional[float] = None) -> complex:
        """System-side load impedance at slip ``s_r``."""
        if not self.has_motor:
            return self.Z_imp
        return composite_load(self.Z_imp, im_impedance(s_r, self.im) / self.im.size, self.mix)


def _rotor(s_r: float, p: ImParams) -> complex:
    return p.R_r / max(s_r, S_MIN) + 1j * p.X_r


def im_impedance(s_r: float, p: ImParams) -> complex:
    """Motor input impedance (motor base) at slip ``s_r``; ``s_r -> 0`` opens the rotor."""
    if s_r <= 0:
        return p.Z_s + 1j * p.X_m
    zr = _rotor(s_r, p)
    zm = 1j * p.X_m
    return p.Z_s + zm * zr / (zm + zr)


def im_rotor_current(U_load: complex, s_r: float, p: ImParams) -> complex:
    if s_r <= 0:
        return 0j
    zr = _rotor(s_r, p)
    zm = 1j * p.X_m
    i_s = U_load / (p.Z_s + zm * zr / (zm + zr))
    return i_s * zm / (zm + zr)


def im_torque(U_load: complex, s_r: float, p: ImParams) -> float:
    """Air-gap torque ``|I_r|^2 R_r / s`` in motor per-unit."""
    if s_r <= 0:
        return 0.0
    i_r = im_rotor_current(U_load, s_r, p)
    return abs(i_r) ** 2 * p.R_r / max(s_r, S_MIN)


def im_slip_derivative(state: ImState, T_e: float, p: ImParams) -> float:
    return (p.T_m - T_e) / (2.0 * p.H_m)


def composite_load(Z_imp: complex, im_Z: complex, mix: float) -> complex:
    """Parallel of the two branches, each scaled to carry its share of the load.

    ``Z_imp`` and ``im_Z`` each represent the full load on their own; the
    impedance branch is scaled by ``1/(1-mix)`` and the motor by ``1/mix``.
    """
    if not 0.0 <= mix <= 1.0:
        raise ValueError("mix must lie in [0, 1]")
    if mix <= 0.0:
        return Z_imp
    if mix >= 1.0:
        return im_Z
    zi = Z_imp / (1.0 - mix)
    zm = im_Z / mix
    if math.isinf(abs(zi)):
        return zm
    return zi * zm / (zi + zm)


def equilibrium_slip(U_load: complex, p: ImParams, s_hi: Optional[float] = None) -> float:
    """Stable-branch slip where the air-gap torque meets ``T_m`` at ``U_load``.

    Raises ``ValueError`` when the voltage cannot carry the mechanical load.
    """
    s_pk = breakdown_slip(U_load, p)
    hi = s_pk if s_hi is None else min(s_hi, s_pk)
    lo = 1e-9
    if im_torque(U_load, hi, p) < p.T_m:
        raise ValueError("mechanical torque exceeds the pull-out torque at this voltage")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if im_torque(U_load, mid, p) < p.T_m:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def breakdown_slip(U_load: complex, p: ImParams) -> float:
    """Slip of maximum torque (golden-section search on (0, 1])."""
    a, b = 1e-6, 1.0
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = im_torque(U_load, c, p), im_torque(U_load, d, p)
    for _ in range(120):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = im_torque(U_load, c, p)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = im_torque(U_load, d, p)
    return 0.5 * (a + b)


def size_motor(p: ImParams, U_load: complex, P_target: float, s0: float) -> ImParams:
    """Scale a motor so it draws ``P_target`` (system pu) at ``U_load`` and slip ``s0``.

    ``T_m`` is set to the torque at that operating point so it is an equilibrium.
    """
    z = im_impedance(s0, p)
    p_unit = (abs(U_load) ** 2 / z.conjugate()).real
    size = P_target / p_unit
    return replace(p, size=size, T_m=im_torque(U_load, s0, p))
