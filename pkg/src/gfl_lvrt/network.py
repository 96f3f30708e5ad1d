"""Phasor network models: two-bus Thevenin reduction, fault overlays and Y-bus solves.

All quantities are per-unit on the system base.  Phasors are plain Python
``complex`` values; :func:`angle` gives the principal angle in (-pi, pi].
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .loads import LoadDescriptor


class DegenerateNetwork(ValueError):
    """The network reduction divides by a vanishing impedance."""


class SingularNetwork(ValueError):
    """The nodal admittance matrix could not be factorized."""


def angle(z: complex) -> float:
    """Principal angle of ``z`` in (-pi, pi]."""
    a = math.atan2(z.imag, z.real)
    return math.pi if a <= -math.pi else a


def polar(mag: float, ang: float) -> complex:
    return cmath.rect(mag, ang)


def wrap(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w <= -math.pi else w


def parallel(a: complex, b: complex) -> complex:
    """Parallel combination; ``inf`` denotes an open branch."""
    if a == 0 or b == 0:
        return 0j
    if _is_open(a):
        return b
    if _is_open(b):
        return a
    s = a + b
    if abs(s) < 1e-12:
        raise DegenerateNetwork("parallel branches resonate (a + b = 0)")
    return a * b / s


def _is_open(z: complex) -> bool:
    return math.isinf(z.real) or math.isinf(z.imag)


OPEN = complex(math.inf, 0.0)


@dataclass(frozen=True)
class FaultSpec:
    """Three-phase fault placed ``Z_cf`` along the path from the converter terminal.

    The path runs PCC -> (Z_c) -> load bus -> (Z_g) -> source.  With
    ``|Z_cf| <= |Z_c|`` the fault point lies on the converter feeder
    (``Z_cf == Z_c`` is the load bus, ``Z_cf == 0`` the PCC); larger values
    place it on the grid line beyond the load bus.  For Y-bus networks the
    fault sits at ``bus`` and ``Z_cf`` only feeds the static classifier.
    """

    Z_cf: complex
    Z_f: complex
    t_on: float
    t_clear: float
    bus: Optional[int] = None

    def __post_init__(self):
        if not (self.t_clear >= self.t_on >= 0.0):
            raise ValueError(f"fault times must satisfy t_clear >= t_on >= 0 "
                             f"(got t_on={self.t_on}, t_clear={self.t_clear})")

    @property
    def duration(self) -> float:
        return self.t_clear - self.t_on

    def with_duration(self, duration: float) -> "FaultSpec":
        return replace(self, t_clear=self.t_on + duration)


@dataclass(frozen=True)
class TheveninEquivalent:
    """Source ``U_g_eq`` behind ``Z_eq`` as seen from the converter terminal."""

    U_g_eq: complex
    Z_eq: complex

    @property
    def delta_g(self) -> float:
        return angle(self.U_g_eq)

    @property
    def theta_z(self) -> float:
        return angle(self.Z_eq)

    def voltage(self, current: complex) -> complex:
        return self.U_g_eq + self.Z_eq * current


@dataclass(frozen=True)
class TwoBusNetwork:
    """Converter behind ``Z_c`` feeding a load bus tied to the grid through ``Z_g``."""

    U_g: float
    Z_g: complex
    Z_c: complex
    load: LoadDescriptor
    fault: Optional[FaultSpec] = None

    def __post_init__(self):
        if abs(self.Z_g) <= 0 and self.load.is_open():
            raise DegenerateNetwork("zero grid impedance with an open load")
        if abs(self.Z_g) < 0 or not (0.0 <= self.load.mix <= 1.0):
            raise ValueError("invalid two-bus network parameters")


def thevenin_reduce(net: TwoBusNetwork, Z_l: complex) -> TheveninEquivalent:
    """Reduce grid source, grid impedance and load ``Z_l`` to one source behind one impedance.

    ``Z_l`` may be :data:`OPEN` (``complex(inf)``) for a removed load.
    """
    if _is_open(Z_l):
        return TheveninEquivalent(complex(net.U_g), net.Z_g + net.Z_c)
    s = net.Z_g + Z_l
    if abs(s) < 1e-12:
        raise DegenerateNetwork("|Z_g + Z_l| < 1e-12")
    return TheveninEquivalent(net.U_g * Z_l / s, net.Z_g * Z_l / s + net.Z_c)


def onfault_overlay(net: TwoBusNetwork, fault: FaultSpec) -> TheveninEquivalent:
    """Bypass approximation of the on-fault circuit: source side shorted out.

    The converter then drives ``Z_cf + Z_f`` with no internal source.
    """
    return TheveninEquivalent(0j, fault.Z_cf + fault.Z_f)


def fault_on_feeder(net: TwoBusNetwork, fault: FaultSpec) -> bool:
    return abs(fault.Z_cf) <= abs(net.Z_c) + 1e-12


@dataclass(frozen=True)
class TwoBusSolution:
    """Linear response of a two-bus stage: ``V = V0 + z * I_c`` at PCC and load bus."""

    pcc: TheveninEquivalent
    load_v0: complex
    load_z: complex

    def load_voltage(self, current: complex) -> complex:
        return self.load_v0 + self.load_z * current


def twobus_stage(net: TwoBusNetwork, Z_l: complex,
                 fault: Optional[FaultSpec] = None) -> TwoBusSolution:
    """Exact linear map from converter current to PCC and load-bus voltages.

    Without a fault this is the Thevenin reduction; with one, the full mesh
    including the grid source is solved in closed form.
    """
    if fault is None:
        th = thevenin_reduce(net, Z_l)
        # load bus sits Z_c behind the PCC
        return TwoBusSolution(th, th.U_g_eq, th.Z_eq - net.Z_c)

    Zf = fault.Z_f
    if fault_on_feeder(net, fault):
        a = fault.Z_cf
        b = net.Z_c - fault.Z_cf
        lth = thevenin_reduce(replace(net, Z_c=0j), Z_l)    # at the load bus
        Ug_l, Z_gl = lth.U_g_eq, lth.Z_eq
        rest = b + Z_gl
        if Zf == 0:
            U_F, Z_F = 0j, 0j
        else:
            s = Zf + rest
            if abs(s) < 1e-14:
                raise DegenerateNetwork("fault branch resonates with the network")
            U_F = Ug_l * Zf / s
            Z_F = Zf * rest / s
        pcc = TheveninEquivalent(U_F, a + Z_F)
        # load bus from the fault node through b, with its own Thevenin source
        if b == 0:
            return TwoBusSolution(pcc, U_F, Z_F)
        den = b + Z_gl
        if abs(den) < 1e-14:
            raise DegenerateNetwork("feeder remainder resonates with the grid side")
        # V_L = (Ug_l*b + Z_gl*V_F)/(b + Z_gl), V_F = U_F + Z_F*I
        return TwoBusSolution(pcc, (Ug_l * b + Z_gl * U_F) / den, Z_gl * Z_F / den)

    c = fault.Z_cf - net.Z_c
    d = net.Z_g - c
    if Zf == 0:
        U_Fp, Z_Fp = 0j, 0j
    else:
        s = Zf + d
        if abs(s) < 1e-14:
            raise DegenerateNetwork("fault branch resonates with the grid segment")
        U_Fp = net.U_g * Zf / s
        Z_Fp = Zf * d / s
    branch = c + Z_Fp
    if _is_open(Z_l):
        U_L, Z_L = U_Fp, branch
    else:
        s = Z_l + branch
        if abs(s) < 1e-14:
            raise DegenerateNetwork("load resonates with the faulted grid side")
        U_L = U_Fp * Z_l / s
        Z_L = Z_l * branch / s
    return TwoBusSolution(TheveninEquivalent(U_L, net.Z_c + Z_L), U_L, Z_L)


def onfault_exact(net: TwoBusNetwork, fault: FaultSpec, Z_l: complex) -> TheveninEquivalent:
    """Full mesh reduction of the faulted two-bus circuit seen from the PCC."""
    return twobus_stage(net, Z_l, fault).pcc


# ---------------------------------------------------------------------------
# general nodal networks


@dataclass(frozen=True)
class Source:
    bus: int
    E: complex
    Z: complex


@dataclass(eq=False)
class YBusNetwork:
    """Nodal network with ideal sources behind series impedances.

    ``Y`` holds branches and fixed shunts only; sources are Norton-converted
    and load impedances are added by :meth:`admittance`.
    """

    Y: np.ndarray
    sources: list[Source]
    injection_bus: int
    load_buses: list[tuple[int, LoadDescriptor]] = field(default_factory=list)
    names: Optional[list[str]] = None

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    def admittance(self, load_Z: Sequence[complex] = (),
                   fault: Optional[FaultSpec] = None) -> np.ndarray:
        Y = self.Y.astype(complex).copy()
        for s in self.sources:
            Y[s.bus, s.bus] += 1.0 / s.Z
        for (bus, _), z in zip(self.load_buses, load_Z):
            if not _is_open(z):
                Y[bus, bus] += 1.0 / z
        if fault is not None:
            if fault.bus is None:
                raise ValueError("a Y-bus fault needs a bus index")
            Zf = fault.Z_f if abs(fault.Z_f) > 0 else 1e-9
            Y[fault.bus, fault.bus] += 1.0 / Zf
        return Y

    def source_currents(self) -> np.ndarray:
        I = np.zeros(self.n, dtype=complex)
        for s in self.sources:
            I[s.bus] += s.E / s.Z
        return I


def solve_ybus(net: YBusNetwork, injection: complex,
               load_Z: Sequence[complex] = (),
               fault: Optional[FaultSpec] = None) -> np.ndarray:
    """Bus voltages with the converter modelled as a current ``injection``."""
    Y = net.admittance(load_Z, fault)
    I = net.source_currents()
    I[net.injection_bus] += injection
    try:
        V = np.linalg.solve(Y, I)
    except np.linalg.LinAlgError as exc:
        raise SingularNetwork(str(exc)) from exc
    if not np.all(np.isfinite(V)):
        raise SingularNetwork("non-finite bus voltages")
    return V


@dataclass(frozen=True)
class LinearResponse:
    """``V = V0 + z * I_c`` for every bus of a Y-bus stage."""

    V0: np.ndarray
    z: np.ndarray
    injection_bus: int

    @property
    def pcc(self) -> TheveninEquivalent:
        k = self.injection_bus
        return TheveninEquivalent(complex(self.V0[k]), complex(self.z[k]))

    def voltages(self, current: complex) -> np.ndarray:
        return self.V0 + self.z * current


def ybus_response(net: YBusNetwork, load_Z: Sequence[complex] = (),
                  fault: Optional[FaultSpec] = None) -> LinearResponse:
    """Source-only solution and injection sensitivity from a single factorization."""
    Y = net.admittance(load_Z, fault)
    rhs = np.zeros((net.n, 2), dtype=complex)
    rhs[:, 0] = net.source_currents()
    rhs[net.injection_bus, 1] = 1.0
    try:
        X = np.linalg.solve(Y, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularNetwork(str(exc)) from exc
    if not np.all(np.isfinite(X)):
        raise SingularNetwork("non-finite bus voltages")
    return LinearResponse(X[:, 0], X[:, 1], net.injection_bus)


def twobus_to_ybus(net: TwoBusNetwork, Z_l: complex) -> YBusNetwork:
    """Nodal form of a two-bus network: bus 0 is the PCC, bus 1 the load bus."""
    if net.Z_c == 0 or net.Z_g == 0:
        raise DegenerateNetwork("nodal form needs non-zero Z_c and Z_g")
    y = 1.0 / net.Z_c
    Y = np.array([[y, -y], [-y, y]], dtype=complex)
    if not _is_open(Z_l):
        Y[1, 1] += 1.0 / Z_l
    return YBusNetwork(Y, [Source(1, complex(net.U_g), net.Z_g)], injection_bus=0,
                       names=["PCC", "LOAD"])


def branch_admittance(n: int, branches: Sequence[tuple[int, int, complex, float]]) -> np.ndarray:
    """Assemble Y from (from, to, series Z, total line charging B) tuples."""
    Y = np.zeros((n, n), dtype=complex)
    for i, j, z, b in branches:
        y = 1.0 / z
        Y[i, i] += y + 0.5j * b
        Y[j, j] += y + 0.5j * b
        Y[i, j] -= y
        Y[j, i] -= y
    return Y
