"""Static and semi-static studies of the converter/network loop.

Power-injection error surfaces, fault classification, critical PLL angles,
equilibrium existence and sampled stability maps.  All functions here use
the algebraic layer without converter current lag.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .control import ControlParams, Law, Mode, reactive_law
from .network import (
    FaultSpec,
    TheveninEquivalent,
    TwoBusNetwork,
    onfault_overlay,
    thevenin_reduce,
    wrap,
)
from .pll import PllParams
from .simulator import NoSolution, Scenario, solve_algebraic

STUDY_RANGE = (math.radians(-80.0), math.radians(130.0))


class NoCrossing(RuntimeError):
    pass


class NotFound(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# power-injection error surface


@dataclass(frozen=True)
class SurfaceGrid:
    U_c: np.ndarray            # (nU,)
    theta_v: np.ndarray        # (nT,) rad
    P_ideal: np.ndarray        # (nT, nU)
    Q_ideal: np.ndarray
    P_actual: np.ndarray
    Q_actual: np.ndarray
    crossover: np.ndarray      # (nT,) U_c above which actual Q exceeds ideal Q; nan if none

    @property
    def shape(self) -> tuple[int, int]:
        return self.P_ideal.shape


def _law_arrays(U: np.ndarray, p: ControlParams) -> tuple[np.ndarray, np.ndarray]:
    i_q = np.clip(-p.K_q * (p.U_low - U), -p.I_max, 0.0)
    i_q = np.where(U < p.saturation_voltage, -p.I_max, i_q)
    i_d = np.minimum(np.sqrt(np.maximum(p.I_max ** 2 - i_q ** 2, 0.0)), p.I_cd_ref)
    i_d = np.where(U < p.saturation_voltage, 0.0, i_d)
    return i_d, i_q


def q_crossover(theta_v: float, p: ControlParams, U_max: float = 1.2, tol: float = 1e-10) -> float:
    """Lowest U_c above which actual Q_c exceeds ideal Q_c at angle ``theta_v`` (> 0).

    The sign of the difference is that of ``I_cd*sin(theta) + I_cq*(1 - cos(theta))``,
    which is non-decreasing in U_c.  Returns nan when it never turns positive.
    """
    def g(u):
        r = reactive_law(u, p)
        return r.I_cd * math.sin(theta_v) + r.I_cq * (1.0 - math.cos(theta_v))

    if theta_v <= 0 or g(U_max) <= 0:
        return math.nan
    lo, hi = 0.0, U_max
    if g(lo) > 0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return hi


def qp_surface(p: ControlParams, U_max: float = 1.2, U_step: float = 0.01,
               theta_deg: tuple[float, float] = (-90.0, 90.0), theta_step_deg: float = 1.0) -> SurfaceGrid:
    """Ideal and actual P/Q over a (U_c, theta_v) grid under the reactive-current law."""
    nU = int(round(U_max / U_step)) + 1
    nT = int(round((theta_deg[1] - theta_deg[0]) / theta_step_deg)) + 1
    if nU < 1 or nT < 1:
        raise ValueError("empty surface grid")
    U = np.linspace(0.0, U_max, nU)
    th = np.radians(np.linspace(theta_deg[0], theta_deg[1], nT))
    i_d, i_q = _law_arrays(U, p)
    c, s = np.cos(th)[:, None], np.sin(th)[:, None]
    P_id = np.broadcast_to(i_d * U, (nT, nU)).copy()
    Q_id = np.broadcast_to(-i_q * U, (nT, nU)).copy()
    P_ac = U * (i_d * c + i_q * s)
    Q_ac = U * (i_d * s - i_q * c)
    cross = np.array([q_crossover(t, p, U_max) for t in th])
    return SurfaceGrid(U, th, P_id, Q_id, P_ac, Q_ac, cross)


# ---------------------------------------------------------------------------
# fault classification


@dataclass(frozen=True)
class FaultClass:
    category: str           # PCC | Nearby | Remote
    delta_trend: str        # Negligible | Decrease | Increase
    voltage_tendency: str
    dc_risk: bool
    U_c: float              # estimated on-fault PCC voltage
    U_cq: float             # estimated on-fault q-axis voltage
    drift: float            # projected PLL drift over the horizon (rad)

    @property
    def row(self) -> str:
        return f"{self.category},{self.delta_trend}"


_TENDENCY = {
    ("PCC", "Negligible"): "negligible",
    ("Nearby", "Negligible"): "negligible",
    ("Nearby", "Decrease"): "high voltage; low voltage when motor load dominates",
    ("Nearby", "Increase"): "low voltage",
    ("Remote", "Increase"): "low voltage",
    ("Remote", "Decrease"): "high voltage",
    ("Remote", "Negligible"): "negligible",
}


def classify_fault(net: TwoBusNetwork, fault: FaultSpec, p: ControlParams,
                   pll: PllParams = PllParams(), scale: float = 1.0,
                   eps_z: float = 1e-6, eps_uq: float = 1e-3,
                   horizon: Optional[float] = None,
                   dc_drift_threshold: float = math.pi / 2) -> FaultClass:
    """Categorize a fault from the bypass on-fault circuit.

    With the grid bypassed the PCC voltage is ``Z*I_c`` rotating with the
    PLL, so ``U_cq`` is constant on-fault and its sign fixes the drift
    direction.  ``dc_risk`` flags a projected drift beyond
    ``dc_drift_threshold`` over ``horizon`` (default: the fault duration).
    """
    if abs(fault.Z_cf) < eps_z and abs(fault.Z_f) < eps_z:
        return FaultClass("PCC", "Negligible", _TENDENCY["PCC", "Negligible"], False, 0.0, 0.0, 0.0)
    eq = onfault_overlay(net, fault)
    alg = solve_algebraic(0.0, eq, Law.TRADITIONAL, p, scale)
    U_cq = alg.U_c * math.sin(alg.phi)
    category = "Nearby" if alg.U_c < p.saturation_voltage else "Remote"
    if abs(U_cq) < eps_uq:
        trend = "Negligible"
    else:
        trend = "Increase" if U_cq > 0 else "Decrease"
    T = fault.duration if horizon is None else horizon
    drift = pll.K_p * U_cq * T + 0.5 * pll.K_i * U_cq * T * T
    return FaultClass(category, trend, _TENDENCY[category, trend],
                      abs(drift) > dc_drift_threshold, alg.U_c, U_cq, drift)


# ---------------------------------------------------------------------------
# critical PLL angle


@dataclass(frozen=True)
class Crossing:
    delta_c: float
    theta_c: float
    residual: float
    extrapolated: bool


@dataclass(frozen=True)
class CriticalAngleResult:
    crossings: tuple
    reference: float

    @property
    def angles(self) -> list[float]:
        return [c.delta_c for c in self.crossings]


def voltage_at(delta_c: float, equiv: TheveninEquivalent, p: ControlParams,
               scale: float = 1.0, law: Law = Law.TRADITIONAL, U_prev: float = 1.0):
    return solve_algebraic(delta_c, equiv, law, p, scale, U_prev, tol=1e-12, maxit=200)


def critical_angle(equiv: TheveninEquivalent, delta_c0: float, p: ControlParams,
                   U_c0: Optional[float] = None, use_im_reference: bool = False,
                   scale: float = 1.0, step_deg: float = 0.5, tol: float = 1e-8,
                   span_deg: tuple[float, float] = (-180.0, 180.0)) -> CriticalAngleResult:
    """PLL angles at which the post-fault U_c equals a reference voltage.

    The reference is the pre-fault ``U_c0``; with ``use_im_reference`` it is
    the post-fault voltage of ``equiv`` at ``delta_c0`` instead.  All sign
    changes found by a uniform scan are refined by bisection in delta_c.
    """
    if use_im_reference:
        ref = voltage_at(delta_c0, equiv, p, scale).U_c
    elif U_c0 is None:
        raise ValueError("pass U_c0 or set use_im_reference")
    else:
        ref = U_c0

    def f(d):
        try:
            return voltage_at(d, equiv, p, scale).U_c - ref
        except NoSolution:
            return math.nan

    n = int(round((span_deg[1] - span_deg[0]) / step_deg)) + 1
    grid = np.radians(np.linspace(span_deg[0], span_deg[1], n))
    vals = [f(d) for d in grid]
    out = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if math.isnan(fa) or math.isnan(fb):
            continue
        if fa == 0.0:
            root = a
        elif fa * fb < 0:
            lo, hi, flo = a, b, fa
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                fm = f(mid)
                if math.isnan(fm):
                    break
                if (fm < 0) == (flo < 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            root = 0.5 * (lo + hi)
        else:
            continue
        alg = voltage_at(root, equiv, p, scale)
        out.append(Crossing(float(root), math.atan2(alg.I_cq, alg.I_cd), alg.U_c - ref,
                            not (STUDY_RANGE[0] <= root <= STUDY_RANGE[1])))
    if not out:
        raise NoCrossing("post-fault voltage never meets the reference on the scan range")
    return CriticalAngleResult(tuple(out), ref)


# ---------------------------------------------------------------------------
# equilibrium points


def ep_exists_onfault(Z_cf: complex, p: ControlParams, tol: float = 1e-6) -> tuple[bool, float]:
    """Existence test for the on-fault EP with current aligned to U_c.

    With the grid bypassed the EP needs the current angle to cancel the
    angle of ``Z_cf``.  Returns (exists, angle residual in rad).
    """
    U = p.I_max * abs(Z_cf)
    r = reactive_law(U, p)
    theta_c = math.atan2(r.I_cq, r.I_cd)
    theta_zf = math.atan2(Z_cf.imag, Z_cf.real) if Z_cf != 0 else 0.0
    res = wrap(theta_zf + theta_c)
    return abs(res) < tol, res


@dataclass(frozen=True)
class EquilibriumPoint:
    delta_c: float
    U_c: float
    theta_v: float
    mode: Mode
    residual: float
    family: tuple = field(default=())


def _uq(delta, equiv, p, scale, law):
    alg = voltage_at(delta, equiv, p, scale, law)
    return alg.U_c * math.sin(alg.phi - delta), alg


def _newton_delta(equiv, p, scale, d0, law, tol=1e-12, maxit=60):
    d = d0
    for _ in range(maxit):
        f, alg = _uq(d, equiv, p, scale, law)
        if abs(f) < tol:
            return d, alg
        h = 1e-7
        df = (_uq(d + h, equiv, p, scale, law)[0] - _uq(d - h, equiv, p, scale, law)[0]) / (2 * h)
        if df == 0 or not math.isfinite(df):
            return None
        step = -f / df
        d += max(-0.5, min(0.5, step))
    f, alg = _uq(d, equiv, p, scale, law)
    return (d, alg) if abs(f) < 1e-9 else None


def ep_solve_postfault(equiv: TheveninEquivalent, p: ControlParams, mode: Mode = Mode.TRADITIONAL,
                       scale: float = 1.0, n_starts: int = 16,
                       family_samples: int = 8) -> EquilibriumPoint:
    """Synchronized post-fault EP of the PLL loop.

    Traditional mode: Newton on U_cq(delta_c) = 0 from ``n_starts`` angles,
    keeping the PLL-stable root of highest U_c.  Decoupled mode: the network
    solution does not depend on delta_c; its voltage angle is the angle
    ``delta_c1`` at which theta_v vanishes, and every other delta_c sits on
    the family ``theta_v = delta_c1 - delta_c`` (checked on sampled angles).
    """
    if abs(equiv.U_g_eq) < 1e-12:
        ok, res = ep_exists_onfault(equiv.Z_eq * scale, p)
        if not ok:
            raise NotFound(f"no EP with the source bypassed (angle residual {res:.3g} rad)")
        alg = voltage_at(0.0, equiv, p, scale, Law.DECOUPLED)
        return EquilibriumPoint(alg.phi, alg.U_c, 0.0, mode, 0.0)

    roots = []
    for k in range(n_starts):
        d0 = -math.pi + 2 * math.pi * k / n_starts
        try:
            r = _newton_delta(equiv, p, scale, d0, Law.TRADITIONAL)
        except NoSolution:
            r = None
        if r is None:
            continue
        d, alg = r
        h = 1e-6
        try:
            slope = (_uq(d + h, equiv, p, scale, Law.TRADITIONAL)[0]
                     - _uq(d - h, equiv, p, scale, Law.TRADITIONAL)[0]) / (2 * h)
        except NoSolution:
            continue
        if slope < 0:
            roots.append((wrap(d), alg))
    if not roots:
        raise NotFound("no synchronized post-fault equilibrium")
    d, alg = max(roots, key=lambda r: r[1].U_c)
    residual = abs(alg.U_c * math.sin(alg.phi - d))

    if mode is Mode.TRADITIONAL:
        return EquilibriumPoint(d, alg.U_c, wrap(alg.phi - d), mode, residual)

    fam = []
    for k in range(family_samples):
        dk = -math.pi + 2 * math.pi * (k + 0.5) / family_samples
        dec = voltage_at(dk, equiv, p, scale, Law.DECOUPLED, U_prev=alg.U_c)
        fam.append((dk, abs(wrap(dec.phi - dk) - wrap(d - dk)) + abs(dec.U_c - alg.U_c)))
    return EquilibriumPoint(d, alg.U_c, 0.0, mode, residual, tuple(fam))


# ---------------------------------------------------------------------------
# sampled stability map


@dataclass(frozen=True)
class StabilityMap:
    offsets: np.ndarray       # delta_c offsets from the EP (rad)
    omegas: np.ndarray        # initial omega_c (rad/s)
    labels: np.ndarray        # (n_offsets, n_omegas) of LABEL_* codes
    delta_ep: float
    mode: Mode

    @property
    def stable_fraction(self) -> float:
        return float(np.mean(self.labels == kernels.LABEL_STABLE))


LABEL_NAMES = {kernels.LABEL_STABLE: "Stable", kernels.LABEL_LOS: "LOS",
               kernels.LABEL_NOSOL: "NoSolution"}


def postfault_equivalent(scn: Scenario) -> TheveninEquivalent:
    net = scn.network
    if not isinstance(net, TwoBusNetwork) or net.load.has_motor:
        raise ValueError("stability maps need a two-bus network with impedance load only")
    return thevenin_reduce(net, net.load.Z_imp)


def stability_map(scn: Scenario, mode: Optional[Mode] = None, n_delta: int = 181,
                  n_omega: int = 101, omega_span: float = 100.0, horizon: float = 2.0,
                  dt: float = 1e-3, tol_delta: float = math.radians(2.0),
                  tol_omega: float = 0.1, offsets: Optional[Sequence[float]] = None,
                  omegas: Optional[Sequence[float]] = None) -> StabilityMap:
    """Label initial (delta_c, omega_c) states by integrating the post-fault loop.

    LVRT starts active with the chosen law, as right after clearance.
    """
    mode = scn.control.mode if mode is None else Mode(mode)
    p = scn.control
    eq = postfault_equivalent(scn)
    scale = scn.bases.current_scale
    ep = ep_solve_postfault(eq, p, Mode.TRADITIONAL, scale)
    off = np.radians(np.linspace(-180.0, 180.0, n_delta)) if offsets is None else np.asarray(offsets, float)
    om = np.linspace(-omega_span, omega_span, n_omega) if omegas is None else np.asarray(omegas, float)
    z = eq.Z_eq * scale
    law = int(Law.DECOUPLED if mode is Mode.DECOUPLED else Law.TRADITIONAL)
    flat = kernels.stability_grid(
        eq.U_g_eq.real, eq.U_g_eq.imag, z.real, z.imag, p.I_max, p.K_q, p.U_low,
        p.I_cd_ref, p.I_cq_ref, p.hysteresis, law, scn.pll.K_p, scn.pll.K_i,
        ep.delta_c, ep.U_c, [float(v) for v in off], [float(v) for v in om],
        dt, int(round(horizon / dt)), tol_delta, tol_omega)
    labels = np.asarray(flat, dtype=np.int8).reshape(len(off), len(om))
    return StabilityMap(off, om, labels, ep.delta_c, mode)
