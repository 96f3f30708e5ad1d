"""Hybrid phasor time stepper for a grid-following converter.

Differential states are the PLL (``delta_c``, ``x_i``), the DC-link proxy,
the optional current-tracking lag and the slip of every motor load.  The
network is algebraic: at every stage evaluation the converter/network loop
is re-solved on the network of the active stage (pre-fault, on-fault,
post-fault).  Fault events fall on step boundaries.
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .control import (
    ControlParams,
    DcCollapse,
    Law,
    lvrt_transition,
    select_mode,
    apply_law,
)
from .loads import ImParams, im_torque
from .network import (
    FaultSpec,
    LinearResponse,
    TheveninEquivalent,
    TwoBusNetwork,
    YBusNetwork,
    twobus_stage,
    wrap,
    ybus_response,
)
from .pll import PllParams

log = logging.getLogger(__name__)

PRE, FAULT, POST = 0, 1, 2
STAGE_NAMES = ("prefault", "onfault", "postfault")
LOS_ANGLE = 2.0 * math.pi

COLUMNS = ("t", "U_c", "ang_U_c", "delta_c", "omega_c", "theta_v", "I_cd", "I_cq",
           "P_c", "Q_c", "s_r", "U_dc", "lvrt_active", "mode")


class NoSolution(RuntimeError):
    """The converter and network equations admit no solution."""


class NoPrefaultEP(RuntimeError):
    pass


class BracketFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SimSettings:
    dt: float = 1e-4
    t_end: float = 1.0
    integrator: str = "rk4"
    dt_out: float = 1e-3

    def __post_init__(self):
        if not 0 < self.dt <= 1e-3:
            raise ValueError("dt must lie in (0, 1 ms]")
        if self.integrator not in ("rk4", "heun"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.dt_out < self.dt:
            raise ValueError("dt_out must be at least dt")


@dataclass(frozen=True)
class Bases:
    S_b: float = 100.0      # MVA
    S_c: float = 100.0      # MVA, converter rating
    U_b: float = 230.0      # kV
    U_dc: float = 640.0     # kV, rated DC voltage
    omega_0: float = 100.0 * math.pi

    @property
    def current_scale(self) -> float:
        """Converter per-unit current expressed on the system base."""
        return self.S_c / self.S_b

    @property
    def Z_base(self) -> float:
        return self.U_b ** 2 / self.S_b

    def ohm_to_pu(self, z_ohm: complex) -> complex:
        return z_ohm * self.S_b / self.U_b ** 2


@dataclass(frozen=True)
class Scenario:
    name: str
    network: Union[TwoBusNetwork, YBusNetwork]
    fault: FaultSpec
    control: ControlParams = field(default_factory=ControlParams)
    pll: PllParams = field(default_factory=PllParams)
    sim: SimSettings = field(default_factory=SimSettings)
    bases: Bases = field(default_factory=Bases)
    C_dc: float = 0.1
    meta: tuple = ()

    def __post_init__(self):
        if self.sim.t_end <= self.fault.t_clear:
            raise ValueError("t_end must exceed the fault clearing time")

    def with_mode(self, mode) -> "Scenario":
        return replace(self, control=replace(self.control, mode=mode))

    def with_fault_duration(self, duration: float, horizon: Optional[float] = None) -> "Scenario":
        fault = self.fault.with_duration(duration)
        t_end = self.sim.t_end if horizon is None else fault.t_clear + horizon
        return replace(self, fault=fault, sim=replace(self.sim, t_end=max(t_end, fault.t_clear + self.sim.dt)))


# ---------------------------------------------------------------------------
# plants: linear maps from converter current to bus voltages


@dataclass(frozen=True)
class StageResponse:
    pcc: TheveninEquivalent
    motor_v0: tuple
    motor_z: tuple


class TwoBusPlant:
    def __init__(self, net: TwoBusNetwork, fault: FaultSpec):
        self.net = net
        self.fault = fault
        self.motors: list[ImParams] = [net.load.im] if net.load.has_motor else []
        self._cache: dict[int, StageResponse] = {}

    def response(self, stage: int, slips: Sequence[float]) -> StageResponse:
        if not self.motors:
            hit = self._cache.get(stage)
            if hit is not None:
                return hit
        z_l = self.net.load.impedance(slips[0] if self.motors else None)
        sol = twobus_stage(self.net, z_l, self.fault if stage == FAULT else None)
        r = StageResponse(sol.pcc, (sol.load_v0,), (sol.load_z,))
        if not self.motors:
            self._cache[stage] = r
        return r


class YBusPlant:
    def __init__(self, net: YBusNetwork, fault: FaultSpec):
        self.net = net
        self.fault = fault
        self._motor_idx = [k for k, (_, ld) in enumerate(net.load_buses) if ld.has_motor]
        self.motors = [net.load_buses[k][1].im for k in self._motor_idx]
        self._cache: dict[int, StageResponse] = {}

    def response(self, stage: int, slips: Sequence[float]) -> StageResponse:
        if not self.motors:
            hit = self._cache.get(stage)
            if hit is not None:
                return hit
        slip_of = dict(zip(self._motor_idx, slips))
        load_Z = [ld.impedance(slip_of.get(k)) for k, (_, ld) in enumerate(self.net.load_buses)]
        lr: LinearResponse = ybus_response(self.net, load_Z, self.fault if stage == FAULT else None)
        buses = [self.net.load_buses[k][0] for k in self._motor_idx]
        r = StageResponse(lr.pcc, tuple(complex(lr.V0[b]) for b in buses),
                          tuple(complex(lr.z[b]) for b in buses))
        if not self.motors:
            self._cache[stage] = r
        return r


def make_plant(scn: Scenario):
    if isinstance(scn.network, TwoBusNetwork):
        return TwoBusPlant(scn.network, scn.fault)
    return YBusPlant(scn.network, scn.fault)


# ---------------------------------------------------------------------------
# algebraic layer


@dataclass(frozen=True)
class Algebraic:
    U_c: float
    phi: float          # angle of U_c in the grid frame
    I_cd: float         # converter current in the PLL frame (converter base)
    I_cq: float
    current: complex    # converter current phasor, grid frame (converter base)

    @property
    def voltage(self) -> complex:
        return cmath.rect(self.U_c, self.phi)


def solve_algebraic(delta_c: float, equiv: TheveninEquivalent, law: Law, p: ControlParams,
                    scale: float = 1.0, U_prev: float = 1.0,
                    phi_prev: Optional[float] = None, tol: float = 1e-8,
                    maxit: int = 50) -> Algebraic:
    """PCC voltage and converter current consistent with ``law`` at PLL angle ``delta_c``.

    ``scale`` converts converter per-unit current to the system base of
    ``equiv``.  Raises :class:`NoSolution` when the loop has no fixed point.
    """
    z = equiv.Z_eq * scale
    m, phi, i_d, i_q, st = kernels.solve_loop(
        int(law), equiv.U_g_eq.real, equiv.U_g_eq.imag, z.real, z.imag, delta_c,
        U_prev, delta_c if phi_prev is None else phi_prev,
        p.I_max, p.K_q, p.U_low, p.I_cd_ref, p.I_cq_ref, tol, maxit)
    if st < 0:
        raise NoSolution("converter/network loop has no solution")
    return Algebraic(m, phi, i_d, i_q, complex(i_d, i_q) * cmath.exp(1j * delta_c))


def algebraic_residual(alg: Algebraic, equiv: TheveninEquivalent, scale: float = 1.0) -> float:
    return abs(alg.U_c - abs(equiv.U_g_eq + equiv.Z_eq * scale * alg.current))


# ---------------------------------------------------------------------------
# state and records


@dataclass
class SystemState:
    t: float
    delta_c: float
    x_i: float
    U_dc: float
    i_lag: complex
    slips: list
    lvrt_active: bool
    t_act: float
    algebraic: Optional[Algebraic] = None
    P_in: float = 0.0


@dataclass
class TimeSeries:
    data: dict
    events: list
    scenario: str = ""
    header: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.data[key]

    def __len__(self):
        return len(self.data["t"])

    @property
    def t(self) -> np.ndarray:
        return self.data["t"]

    def event(self, kind: str):
        return next((e for e in self.events if e[1] == kind), None)

    @property
    def terminated(self) -> Optional[str]:
        for _, kind, *_ in self.events:
            if kind in ("LOS", "DcCollapse", "Stopped"):
                return kind
        return None

    def window(self, t0: float, t1: float = math.inf, *, open_left: bool = False) -> np.ndarray:
        t = self.t
        lo = t > t0 + 1e-12 if open_left else t >= t0 - 1e-12
        return lo & (t <= t1 + 1e-12)


@dataclass(frozen=True)
class Derivs:
    d_delta: float
    d_xi: float
    d_udc: float
    d_ilag: complex
    d_slips: tuple


class _Model:
    """Right-hand side of the hybrid system for one scenario."""

    def __init__(self, scn: Scenario):
        self.scn = scn
        self.plant = make_plant(scn)
        self.p = scn.control
        self.pll = scn.pll
        self.scale = scn.bases.current_scale
        self.lag = scn.control.tau_c > 0
        self.n_m = len(self.plant.motors)

    def algebra(self, stage, delta, i_lag, slips, law, U_prev, phi_prev):
        resp = self.plant.response(stage, slips)
        eq = resp.pcc
        if self.lag:
            u = eq.U_g_eq + eq.Z_eq * self.scale * i_lag
            U = abs(u)
            phi = cmath.phase(u)
            i_pll = i_lag * cmath.exp(-1j * delta)
            alg = Algebraic(U, phi, i_pll.real, i_pll.imag, i_lag)
        else:
            alg = solve_algebraic(delta, eq, law, self.p, self.scale, U_prev, phi_prev)
        return resp, alg

    def rhs(self, stage, x_state, law, U_prev, phi_prev, P_in):
        delta, x_i, U_dc, i_lag, slips = x_state
        resp, alg = self.algebra(stage, delta, i_lag, slips, law, U_prev, phi_prev)
        U_cq = alg.U_c * math.sin(alg.phi - delta)
        S = alg.voltage * alg.current.conjugate()
        P_c = S.real
        if U_dc <= 0:
            raise DcCollapse("DC-link voltage proxy reached zero")
        d_udc = (P_in - P_c) / (self.scn.C_dc * U_dc)
        if self.lag:
            refs = apply_law(law, alg.U_c, alg.phi - delta, self.p)
            target = complex(refs.I_cd, refs.I_cq) * cmath.exp(1j * delta)
            d_i = (target - i_lag) / self.p.tau_c
        else:
            d_i = 0j
        d_s = []
        I_sys = self.scale * alg.current
        for k, im in enumerate(self.plant.motors):
            s = min(max(slips[k], 1e-6), 1.0)
            V = resp.motor_v0[k] + resp.motor_z[k] * I_sys
            ds = (im.T_m - im_torque(V, s, im)) / (2.0 * im.H_m)
            if slips[k] >= 1.0 and ds > 0:
                ds = 0.0
            d_s.append(ds)
        return Derivs(self.pll.K_p * U_cq + x_i, self.pll.K_i * U_cq, d_udc, d_i, tuple(d_s)), alg


def _advance(x, k, h):
    delta, x_i, U_dc, i_lag, slips = x
    return (delta + h * k.d_delta, x_i + h * k.d_xi, U_dc + h * k.d_udc,
            i_lag + h * k.d_ilag, [s + h * ds for s, ds in zip(slips, k.d_slips)])


def _combine(x, ks, ws, h):
    delta, x_i, U_dc, i_lag, slips = x
    n = len(slips)
    return (delta + h * sum(w * k.d_delta for w, k in zip(ws, ks)),
            x_i + h * sum(w * k.d_xi for w, k in zip(ws, ks)),
            U_dc + h * sum(w * k.d_udc for w, k in zip(ws, ks)),
            i_lag + h * sum(w * k.d_ilag for w, k in zip(ws, ks)),
            [slips[j] + h * sum(w * k.d_slips[j] for w, k in zip(ws, ks)) for j in range(n)])


# ---------------------------------------------------------------------------
# initialization


def _prefault_residual(model: _Model, delta: float, slips: Sequence[float]):
    p = model.p
    resp = model.plant.response(PRE, slips)
    alg = solve_algebraic(delta, resp.pcc, Law.NORMAL, p, model.scale)
    law = Law.NORMAL
    if alg.U_c < p.U_low:
        law = Law.TRADITIONAL
        alg = solve_algebraic(delta, resp.pcc, law, p, model.scale, alg.U_c)
    r = [alg.U_c * math.sin(alg.phi - delta)]
    I_sys = model.scale * alg.current
    for k, im in enumerate(model.plant.motors):
        V = resp.motor_v0[k] + resp.motor_z[k] * I_sys
        r.append((im_torque(V, slips[k], im) - im.T_m) / max(im.T_m, 1e-9))
    return np.array(r), alg, law


def _newton_ep(model: _Model, x0: np.ndarray, tol: float = 1e-12, maxit: int = 60):
    x = x0.astype(float).copy()
    n = len(x)
    for _ in range(maxit):
        r, alg, law = _prefault_residual(model, x[0], x[1:])
        if np.max(np.abs(r)) < tol:
            return x, alg, law
        J = np.empty((n, n))
        for j in range(n):
            h = 1e-7 * max(1.0, abs(x[j])) if j == 0 else 1e-7 * max(x[j], 1e-4)
            xp = x.copy()
            xp[j] += h
            J[:, j] = (_prefault_residual(model, xp[0], xp[1:])[0] - r) / h
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        while lam > 1e-3:
            xn = x + lam * step
            if np.all(xn[1:] > 0) and np.all(xn[1:] < 1.0):
                break
            lam *= 0.5
        x = xn
        if not np.all(np.isfinite(x)):
            return None
    r, alg, law = _prefault_residual(model, x[0], x[1:])
    if np.max(np.abs(r)) < 1e-9:
        return x, alg, law
    return None


def _pll_stiffness(model: _Model, x: np.ndarray) -> float:
    h = 1e-6
    xp, xm = x.copy(), x.copy()
    xp[0] += h
    xm[0] -= h
    return (_prefault_residual(model, xp[0], xp[1:])[0][0]
            - _prefault_residual(model, xm[0], xm[1:])[0][0]) / (2 * h)


def initialize(scn: Scenario, slip_start: float = 0.01) -> SystemState:
    """Synchronized pre-fault equilibrium: ``U_cq = 0`` and motor torque balance.

    Newton on (delta_c, slips) from eight evenly spaced PLL angles; the
    PLL-stable solution on the stable motor branch with the highest PCC
    voltage is kept.
    """
    model = _Model(scn)
    found = []
    for k in range(8):
        d0 = -math.pi + k * math.pi / 4
        x0 = np.array([d0] + [slip_start] * model.n_m)
        try:
            res = _newton_ep(model, x0)
        except NoSolution:
            res = None
        if res is None:
            continue
        x, alg, law = res
        x[0] = wrap(x[0])
        if _pll_stiffness(model, x) >= 0:
            continue
        found.append((x, alg, law))
    if not found:
        raise NoPrefaultEP(f"no synchronized pre-fault equilibrium for {scn.name!r}")
    x, alg, law = max(found, key=lambda f: (f[1].U_c, -abs(f[0][0])))
    P_c = (alg.voltage * alg.current.conjugate()).real
    return SystemState(t=0.0, delta_c=float(x[0]), x_i=0.0, U_dc=1.0, i_lag=alg.current,
                       slips=[float(s) for s in x[1:]], lvrt_active=law != Law.NORMAL,
                       t_act=0.0, algebraic=alg, P_in=P_c)


# ---------------------------------------------------------------------------
# time stepping


def _stage_at(n: int, n_on: int, n_clear: int) -> int:
    if n < n_on:
        return PRE
    if n < n_clear:
        return FAULT
    return POST


def simulate(scn: Scenario, *, monitor: Optional[Callable[[float, float, int], bool]] = None,
             state0: Optional[SystemState] = None) -> TimeSeries:
    """Integrate ``scn`` and return the sampled trajectory.

    ``monitor(t, U_c, stage)`` is called after every step; returning False
    stops the run with a ``Stopped`` event.
    """
    st = initialize(scn) if state0 is None else state0
    model = _Model(scn)
    p = scn.control
    dt = scn.sim.dt
    n_on = int(round(scn.fault.t_on / dt))
    n_clear = int(round(scn.fault.t_clear / dt))
    n_end = int(round(scn.sim.t_end / dt))
    every = max(1, int(round(scn.sim.dt_out / dt)))
    rk4 = scn.sim.integrator == "rk4"
    delta0 = st.delta_c

    rec = {c: [] for c in COLUMNS}
    events = []
    x = (st.delta_c, st.x_i, st.U_dc, st.i_lag, list(st.slips))
    active, t_act = st.lvrt_active, st.t_act
    P_in = st.P_in
    U_prev = st.algebraic.U_c if st.algebraic else 1.0
    phi_prev = st.algebraic.phi if st.algebraic else st.delta_c

    def law_at(t):
        return select_mode(t - t_act, p, active)

    def record(t, x, alg, law):
        delta, x_i, U_dc, _, slips = x
        U_cq = alg.U_c * math.sin(alg.phi - delta)
        S = alg.voltage * alg.current.conjugate()
        rec["t"].append(t)
        rec["U_c"].append(alg.U_c)
        rec["ang_U_c"].append(wrap(alg.phi))
        rec["delta_c"].append(delta)
        rec["omega_c"].append(scn.pll.K_p * U_cq + x_i)
        rec["theta_v"].append(wrap(alg.phi - delta))
        rec["I_cd"].append(alg.I_cd)
        rec["I_cq"].append(alg.I_cq)
        rec["P_c"].append(S.real)
        rec["Q_c"].append(S.imag)
        rec["s_r"].append(max(slips) if slips else math.nan)
        rec["U_dc"].append(U_dc)
        rec["lvrt_active"].append(int(active))
        rec["mode"].append(law.name.lower())

    def settle(n, x):
        """Solve the algebra at a step boundary and update the LVRT switches."""
        nonlocal active, t_act, U_prev, phi_prev
        t = n * dt
        stage = _stage_at(n, n_on, n_clear)
        for _ in range(4):
            law = law_at(t)
            _, alg = model.algebra(stage, x[0], x[3], x[4], law, U_prev, phi_prev)
            U_prev, phi_prev = alg.U_c, alg.phi
            nxt = lvrt_transition(active, alg.U_c, p)
            if nxt == active:
                break
            active = nxt
            if active:
                t_act = t
                events.append((t, "LVRT_on"))
            else:
                events.append((t, "LVRT_off"))
        return alg, law_at(t)

    stop = None
    try:
        def mark(n):
            if n_clear > n_on and n == n_on:
                events.append((n * dt, "fault_on"))
            if n_clear > n_on and n == n_clear:
                events.append((n * dt, "fault_clear"))

        mark(0)
        alg, law = settle(0, x)
        record(0.0, x, alg, law)
        for n in range(n_end):
            stage = _stage_at(n, n_on, n_clear)
            law = law_at(n * dt)
            k1, a1 = model.rhs(stage, x, law, U_prev, phi_prev, P_in)
            if rk4:
                k2, a2 = model.rhs(stage, _advance(x, k1, 0.5 * dt), law, a1.U_c, a1.phi, P_in)
                k3, a3 = model.rhs(stage, _advance(x, k2, 0.5 * dt), law, a2.U_c, a2.phi, P_in)
                k4, _ = model.rhs(stage, _advance(x, k3, dt), law, a3.U_c, a3.phi, P_in)
                x = _combine(x, (k1, k2, k3, k4), (1 / 6, 1 / 3, 1 / 3, 1 / 6), dt)
            else:
                k2, _ = model.rhs(stage, _advance(x, k1, dt), law, a1.U_c, a1.phi, P_in)
                x = _combine(x, (k1, k2), (0.5, 0.5), dt)
            U_prev, phi_prev = a1.U_c, a1.phi
            slips = [min(max(s, 1e-6), 1.0) for s in x[4]]
            x = (x[0], x[1], x[2], x[3], slips)
            if x[2] <= 0:
                raise DcCollapse("DC-link voltage proxy reached zero")
            m = n + 1
            mark(m)
            alg, law = settle(m, x)
            if m % every == 0 or m == n_end or m == n_on or m == n_clear:
                record(m * dt, x, alg, law)
            if abs(x[0] - delta0) > LOS_ANGLE:
                stop = ((m * dt, "LOS", "PLL angle drift beyond 360 deg"))
                break
            if monitor is not None and not monitor(m * dt, alg.U_c, _stage_at(m, n_on, n_clear)):
                stop = (m * dt, "Stopped", "monitor")
                if rec["t"][-1] != m * dt:
                    record(m * dt, x, alg, law)
                break
    except NoSolution as exc:
        stop = (rec["t"][-1] if rec["t"] else 0.0, "LOS", str(exc))
    except DcCollapse as exc:
        stop = (rec["t"][-1] if rec["t"] else 0.0, "DcCollapse", str(exc))
    if stop is not None:
        events.append(stop)
        log.info("%s: %s at t=%.4f s", scn.name, stop[1], stop[0])
    events = [(round(e[0], 9),) + tuple(e[1:]) for e in events]

    data = {c: (np.array(v, dtype=float) if c != "mode" else np.array(v, dtype=object))
            for c, v in rec.items()}
    header = {"scenario": scn.name, "mode": p.mode.value, "dt": dt,
              "integrator": scn.sim.integrator, "delta_c0": delta0,
              "motors": [dict(H_m=m.H_m, T_m=m.T_m, size=m.size) for m in model.plant.motors]}
    return TimeSeries(data, events, scn.name, header)


# ---------------------------------------------------------------------------
# critical clearing time


@dataclass(frozen=True)
class RecoveryCriterion:
    """Post-clearing voltage envelope, piecewise linear in time since clearing."""

    times: tuple = (0.0, 1.0)
    levels: tuple = (0.15, 0.90)
    horizon: float = 1.2

    def envelope(self, tau: float) -> float:
        return float(np.interp(tau, self.times, self.levels))

    def tighter(self, dv: float) -> "RecoveryCriterion":
        return replace(self, levels=tuple(v + dv for v in self.levels))


@dataclass(frozen=True)
class CctResult:
    cct: float
    censored: bool
    evaluations: tuple


def recovery_passes(scn: Scenario, criterion: RecoveryCriterion) -> bool:
    t_clear = scn.fault.t_clear

    def monitor(t, U_c, stage):
        if stage != POST:
            return True
        return U_c >= criterion.envelope(t - t_clear) - 1e-12

    ts = simulate(scn, monitor=monitor)
    return ts.terminated is None


def cct_search(scn: Scenario, criterion: RecoveryCriterion = RecoveryCriterion(),
               lo: float = 0.01, hi: float = 0.5, resolution: float = 1e-3) -> CctResult:
    """Largest fault duration (to ``resolution``) whose recovery meets ``criterion``."""
    evals = []

    def ok(duration):
        duration = round(duration, 9)
        res = recovery_passes(scn.with_fault_duration(duration, criterion.horizon), criterion)
        evals.append((duration, res))
        return res

    lo_k = int(round(lo / resolution))
    hi_k = int(round(hi / resolution))
    pass_lo, pass_hi = ok(lo_k * resolution), ok(hi_k * resolution)
    if pass_hi:
        if not pass_lo:
            raise BracketFailure("criterion fails at the short end but passes at the long end")
        return CctResult(round(hi_k * resolution, 9), True, tuple(evals))
    if not pass_lo:
        raise BracketFailure("criterion fails at both bracket ends")
    while hi_k - lo_k > 1:
        mid = (lo_k + hi_k) // 2
        if ok(mid * resolution):
            lo_k = mid
        else:
            hi_k = mid
    return CctResult(round(lo_k * resolution, 9), False, tuple(evals))
