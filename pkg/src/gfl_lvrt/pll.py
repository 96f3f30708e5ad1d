"""Synchronous-reference-frame PLL.

State is the phase ``delta_c`` (rad, unwrapped) and the integrator ``x_i``
(rad/s); the frequency deviation is ``omega_c = K_p*U_cq + x_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PllParams:
    K_p: float = 20.0
    K_i: float = 500.0
    omega_0: float = 100.0 * math.pi

    def __post_init__(self):
        if self.K_p <= 0 or self.K_i <= 0:
            raise ValueError("PLL gains must be positive")


@dataclass(frozen=True)
class PllState:
    delta_c: float = 0.0
    x_i: float = 0.0

    def omega(self, U_cq: float, params: PllParams) -> float:
        return params.K_p * U_cq + self.x_i


def pll_derivatives(state: PllState, U_cq: float, params: PllParams) -> tuple[float, float]:
    """``(d delta_c/dt, d x_i/dt)`` for q-axis PCC voltage ``U_cq``."""
    return params.K_p * U_cq + state.x_i, params.K_i * U_cq


def pll_equilibrium_check(state: PllState, U_cq: float, params: PllParams,
                          eps_sync: float = 1e-6, eps_omega: float = 1e-4) -> bool:
    return abs(U_cq) < eps_sync and abs(state.omega(U_cq, params)) < eps_omega
