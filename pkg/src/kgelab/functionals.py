"""Energy, action, Nehari functional and the norms they are built from.

Everything is assembled from two primitive integrals, computed once per call:

    Q = int alpha(|grad phi|^2 + m1^2 phi^2 + K1 phi^2) + |grad psi|^2 + m2^2 psi^2 + K2 psi^2
    N = int |phi|^{p+1} |psi|^{q+1}

so that J = Q/2 - a2' N, I = Q - (p+q+2) a2' N and E = kinetic/2 + J.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .grid import Grid
from .model import ModelParams, PotentialPair, StateVector


def energy_norm_sq(f: np.ndarray, mass: float, K: np.ndarray, grid: Grid) -> float:
    """Squared energy-space norm ``||grad f||^2 + m^2 ||f||^2 + int K f^2``."""
    with np.errstate(over="ignore", invalid="ignore"):
        return grid.gradient_norm_sq(f) + grid.integrate((mass**2 + K) * f * f)


def quadratic_form(phi, psi, params: ModelParams, pot: PotentialPair, grid: Grid) -> float:
    hu = energy_norm_sq(phi, params.m1, pot.K1, grid)
    hv = energy_norm_sq(psi, params.m2, pot.K2, grid)
    return params.alpha * hu + hv


def coupling_integral(phi, psi, params: ModelParams, grid: Grid) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        return grid.integrate(np.abs(phi) ** (params.p + 1) * np.abs(psi) ** (params.q + 1))


def action_J(phi, psi, params: ModelParams, pot: PotentialPair, grid: Grid) -> float:
    Q = quadratic_form(phi, psi, params, pot, grid)
    N = coupling_integral(phi, psi, params, grid)
    return _combine(0.5 * Q, params.coupling * N)


def nehari_I(phi, psi, params: ModelParams, pot: PotentialPair, grid: Grid) -> float:
    Q = quadratic_form(phi, psi, params, pot, grid)
    N = coupling_integral(phi, psi, params, grid)
    return _combine(Q, (params.pq + 2) * params.coupling * N)


def energy(state: StateVector, params: ModelParams, pot: PotentialPair, grid: Grid) -> float:
    return functional_report(state, params, pot, grid).E


def _combine(positive: float, negative: float) -> float:
    # inf - inf would be nan; an overflowed state reports the +inf sentinel
    if not (math.isfinite(positive) and math.isfinite(negative)):
        return math.inf
    return positive - negative


@dataclass(frozen=True)
class FunctionalReport:
    E: float
    J: float
    I: float
    Q: float
    N: float
    kinetic: float
    l2_weighted: float
    h1k_u: float
    h1k_v: float
    overflow: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def overflowed(cls) -> FunctionalReport:
        inf = math.inf
        return cls(inf, inf, inf, inf, inf, inf, inf, inf, inf, overflow=True)


def functional_report(state: StateVector, params: ModelParams, pot: PotentialPair, grid: Grid) -> FunctionalReport:
    """Evaluate every scalar functional of ``state`` in one pass."""
    if state.overflowed or not state.is_finite():
        return FunctionalReport.overflowed()
    alpha = params.alpha
    h1k_u = energy_norm_sq(state.u, params.m1, pot.K1, grid)
    h1k_v = energy_norm_sq(state.v, params.m2, pot.K2, grid)
    Q = alpha * h1k_u + h1k_v
    N = coupling_integral(state.u, state.v, params, grid)
    kinetic = alpha * grid.l2_sq(state.ut) + grid.l2_sq(state.vt)
    l2w = alpha * grid.l2_sq(state.u) + grid.l2_sq(state.v)
    cN = params.coupling * N
    J = _combine(0.5 * Q, cN)
    I = _combine(Q, (params.pq + 2) * cN)
    E = _combine(0.5 * kinetic + 0.5 * Q, cN)
    overflow = not all(math.isfinite(x) for x in (E, J, I, Q, N, kinetic, l2w))
    return FunctionalReport(E, J, I, Q, N, kinetic, l2w, h1k_u, h1k_v, overflow)


def cross_integral(state: StateVector, params: ModelParams, grid: Grid) -> float:
    """``int (alpha u u_t + v v_t) dx``, half the derivative of the weighted L2 norm."""
    with np.errstate(over="ignore", invalid="ignore"):
        return grid.integrate(params.alpha * state.u * state.ut + state.v * state.vt)
