"""Ground states: minimisers of the action over the Nehari manifold.

The constrained problem ``min J subject to I = 0`` is solved in direction
space.  For any pair with a positive coupling integral the ray
``lambda -> (lambda phi, lambda psi)`` crosses the Nehari manifold exactly once,
at a closed-form ``lambda_1``; the value of ``J`` there (the ray maximum) is a
scale-invariant objective that we descend with a Sobolev-preconditioned
gradient and a halving line search, re-projecting after every step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NehariError, ParameterError
from .functionals import action_J, coupling_integral, quadratic_form
from .grid import Grid
from .model import ModelParams, PotentialPair, coupling_forces

log = logging.getLogger(__name__)

# Sufficient-decrease constant of the line search.  Plain decrease is not
# enough: with symmetric couplings a unit step can swap the roles of phi and
# psi, an almost level move that would repeat forever.
_ARMIJO = 1e-4
_ROUNDOFF = 1e-14


def _q_and_n(phi, psi, params, pot, grid) -> tuple[float, float]:
    return quadratic_form(phi, psi, params, pot, grid), coupling_integral(phi, psi, params, grid)


def _lambda_from(Q: float, N: float, params: ModelParams) -> float:
    cN = (params.pq + 2) * params.coupling * N
    if not cN > 0:
        raise NehariError("coupling integral vanishes; the pair has no Nehari projection")
    return (Q / cN) ** (1.0 / params.pq)


def nehari_scale(phi, psi, params: ModelParams, pot: PotentialPair, grid: Grid) -> float:
    """Unique ``lambda > 0`` with ``I(lambda phi, lambda psi) = 0``.

    Solves ``lambda^2 Q = (p+q+2) a2' lambda^(p+q+2) N``.  Raises
    :class:`NehariError` when ``N = 0`` (e.g. fields with disjoint support).
    """
    Q, N = _q_and_n(phi, psi, params, pot, grid)
    return _lambda_from(Q, N, params)


def _reduced_from(Q: float, lam: float, params: ModelParams) -> float:
    return params.pq / (2 * (params.pq + 2)) * lam**2 * Q


def reduced_objective(phi, psi, params: ModelParams, pot: PotentialPair, grid: Grid) -> float:
    """``J`` at the Nehari projection of the ray through ``(phi, psi)``."""
    Q, N = _q_and_n(phi, psi, params, pot, grid)
    return _reduced_from(Q, _lambda_from(Q, N, params), params)


def action_gradient(phi, psi, params: ModelParams, pot: PotentialPair, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise first variation of ``J`` (the Euler-Lagrange defect)."""
    fu, fv = coupling_forces(phi, psi, params)
    a = params.alpha
    gphi = a * (-grid.laplacian(phi) + (params.m1**2 + pot.K1) * phi) - params.coupling * (params.p + 1) * fu
    gpsi = -grid.laplacian(psi) + (params.m2**2 + pot.K2) * psi - params.coupling * (params.q + 1) * fv
    return gphi, gpsi


def el_residual(phi, psi, params: ModelParams, pot: PotentialPair, grid: Grid) -> float:
    """Sup-norm Euler-Lagrange defect, normalised by ``sup(|phi| + |psi|) + 1``."""
    gphi, gpsi = action_gradient(phi, psi, params, pot, grid)
    defect = max(float(np.max(np.abs(gphi))), float(np.max(np.abs(gpsi))))
    if not math.isfinite(defect):
        return math.inf
    return defect / (float(np.max(np.abs(phi) + np.abs(psi))) + 1.0)


@dataclass
class GroundStateOptions:
    tol_residual: float = 1e-6
    max_iters: int = 5000
    min_step: float = 1e-12
    outside_theorem_range: bool = False


@dataclass
class GroundStateResult:
    Phi: np.ndarray
    Psi: np.ndarray
    d: float
    residual: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)

    def record(self) -> dict:
        return {"d": self.d, "residual": self.residual, "iterations": self.iterations, "converged": self.converged}


def gaussian_init(grid: Grid, width_factor: float = 0.1, amplitudes=(1.0, 1.0), center=None) -> tuple[np.ndarray, np.ndarray]:
    """Centered Gaussian bumps ``exp(-sum_i x_i^2 / w_i^2)`` with ``w_i = width_factor L_i``."""
    coords = grid.coordinates()
    center = center if center is not None else (0.0,) * grid.dim
    expo = sum(((x - c) / (width_factor * L)) ** 2 for x, c, L in zip(coords, center, grid.lengths))
    bump = np.broadcast_to(np.exp(-expo), grid.shape).copy()
    return amplitudes[0] * bump, amplitudes[1] * bump


def _check_range(params: ModelParams, opts: GroundStateOptions) -> None:
    if opts.outside_theorem_range or params.outside_theorem_range:
        return
    verdict = params.exponent_verdict()
    if not verdict.ground_state_ok:
        raise ParameterError(
            f"ground state not covered for n={params.n}, p={params.p}, q={params.q} "
            "(n = 2: p, q > 1; n = 3: 1 < p, q < 2/(n-2)); set outside_theorem_range to force"
        )


def minimize_ground_state(init, params: ModelParams, pot: PotentialPair, grid: Grid,
                          opts: GroundStateOptions | None = None) -> GroundStateResult:
    """Minimise ``J`` over the Nehari manifold starting from ``init = (phi0, psi0)``.

    Each iteration takes the preconditioned direction
    ``-(alpha(-Lap + m1^2))^{-1} dJ/dphi, -(-Lap + m2^2)^{-1} dJ/dpsi``,
    halves the step from 1 until the reduced objective decreases sufficiently
    (Armijo), and rescales the accepted pair back onto the manifold.  Stops when :func:`el_residual`
    drops below ``opts.tol_residual``; otherwise returns ``converged=False``
    after ``opts.max_iters`` iterations or when no decreasing step exists.
    """
    opts = opts or GroundStateOptions()
    _check_range(params, opts)
    phi = grid.check(init[0]).copy()
    psi = grid.check(init[1]).copy()

    Q, N = _q_and_n(phi, psi, params, pot, grid)
    lam = _lambda_from(Q, N, params)
    phi *= lam
    psi *= lam
    Q *= lam**2
    R = _reduced_from(Q, 1.0, params)
    history = [R]

    shift1, shift2 = params.m1**2, params.m2**2
    converged = False
    residual = math.inf
    it = 0
    for it in range(opts.max_iters + 1):
        gphi, gpsi = action_gradient(phi, psi, params, pot, grid)
        residual = max(float(np.max(np.abs(gphi))), float(np.max(np.abs(gpsi)))) / (
            float(np.max(np.abs(phi) + np.abs(psi))) + 1.0
        )
        if residual < opts.tol_residual:
            converged = True
            break
        if it == opts.max_iters:
            break
        dphi = -grid.solve_helmholtz(gphi, shift1) / params.alpha
        dpsi = -grid.solve_helmholtz(gpsi, shift2)
        # on the manifold the reduced objective and J share their first variation
        slope = -grid.integrate(gphi * dphi + gpsi * dpsi)
        slack = _ROUNDOFF * abs(R)

        step = 1.0
        accepted = False
        while step >= opts.min_step:
            tphi = phi + step * dphi
            tpsi = psi + step * dpsi
            tQ, tN = _q_and_n(tphi, tpsi, params, pot, grid)
            if tN > 0:
                tlam = _lambda_from(tQ, tN, params)
                tR = _reduced_from(tQ, tlam, params)
                if tR < R and tR <= R - _ARMIJO * step * slope + slack:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            log.info("line search stalled at iteration %d (residual %.3e)", it, residual)
            break
        phi = tlam * tphi
        psi = tlam * tpsi
        R = tR
        history.append(R)

    d = action_J(phi, psi, params, pot, grid)
    if converged and not d > 0:
        converged = False
    return GroundStateResult(phi, psi, d, residual, it, converged, history)


def multi_start(params: ModelParams, pot: PotentialPair, grid: Grid, opts: GroundStateOptions | None = None,
                starts: int = 3, seed: int = 0) -> tuple[GroundStateResult, list[GroundStateResult]]:
    """Run several minimisations and return the lowest converged level.

    Start 0 is the default centered Gaussian pair; later starts randomise the
    width, the relative amplitude of the two components and a small node-aligned
    offset of the center, drawn from ``numpy.random.default_rng(seed)``.
    """
    rng = np.random.default_rng(seed)
    results = []
    for k in range(starts):
        if k == 0:
            init = gaussian_init(grid)
        else:
            width = 0.1 * rng.uniform(0.7, 1.3)
            ratio = rng.uniform(0.5, 2.0)
            # snapped to a node: off-node profiles creep towards one very slowly
            center = tuple(round(rng.uniform(-0.05, 0.05) * L / h) * h for L, h in zip(grid.lengths, grid.spacing))
            init = gaussian_init(grid, width, (1.0, ratio), center)
        results.append(minimize_ground_state(init, params, pot, grid, opts))
    converged = [r for r in results if r.converged]
    pool = converged or results
    best = min(pool, key=lambda r: r.d if math.isfinite(r.d) else math.inf)
    return best, results
