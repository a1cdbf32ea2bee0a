"""Desk-scale invariant checks behind ``kgelab verify``.

Each check returns an observed error that must not exceed its tolerance.
"""

from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .blowup import g_diagnostics, negative_energy_construct, tmax_bound
from .evolve import IntegratorConfig, simulate, step_leapfrog
from .functionals import action_J, functional_report, nehari_I, quadratic_form
from .grid import Grid, load_field, save_field
from .groundstate import GroundStateOptions, el_residual, gaussian_init, minimize_ground_state, nehari_scale
from .model import ModelParams, PotentialPair, StateVector


@dataclass(frozen=True)
class CheckResult:
    name: str
    tolerance: float
    observed: float

    @property
    def passed(self) -> bool:
        return math.isfinite(self.observed) and self.observed <= self.tolerance


def _smooth_pair(grid: Grid, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    # random Gaussian bumps, positive and well inside the box
    out = []
    for _ in range(2):
        f = grid.zeros()
        for _ in range(3):
            c = tuple(rng.uniform(-0.15, 0.15) * L for L in grid.lengths)
            w = rng.uniform(0.06, 0.12)
            f = f + rng.uniform(0.3, 1.5) * gaussian_init(grid, w, (1.0, 1.0), c)[0]
        out.append(f)
    return out[0], out[1]


def _laplacian() -> float:
    grid = Grid((32, 32), (2 * math.pi, 2 * math.pi))
    x, y = grid.mesh()
    f = np.sin(2 * x) * np.cos(3 * y)
    return float(np.max(np.abs(grid.laplacian(f) + 13 * f)))


def _parseval() -> float:
    grid = Grid((32, 32), (2 * math.pi, 4 * math.pi))
    x, y = grid.mesh()
    f = np.sin(3 * x) + np.cos(2 * y) * np.sin(x)
    direct = sum(grid.l2_sq(g) for g in grid.gradient(f))
    return abs(grid.gradient_norm_sq(f) - direct) / direct


def _snapshot() -> float:
    grid = Grid((16, 8), (3.0, 5.0))
    f = np.random.default_rng(1).standard_normal(grid.shape)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "f.field"
        save_field(path, grid, f)
        g2, f2 = load_field(path)
    return 0.0 if (g2 == grid and np.array_equal(f, f2)) else 1.0


def _model_2d() -> tuple[Grid, ModelParams, PotentialPair]:
    grid = Grid((48, 48), (20.0, 20.0))
    return grid, ModelParams(1.0, 1.2, 1.0, 1.5, 2.0, 3.0, 2), PotentialPair.zero(grid)


def _nehari() -> float:
    grid, params, pot = _model_2d()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(10):
        phi, psi = _smooth_pair(grid, rng)
        lam = nehari_scale(phi, psi, params, pot, grid)
        a, b = lam * phi, lam * psi
        worst = max(worst, abs(nehari_I(a, b, params, pot, grid)) / quadratic_form(a, b, params, pot, grid),
                    abs(nehari_scale(a, b, params, pot, grid) - 1))
    return worst


def _derivative_identity() -> float:
    grid, params, pot = _model_2d()
    rng = np.random.default_rng(3)
    worst = 0.0
    h = 1e-4
    for _ in range(5):
        phi, psi = _smooth_pair(grid, rng)
        lam = rng.uniform(0.3, 1.0)
        jp = action_J((lam + h) * phi, (lam + h) * psi, params, pot, grid)
        jm = action_J((lam - h) * phi, (lam - h) * psi, params, pot, grid)
        fd = lam * (jp - jm) / (2 * h)
        exact = nehari_I(lam * phi, lam * psi, params, pot, grid)
        worst = max(worst, abs(fd - exact) / abs(exact))
    return worst


def _small_data() -> tuple[Grid, ModelParams, PotentialPair, StateVector]:
    grid = Grid((32, 32), (20.0, 20.0))
    params = ModelParams(1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2)
    u, v = gaussian_init(grid, 0.1, (0.1, 0.1))
    return grid, params, PotentialPair.zero(grid), StateVector(u, 0.05 * u, v, -0.05 * v)


def _energy_drift() -> float:
    grid, params, pot, s0 = _small_data()
    traj = simulate(s0, IntegratorConfig(dt=0.0005, t_end=1.0, sample_every=100), params, pot, grid)
    return traj.e_drift


def _reversibility() -> float:
    grid, params, pot, s = _small_data()
    s0 = s
    for _ in range(50):
        s = step_leapfrog(s, 0.01, params, pot, grid)
    for _ in range(50):
        s = step_leapfrog(s, -0.01, params, pot, grid)
    return max(float(np.max(np.abs(a - b))) for a, b in ((s.u, s0.u), (s.v, s0.v), (s.ut, s0.ut), (s.vt, s0.vt)))


def _g_second() -> float:
    # centered differences of sampled G against the closed-form G''
    grid, params, pot, s = _small_data()
    s = StateVector(5 * s.u, 5 * s.ut, 5 * s.v, 5 * s.vt)
    dt = 1e-3
    prev = step_leapfrog(s, -dt, params, pot, grid)
    nxt = step_leapfrog(s, dt, params, pot, grid)
    G = [g_diagnostics(x, params, pot, grid)[0] for x in (prev, s, nxt)]
    fd = (G[2] - 2 * G[1] + G[0]) / dt**2
    exact = g_diagnostics(s, params, pot, grid)[2]
    return abs(fd - exact) / abs(exact)


def _sech() -> tuple[float, float]:
    grid = Grid((512,), (40.0,))
    params = ModelParams(1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 1, outside_theorem_range=True)
    pot = PotentialPair.zero(grid)
    init = gaussian_init(grid, 0.1)
    res = minimize_ground_state(init, params, pot, grid, GroundStateOptions(tol_residual=1e-7))
    (x,) = grid.coordinates()
    exact = 1.0 / np.cosh(x)
    err = max(float(np.max(np.abs(res.Phi - exact))), float(np.max(np.abs(res.Psi - exact))))
    return err, el_residual(res.Phi, res.Psi, params, pot, grid)


def _negative_energy_bound() -> float:
    # 0 when the closed-form constructor lands at E(0) < 0, else 1
    grid, params, pot, s = _small_data()
    shape = StateVector.at_rest(s.u, s.v)
    st = negative_energy_construct(shape, params, pot, grid)
    rep = functional_report(st, params, pot, grid)
    return 0.0 if rep.E < 0 else 1.0


def _tmax_example() -> float:
    return abs(tmax_bound(4.0, 2.0, ModelParams(1, 1, 1, 1, 1.0, 1.0, 2, outside_theorem_range=True)) - 4.0)


def run_checks() -> list[CheckResult]:
    sech_err, sech_res = _sech()
    return [
        CheckResult("spectral Laplacian of a Fourier mode", 1e-10, _laplacian()),
        CheckResult("Parseval gradient norm", 1e-12, _parseval()),
        CheckResult("snapshot round-trip (bit-exact)", 0.0, _snapshot()),
        CheckResult("Nehari projection |I|/Q and idempotence", 1e-10, _nehari()),
        CheckResult("lambda dJ/dlambda vs I (rel-err)", 1e-6, _derivative_identity()),
        CheckResult("energy drift, small data", 1e-6, _energy_drift()),
        CheckResult("time reversibility", 1e-12, _reversibility()),
        CheckResult("G'' vs second difference of G", 1e-5, _g_second()),
        CheckResult("sech oracle sup-err", 1e-3, sech_err),
        CheckResult("sech oracle el_residual", 1e-6, sech_res),
        CheckResult("negative-energy constructor E(0)", 0.0, _negative_energy_bound()),
        CheckResult("blow-up time bound example", 1e-15, _tmax_example()),
    ]
