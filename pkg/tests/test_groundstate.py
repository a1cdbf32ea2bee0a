import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgelab.errors import NehariError, ParameterError
from kgelab.functionals import action_J, coupling_integral, nehari_I, quadratic_form
from kgelab.grid import Grid
from kgelab.groundstate import (
    GroundStateOptions,
    el_residual,
    gaussian_init,
    minimize_ground_state,
    multi_start,
    nehari_scale,
    reduced_objective,
)
from kgelab.model import ModelParams, PotentialPair

from conftest import random_pair


@pytest.fixture
def cubic_1d():
    grid = Grid((256,), (40.0,))
    params = ModelParams(1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 1, outside_theorem_range=True)
    return grid, params, PotentialPair.zero(grid)


class TestNehariScale:
    def test_closed_form_example(self, cubic_1d):
        grid, params, pot = cubic_1d
        assert params.a2prime == 1.0 and params.pq == 2
        (x,) = grid.coordinates()
        f = np.exp(-(x**2))
        h = quadratic_form(f, f, params, pot, grid)
        n0 = coupling_integral(f, f, params, grid)
        c = math.sqrt(h / (4 * n0))  # Q(c f, c f) = 4 N(c f, c f)
        phi = c * f
        Q, N = quadratic_form(phi, phi, params, pot, grid), coupling_integral(phi, phi, params, grid)
        assert Q / N == pytest.approx(4.0, rel=1e-14)
        # lambda^2 Q = 4 lambda^4 N has the root lambda = (Q / 4N)^(1/2) = 1
        assert nehari_scale(phi, phi, params, pot, grid) == pytest.approx(1.0, rel=1e-14)

    def test_disjoint_support(self, grid2, params2, zero_pot):
        phi, psi = grid2.zeros(), grid2.zeros()
        phi[:10] = 1.0
        psi[20:] = 1.0
        with pytest.raises(NehariError):
            nehari_scale(phi, psi, params2, zero_pot, grid2)
        with pytest.raises(NehariError):
            reduced_objective(phi, psi, params2, zero_pot, grid2)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_projection_and_idempotence(self, seed):
        rng = np.random.default_rng(seed)
        grid = Grid((32, 32), (20.0, 20.0))
        params = ModelParams(1.0, 1.3, 0.8, 1.5, 2.0, 3.0, 2)
        pot = PotentialPair.gaussian_well(grid, 0.5, 3.0)
        phi, psi = random_pair(grid, rng)
        lam = nehari_scale(phi, psi, params, pot, grid)
        a, b = lam * phi, lam * psi
        assert abs(nehari_I(a, b, params, pot, grid)) < 1e-10 * quadratic_form(a, b, params, pot, grid)
        assert nehari_scale(a, b, params, pot, grid) == pytest.approx(1.0, abs=1e-10)

    def test_reduced_objective(self, grid2, params2, zero_pot, rng):
        phi, psi = random_pair(grid2, rng)
        r = reduced_objective(phi, psi, params2, zero_pot, grid2)
        for c in (0.5, 3.0):
            assert reduced_objective(c * phi, c * psi, params2, zero_pot, grid2) == pytest.approx(r, rel=1e-9)
        lam = nehari_scale(phi, psi, params2, zero_pot, grid2)
        assert action_J(lam * phi, lam * psi, params2, zero_pot, grid2) == pytest.approx(r, rel=1e-10)


class TestResidual:
    def test_zero_pair(self, grid2, params2, zero_pot):
        z = grid2.zeros()
        assert el_residual(z, z, params2, zero_pot, grid2) == 0.0

    def test_exact_sech_pair(self):
        # A sech(m x), A^2 = 2 m^2 / a, solves -f'' + m^2 f = a f^3
        grid = Grid((512,), (50.0,))
        params = ModelParams(1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 1, outside_theorem_range=True)
        (x,) = grid.coordinates()
        f = 1.0 / np.cosh(x)
        assert el_residual(f, f, params, PotentialPair.zero(grid), grid) < 1e-8

    def test_scalar_sech_oracle_by_substitution(self):
        # independent check of the oracle on a fine grid, for a few (m, a)
        grid = Grid((2048,), (100.0,))
        (x,) = grid.coordinates()
        for m, a in ((1.0, 2.0), (1.5, 0.7), (0.8, 3.0)):
            A = math.sqrt(2 * m**2 / a)
            f = A / np.cosh(m * x)
            defect = -grid.laplacian(f) + m**2 * f - a * f**3
            assert np.max(np.abs(defect)) < 1e-9

    def test_decreases_under_one_step(self, grid2, params2, zero_pot, rng):
        phi, psi = random_pair(grid2, rng)
        lam = nehari_scale(phi, psi, params2, zero_pot, grid2)
        r0 = el_residual(lam * phi, lam * psi, params2, zero_pot, grid2)
        assert r0 > 0
        res = minimize_ground_state((phi, psi), params2, zero_pot, grid2, GroundStateOptions(max_iters=1))
        assert res.residual < r0


class TestMinimizer:
    def test_sech_oracle(self, cubic_1d):
        grid, params, pot = cubic_1d
        res = minimize_ground_state(gaussian_init(grid), params, pot, grid)
        assert res.converged and res.residual < 1e-6
        (x,) = grid.coordinates()
        exact = 1.0 / np.cosh(x)
        assert np.max(np.abs(res.Phi - exact)) < 1e-3
        assert np.max(np.abs(res.Psi - exact)) < 1e-3
        # J(sech, sech) = (1/2)(2 int sech'^2 + sech^2) - int sech^4 ... = 4/3 analytically
        assert res.d == pytest.approx(4.0 / 3.0, rel=1e-6)

    def test_result_invariants(self, gs_setup):
        grid, params, pot, res = gs_setup
        assert res.d > 0
        assert res.d == action_J(res.Phi, res.Psi, params, pot, grid)
        Q = quadratic_form(res.Phi, res.Psi, params, pot, grid)
        assert abs(nehari_I(res.Phi, res.Psi, params, pot, grid)) < 1e-10 * Q
        assert res.record() == {"d": res.d, "residual": res.residual, "iterations": res.iterations, "converged": True}

    def test_monotone_history(self, gs_setup):
        h = np.array(gs_setup[3].history)
        assert np.all(np.diff(h) <= 0)

    def test_sign_pattern(self, gs_setup):
        grid, params, pot, res = gs_setup
        Q = quadratic_form(res.Phi, res.Psi, params, pot, grid)
        assert nehari_I(0.5 * res.Phi, 0.5 * res.Psi, params, pot, grid) > 0
        assert abs(nehari_I(res.Phi, res.Psi, params, pot, grid)) < 1e-10 * Q
        assert nehari_I(2 * res.Phi, 2 * res.Psi, params, pot, grid) < 0

    def test_ray_maximality(self, gs_setup):
        grid, params, pot, res = gs_setup
        for lam in (0.25, 0.5, 2.0, 4.0):
            assert action_J(lam * res.Phi, lam * res.Psi, params, pot, grid) < res.d

    def test_lower_than_random_directions(self, gs_setup, rng):
        grid, params, pot, res = gs_setup
        for _ in range(5):
            phi, psi = random_pair(grid, rng)
            assert reduced_objective(phi, psi, params, pot, grid) > res.d

    def test_refuses_outside_window(self):
        grid = Grid((8, 8, 8), (10.0, 10.0, 10.0))
        params = ModelParams(1, 1, 1, 1, 3.0, 3.0, 3)
        with pytest.raises(ParameterError, match="not covered"):
            minimize_ground_state(gaussian_init(grid), params, PotentialPair.zero(grid), grid)

    def test_nonconvergence_is_reported(self, grid2, params2, zero_pot):
        res = minimize_ground_state(gaussian_init(grid2), params2, zero_pot, grid2, GroundStateOptions(max_iters=2))
        assert not res.converged and res.iterations == 2

    def test_potential_raises_level(self, gs_setup):
        grid, params, pot, res = gs_setup
        well = PotentialPair.harmonic(grid, 0.05)
        with_well = minimize_ground_state(gaussian_init(grid), params, well, grid)
        assert with_well.converged and with_well.d > res.d


class TestMultiStart:
    def test_starts_agree_and_deterministic(self):
        grid = Grid((64, 64), (20.0, 20.0))
        params = ModelParams(1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2)
        pot = PotentialPair.zero(grid)
        best, results = multi_start(params, pot, grid, starts=3, seed=7)
        assert all(r.converged for r in results)
        ds = [r.d for r in results]
        assert max(ds) - min(ds) < 1e-8 * best.d
        again, _ = multi_start(params, pot, grid, starts=3, seed=7)
        assert again.d == best.d
