import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgelab.errors import FieldError
from kgelab.grid import Grid, load_field, save_field
from kgelab.groundstate import gaussian_init

from conftest import band_limited


class TestValidation:
    @pytest.mark.parametrize("points", [(6,), (9,), (16, 7)])
    def test_rejects_small_or_odd_counts(self, points):
        with pytest.raises(ValueError):
            Grid(points, (1.0,) * len(points))

    def test_rejects_bad_lengths_and_dimension(self):
        with pytest.raises(ValueError):
            Grid((8,), (0.0,))
        with pytest.raises(ValueError):
            Grid((8,) * 4, (1.0,) * 4)

    def test_memory_budget(self):
        with pytest.raises(ValueError, match="budget"):
            Grid((64, 64), (1.0, 1.0), max_points=1000)

    def test_spacing(self):
        g = Grid((16, 8), (4.0, 2.0))
        assert g.spacing == (0.25, 0.25)
        assert g.cell_volume == 0.0625

    def test_field_on_other_grid_rejected(self):
        g = Grid((16,), (1.0,))
        with pytest.raises(FieldError):
            g.laplacian(np.zeros(32))

    def test_nonfinite_laplacian_rejected(self):
        g = Grid((16,), (1.0,))
        f = g.zeros()
        f[3] = np.nan
        with pytest.raises(FieldError):
            g.laplacian(f)


class TestLaplacian:
    def test_constant_in_kernel(self):
        g = Grid((16, 16), (3.0, 5.0))
        assert np.max(np.abs(g.laplacian(np.full(g.shape, 2.5)))) < 1e-13

    def test_sine_eigenfunction(self):
        g = Grid((64,), (2 * math.pi,))
        (x,) = g.coordinates()
        f = np.sin(2 * math.pi * x / (2 * math.pi))
        # sample rounding (~1e-16) is amplified by up to k_max^2 = 1024
        assert np.max(np.abs(g.laplacian(f) + f)) < 1e-12

    def test_matches_finite_differences_second_order(self, rng):
        # centered FD error ~ h^2 |f''''| / 12: ratio between h and h/2 must be ~4
        errs = []
        for n in (32, 64, 128):
            g = Grid((n, n), (2 * math.pi, 2 * math.pi))
            x, y = g.mesh()
            f = np.sin(x) * np.cos(2 * y) + 0.5 * np.cos(3 * x + y)
            h = g.spacing[0]
            fd = sum((np.roll(f, 1, a) - 2 * f + np.roll(f, -1, a)) / h**2 for a in (0, 1))
            errs.append(np.max(np.abs(g.laplacian(f) - fd)))
        assert 3.8 < errs[0] / errs[1] < 4.2
        assert 3.8 < errs[1] / errs[2] < 4.2

    @settings(max_examples=25, deadline=None)
    @given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 2**32 - 1))
    def test_linearity(self, a, b, seed):
        rng = np.random.default_rng(seed)
        g = Grid((16, 16), (4.0, 6.0))
        f, h = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
        lhs = g.laplacian(a * f + b * h)
        rhs = a * g.laplacian(f) + b * g.laplacian(h)
        scale = 1 + np.max(np.abs(rhs))
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 3))
    def test_divergence_theorem(self, seed, dim):
        rng = np.random.default_rng(seed)
        g = Grid((16,) * dim, tuple(rng.uniform(1, 10, dim)))
        f = band_limited(g, rng)
        lap = g.laplacian(f)
        assert abs(g.integrate(lap)) <= 1e-10 * (g.integrate(np.abs(lap)) + 1e-300)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 3))
    def test_integration_by_parts(self, seed, dim):
        rng = np.random.default_rng(seed)
        g = Grid((16,) * dim, tuple(rng.uniform(1, 10, dim)))
        f = rng.standard_normal(g.shape)  # the identity is exact for every grid field
        lhs = g.gradient_norm_sq(f)
        rhs = -g.integrate(f * g.laplacian(f))
        assert abs(lhs - rhs) <= 1e-10 * lhs


class TestQuadrature:
    def test_constant(self):
        assert Grid((8,), (2.0,)).integrate(np.ones(8)) == pytest.approx(2.0, rel=1e-15)

    def test_full_period_sine(self):
        g = Grid((64,), (3.0,))
        (x,) = g.coordinates()
        assert abs(g.integrate(np.sin(2 * math.pi * x / 3.0))) < 1e-14

    def test_refinement_narrow_gaussian(self):
        vals = []
        for n in (64, 256):
            g = Grid((n, n), (20.0, 20.0))
            vals.append(g.integrate(gaussian_init(g, 0.05)[0]))
        assert abs(vals[0] - vals[1]) / vals[1] < 1e-8
        # and both agree with the analytic pi w^2
        assert vals[1] == pytest.approx(math.pi * 1.0**2, rel=1e-10)

    def test_nonfinite_is_inf(self):
        g = Grid((8,), (1.0,))
        f = np.ones(8)
        f[0] = np.inf
        assert g.integrate(f) == math.inf
        assert g.gradient_norm_sq(f) == math.inf


class TestGradientNorm:
    def test_constant(self):
        g = Grid((16,), (1.0,))
        assert g.gradient_norm_sq(np.full(16, 3.0)) == 0.0

    def test_sine(self):
        g = Grid((64,), (2 * math.pi,))
        (x,) = g.coordinates()
        assert g.gradient_norm_sq(np.sin(x)) == pytest.approx(math.pi, rel=1e-13)

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_parseval_matches_spectral_gradient(self, rng, dim):
        g = Grid((16,) * dim, (5.0, 7.0, 3.0)[:dim])
        f = band_limited(g, rng, kmax=7)  # below Nyquist, where both paths agree
        direct = sum(g.l2_sq(d) for d in g.gradient(f))
        assert g.gradient_norm_sq(f) == pytest.approx(direct, rel=1e-10)

    def test_helmholtz_inverse(self, rng):
        g = Grid((16, 16), (5.0, 7.0))
        f = rng.standard_normal(g.shape)
        u = g.solve_helmholtz(f, 2.0)
        assert np.max(np.abs(-g.laplacian(u) + 2.0 * u - f)) < 1e-12


class TestSnapshots:
    @pytest.mark.parametrize("points,lengths", [((8,), (1.5,)), ((16, 8), (3.0, 5.0)), ((8, 8, 10), (1.0, 2.0, 3.0))])
    def test_round_trip(self, tmp_path, rng, points, lengths):
        g = Grid(points, lengths)
        f = rng.standard_normal(g.shape)
        path = tmp_path / "f.field"
        save_field(path, g, f)
        g2, f2 = load_field(path)
        assert g2 == g
        assert np.array_equal(f, f2)

    def test_header_and_layout(self, tmp_path):
        g = Grid((8, 8), (1.0, 2.0))
        f = np.arange(64, dtype=float).reshape(8, 8)
        path = tmp_path / "f.field"
        save_field(path, g, f)
        raw = path.read_bytes()
        header, _, payload = raw.partition(b"\n")
        assert header == b"KGELAB-FIELD v1; dim=2; points=8,8; lengths=1.0,2.0; encoding=f64le"
        assert np.array_equal(np.frombuffer(payload, "<f8"), np.arange(64.0))

    def test_bad_file(self, tmp_path):
        path = tmp_path / "bad.field"
        path.write_bytes(b"NOT A FIELD\n")
        with pytest.raises(FieldError):
            load_field(path)
        g = Grid((8,), (1.0,))
        save_field(path, g, np.zeros(8))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FieldError, match="expected 8"):
            load_field(path)
