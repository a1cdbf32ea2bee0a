import sys

import numpy as np
import pytest

from kgelab.grid import Grid
from kgelab.groundstate import gaussian_init
from kgelab.model import ModelParams, PotentialPair


def random_bumps(grid, rng, bumps=3, width=(0.06, 0.12), amp=(0.3, 1.5)):
    """Positive smooth field: a few Gaussian bumps well inside the box."""
    f = grid.zeros()
    for _ in range(bumps):
        c = tuple(rng.uniform(-0.15, 0.15) * L for L in grid.lengths)
        f = f + rng.uniform(*amp) * gaussian_init(grid, rng.uniform(*width), (1.0, 1.0), c)[0]
    return f


def random_pair(grid, rng):
    return random_bumps(grid, rng), random_bumps(grid, rng)


def band_limited(grid, rng, kmax=4):
    """Random real trigonometric polynomial with wavenumbers below ``kmax`` per axis."""
    f = grid.zeros()
    coords = grid.coordinates()
    for _ in range(6):
        phase = rng.uniform(0, 2 * np.pi)
        arg = phase
        for x, L in zip(coords, grid.lengths):
            arg = arg + 2 * np.pi * rng.integers(-kmax, kmax + 1) * x / L
        f = f + rng.normal() * np.cos(arg)
    return f


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid2():
    return Grid((48, 48), (20.0, 20.0))


@pytest.fixture
def params2():
    # asymmetric couplings so alpha != 1 and a1 != a2
    return ModelParams(m1=1.0, m2=1.3, a1=0.8, a2=1.5, p=2.0, q=3.0, n=2)


@pytest.fixture
def zero_pot(grid2):
    return PotentialPair.zero(grid2)


@pytest.fixture(scope="session")
def gs_setup():
    """Converged 2-D ground state (p = q = 2, unit masses and couplings, L = 20, 64^2)."""
    from kgelab.groundstate import minimize_ground_state

    grid = Grid((64, 64), (20.0, 20.0))
    params = ModelParams(1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2)
    pot = PotentialPair.zero(grid)
    res = minimize_ground_state(gaussian_init(grid), params, pot, grid)
    assert res.converged
    return grid, params, pot, res


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
