import numpy as np
import pytest

from mmplab.fields import Grid, PhysParams


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


@pytest.fixture
def grid8():
    return Grid(8, 2 * np.pi)


@pytest.fixture
def grid16():
    return Grid(16, 2 * np.pi)


@pytest.fixture
def params():
    return PhysParams(mu=1.0, gamma=1.0, chi=0.5, nu=1.0)


def random_state(grid, rng, solenoidal=True):
    """Random conjugate-symmetric StateField, optionally projected."""
    from mmplab.fields import StateField, leray_project
    from mmplab.grid import forward

    def comp():
        return forward(rng.normal(size=(3, grid.n, grid.n, grid.n)))

    u, w, b = comp(), comp(), comp()
    if solenoidal:
        u = leray_project(grid, u)
        b = leray_project(grid, b)
    return StateField(grid, u, w, b)
