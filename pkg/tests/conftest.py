import math

import numpy as np
import pytest

from nls_perturb.bdg import linearize, solve_modes
from nls_perturb.corrections import solve_all
from nls_perturb.discretization import build_grid
from nls_perturb.model import GrossPitaevskii, Logarithmic, certify


@pytest.fixture(scope="session")
def gp_background():
    grid = build_grid("periodic", 128, length=2 * math.pi)
    return certify(grid, np.ones(128), 1.0, np.zeros(128), GrossPitaevskii(1.0))


@pytest.fixture(scope="session")
def gp_basis(gp_background):
    return solve_modes(linearize(gp_background), 6)


@pytest.fixture(scope="session")
def gp_solved(gp_basis):
    return solve_all(gp_basis)


def gaussian_background(n_points=401, half_width=10.0, amplitude=1.0, **grid_kw):
    grid = build_grid("line", n_points, half_width=half_width, **grid_kw)
    f = amplitude * np.exp(-0.5 * grid.x**2)
    f[0] = f[-1] = 0.0
    return certify(grid, f, 1.0 - math.log(amplitude**2), np.zeros(n_points), Logarithmic())


@pytest.fixture(scope="session")
def log_background():
    return gaussian_background()


@pytest.fixture(scope="session")
def log_basis(log_background):
    return solve_modes(linearize(log_background), 3)


@pytest.fixture(scope="session")
def log_solved(log_basis):
    return solve_all(log_basis)
