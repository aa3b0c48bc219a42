import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nls_perturb.discretization import build_grid
from nls_perturb.model import (ConvergenceError, DomainError, GrossPitaevskii, Logarithmic,
                               Polynomial, background_energy, background_norm, certify,
                               dfdomega, eval_potentials, make_model, solve_background)

from conftest import gaussian_background


@settings(max_examples=40, deadline=None)
@given(s=st.floats(1e-3, 10.0))
def test_primitives_differentiate_to_F(s):
    h = 1e-6 * s
    for model in (GrossPitaevskii(0.7), Logarithmic(), Polynomial((0.3, -1.0, 0.5))):
        deriv = (model.primitive(s + h) - model.primitive(s - h)) / (2 * h)
        assert deriv == pytest.approx(float(model.F(s)), rel=1e-6, abs=1e-8)
        dF = (model.F(s + h) - model.F(s - h)) / (2 * h)
        assert dF == pytest.approx(float(model.dF(s)), rel=1e-5, abs=1e-7)


def test_polynomial_reduces_to_gp():
    s = np.linspace(0, 3, 7)
    assert np.allclose(Polynomial((0.0, 2.0)).F(s), GrossPitaevskii(2.0).F(s))
    assert np.allclose(Polynomial((0.0, 2.0)).primitive(s), GrossPitaevskii(2.0).primitive(s))


def test_log_domain():
    with pytest.raises(DomainError):
        Logarithmic().F(np.array([1.0, 0.0]))
    assert Logarithmic().primitive(np.array([0.0]))[0] == 0.0


def test_make_model():
    assert make_model("gp", g=2.0) == GrossPitaevskii(2.0)
    assert isinstance(make_model("log"), Logarithmic)
    with pytest.raises(ValueError):
        make_model("poly")
    with pytest.raises(ValueError):
        make_model("cubic")


def test_log_potentials_are_amplitude_free():
    for amp in (0.5, 1.0, 2.0):
        bg = gaussian_background(201, 8.0, amp)
        pots = eval_potentials(bg)
        x = bg.grid.x[1:-1]
        # U - ω and 2fW do not depend on the amplitude
        assert np.allclose(pots.U[1:-1] - bg.omega, x**2 - 1, atol=1e-12)
        assert np.allclose(2 * bg.f[1:-1] * pots.W[1:-1], -2.0, atol=1e-12)


def test_log_potentials_reject_vanishing_profile():
    grid = build_grid("line", 101, half_width=5.0)
    f = np.exp(-0.5 * grid.x**2)
    f[40] = 0.0
    from nls_perturb.model import Background
    bg = Background(grid, f, 1.0, np.zeros(101), Logarithmic())
    with pytest.raises(DomainError, match="index 40"):
        eval_potentials(bg)


def test_gp_uniform_background_newton():
    grid = build_grid("periodic", 64, length=2 * math.pi)
    bg = solve_background(1.0, np.zeros(64), GrossPitaevskii(1.0), np.full(64, 0.9), grid)
    assert np.allclose(bg.f, 1.0, atol=1e-12)
    assert bg.residual < 1e-10
    assert np.allclose(dfdomega(bg), 0.5, atol=1e-10)


def test_newton_refuses_collapse_to_zero():
    # a guess far below the trap's nonlinear state drives Newton towards f = 0
    grid = build_grid("line", 201, half_width=8.0)
    guess = np.exp(-0.5 * grid.x**2)
    guess[0] = guess[-1] = 0
    with pytest.raises(ConvergenceError):
        solve_background(3.0, grid.x**2, GrossPitaevskii(1.0), guess, grid)


def test_log_background_newton_from_perturbed_guess():
    grid = build_grid("line", 401, half_width=10.0)
    guess = 1.2 * np.exp(-0.45 * grid.x**2)
    guess[0] = guess[-1] = 0
    bg = solve_background(1.0, np.zeros(401), Logarithmic(), guess, grid)
    exact = np.exp(-0.5 * grid.x**2)
    assert np.max(np.abs(bg.f - exact)) < 1e-10
    # the logarithmic background obeys df/dω = -f/2
    assert np.max(np.abs(dfdomega(bg) + 0.5 * bg.f)) < 1e-10


def test_harmonic_trap_background():
    grid = build_grid("line", 201, half_width=8.0)
    V = grid.x**2
    guess = math.sqrt(2) * np.exp(-0.5 * grid.x**2)
    guess[0] = guess[-1] = 0
    bg = solve_background(3.0, V, GrossPitaevskii(1.0), guess, grid)
    assert bg.residual < 1e-10 and np.min(bg.f[1:-1]) > -1e-12


def test_certify_rejects_non_stationary():
    grid = build_grid("periodic", 32, length=2 * math.pi)
    with pytest.raises(ConvergenceError):
        certify(grid, 1 + 0.1 * np.cos(grid.x), 1.0, np.zeros(32), GrossPitaevskii(1.0))
    with pytest.raises(ValueError):
        certify(grid, np.zeros(32), 1.0, np.zeros(32), GrossPitaevskii(1.0))


def test_newton_rejects_zero_guess():
    grid = build_grid("periodic", 32, length=2 * math.pi)
    with pytest.raises(ValueError):
        solve_background(1.0, np.zeros(32), GrossPitaevskii(1.0), np.zeros(32), grid)


def test_newton_reports_nonconvergence():
    grid = build_grid("periodic", 32, length=2 * math.pi)
    with pytest.raises(ConvergenceError):
        solve_background(1.0, np.zeros(32), GrossPitaevskii(1.0),
                         0.5 + 0.2 * np.cos(grid.x), grid, max_iter=1)


@pytest.mark.parametrize("family", ["gp", "log"])
def test_energy_number_relation(family):
    """dE0/dω = ω dN0/dω for any one-parameter family of stationary states."""
    h = 1e-4

    def state(w):
        if family == "gp":
            grid = build_grid("periodic", 64, length=2 * math.pi)
            return certify(grid, np.full(64, math.sqrt(w)), w, np.zeros(64), GrossPitaevskii(1.0))
        return gaussian_background(401, 10.0, math.exp((1.0 - w) / 2))

    w0 = 1.0
    dE = (background_energy(state(w0 + h)) - background_energy(state(w0 - h))) / (2 * h)
    dN = (background_norm(state(w0 + h)) - background_norm(state(w0 - h))) / (2 * h)
    assert dE == pytest.approx(w0 * dN, rel=1e-5)
