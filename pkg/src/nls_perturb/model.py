"""Nonlinearity families, stationary backgrounds and derived potentials."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .discretization import Grid, Operator, assemble_operator

log = logging.getLogger(__name__)

#: smallest background amplitude at which the logarithmic potentials are evaluated
LOG_FLOOR = 1e-300


class DomainError(ValueError):
    """Nonlinearity evaluated outside its domain."""


class ConvergenceError(ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


# -- nonlinearities -----------------------------------------------------------

@dataclass(frozen=True)
class GrossPitaevskii:
    g: float = 1.0
    name = "gp"

    def F(self, s):
        return self.g * np.asarray(s, dtype=float)

    def dF(self, s):
        return np.full_like(np.asarray(s, dtype=float), self.g)

    def d2F(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def primitive(self, s):
        """``∫_0^s F``."""
        s = np.asarray(s, dtype=float)
        return 0.5 * self.g * s * s


@dataclass(frozen=True)
class Logarithmic:
    name = "log"

    @staticmethod
    def _check(s):
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0):
            bad = np.flatnonzero(np.atleast_1d(s) <= 0)
            raise DomainError(f"logarithmic nonlinearity needs s > 0 (violated at index {bad[0]})")
        return s

    def F(self, s):
        return -np.log(self._check(s))

    def dF(self, s):
        return -1.0 / self._check(s)

    def d2F(self, s):
        return 1.0 / self._check(s) ** 2

    def primitive(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = s[pos] - s[pos] * np.log(s[pos])
        return out


@dataclass(frozen=True)
class Polynomial:
    """``F(s) = sum_m c_m s**m``."""

    coefficients: tuple = (0.0, 1.0)
    name = "poly"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not self.coefficients:
            raise ValueError("polynomial nonlinearity needs at least one coefficient")

    def F(self, s):
        return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), self.coefficients)

    def dF(self, s):
        c = np.polynomial.polynomial.polyder(self.coefficients)
        return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), c)

    def d2F(self, s):
        c = np.polynomial.polynomial.polyder(self.coefficients, 2)
        return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), c)

    def primitive(self, s):
        c = np.polynomial.polynomial.polyint(self.coefficients)
        return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), c)


NonlinearityModel = GrossPitaevskii | Logarithmic | Polynomial


def make_model(kind: str, g: float = 1.0, poly_coeffs=None):
    if kind == "gp":
        return GrossPitaevskii(float(g))
    if kind == "log":
        return Logarithmic()
    if kind == "poly":
        if poly_coeffs is None:
            raise ValueError("model 'poly' needs poly_coeffs")
        return Polynomial(tuple(poly_coeffs))
    raise ValueError(f"unknown model {kind!r} (expected gp, log or poly)")


# -- backgrounds --------------------------------------------------------------

@dataclass(frozen=True)
class DerivedPotentials:
    U: np.ndarray
    W: np.ndarray
    J: np.ndarray

    def modified(self, epsilon: float, dW=None, dU=None) -> "DerivedPotentials":
        U = self.U if dU is None else self.U + epsilon * np.asarray(dU)
        W = self.W if dW is None else self.W + epsilon * np.asarray(dW)
        return DerivedPotentials(U, W, self.J)


@dataclass(frozen=True, eq=False)
class Background:
    """Certified stationary profile ``f`` with frequency ``omega``."""

    grid: Grid
    f: np.ndarray
    omega: float
    potential: np.ndarray
    model: object
    residual: float = field(default=np.nan)

    @property
    def free(self) -> bool:
        """True when the external potential vanishes identically."""
        return bool(np.all(self.potential == 0))

    @property
    def uniform(self) -> bool:
        act = self.grid.restrict(self.f)
        return bool(np.ptp(act) <= 1e-12 * np.max(np.abs(act)))


def certify(grid: Grid, f, omega: float, potential, model, tol: float = 1e-10) -> Background:
    """Wrap ``f`` as a :class:`Background` after checking stationarity."""
    f = np.asarray(f, dtype=float)
    if np.iscomplexobj(f):
        raise ValueError("complex backgrounds are not supported")
    if not np.any(grid.restrict(f)):
        raise ValueError("background profile is identically zero")
    res = stationarity_residual(grid, f, omega, potential, model)
    if not res < tol:
        raise ConvergenceError(f"profile is not stationary: residual {res:.3e} >= {tol:.1e}", res)
    return Background(grid, f, float(omega), np.asarray(potential, dtype=float), model, res)


def _potential_arrays(grid: Grid, f, model):
    act = grid.restrict(f)
    if isinstance(model, Logarithmic):
        bad = np.flatnonzero(act <= LOG_FLOOR)
        if bad.size:
            i = bad[0] + (0 if grid.kind == "periodic" else 1)
            raise DomainError(f"logarithmic potentials undefined where f <= {LOG_FLOOR:g}: "
                              f"grid index {i}, x = {grid.x[i]:.6g}")
    s = act * act
    U, W, J = (np.zeros(grid.n_points) for _ in range(3))
    U[grid.active] = model.F(s)
    W[grid.active] = model.dF(s) * act
    J[grid.active] = 0.5 * model.d2F(s) * act**3
    return U, W, J


def eval_potentials(background: Background) -> DerivedPotentials:
    """``U = F(f²)``, ``W = F'(f²) f``, ``J = F''(f²) f³ / 2`` on the active nodes."""
    return DerivedPotentials(*_potential_arrays(background.grid, background.f, background.model))


def stationarity_residual(grid: Grid, f, omega: float, potential, model) -> float:
    """``|(-Δ + V + F(f²) - ω) f| / |f|``."""
    f = np.asarray(f, dtype=float)
    act = grid.restrict(f)
    nl = model.F(act * act) if not isinstance(model, Logarithmic) else _safe_log_F(act)
    r = -grid.laplacian_active(act) + (grid.restrict(potential) + nl - omega) * act
    return grid.norm(grid.extend(r)) / grid.norm(f)


def _safe_log_F(act):
    s = act * act
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = -np.log(s[pos])
    return out


def operators(background: Background, potentials: DerivedPotentials | None = None):
    potentials = potentials if potentials is not None else eval_potentials(background)
    return assemble_operator("L1", background, potentials), assemble_operator("L2", background, potentials)


def solve_background(omega: float, potential, model, guess, grid: Grid, *,
                     tol: float = 1e-10, max_iter: int = 50) -> Background:
    """Damped Newton iteration on ``L2(f) f = 0``; the Jacobian is ``L1``."""
    f = np.array(guess, dtype=float)
    if not np.any(grid.restrict(f)):
        raise ValueError("initial guess is identically zero")
    potential = np.asarray(potential, dtype=float)
    guess_norm = grid.norm(f)

    def resid(profile):
        return stationarity_residual(grid, profile, omega, potential, model)

    r = resid(f)
    for it in range(max_iter):
        if r < tol:
            break
        bg = Background(grid, f, omega, potential, model)
        pots = eval_potentials(bg)
        L1, L2 = operators(bg, pots)
        step = -L1.solve(L2.apply(f), solvability_tol=np.inf)
        t, accepted = 1.0, None
        while t >= 1e-4:
            trial = f + t * step
            if isinstance(model, Logarithmic):
                # far tails sit below the solve's roundoff; keep them positive
                act = trial[grid.active]
                trial[grid.active] = np.maximum(np.abs(act), 10 * LOG_FLOOR)
            r_trial = resid(trial)
            if r_trial < r:
                accepted = trial, r_trial
                break
            t /= 2
        if accepted is None:
            raise ConvergenceError(f"line search failed at iteration {it} (residual {r:.3e})", r)
        f, r = accepted
        log.debug("newton iter %d: step %.3g residual %.3e", it, t, r)
        if grid.norm(f) < 1e-8 * guess_norm:
            raise ConvergenceError("Newton iteration collapsed to the trivial solution f = 0", r)
    if not r < tol:
        raise ConvergenceError(f"background solve did not converge in {max_iter} iterations "
                               f"(residual {r:.3e})", r)
    if grid.norm(f) < 1e-8 * guess_norm:
        raise ConvergenceError("Newton iteration collapsed to the trivial solution f = 0", r)
    return Background(grid, f, float(omega), potential, model, r)


def dfdomega_from(L1: Operator, f, tol: float = 1e-8) -> np.ndarray:
    """Solve ``L1 y = f`` (minimal norm off the kernel of ``L1``)."""
    y = L1.solve(f, solvability_tol=tol)
    res = L1.residual(y, f)
    if not res < tol:
        raise ConvergenceError(f"df/dω residual {res:.3e} >= {tol:.1e}", res)
    return y


def dfdomega(background: Background, potentials: DerivedPotentials | None = None) -> np.ndarray:
    L1, _ = operators(background, potentials)
    return dfdomega_from(L1, background.f)


def background_norm(background: Background) -> float:
    return float(background.grid.integrate(background.f**2))


def background_energy(background: Background) -> float:
    from .evolution import energy_functional
    return energy_functional(background.f, background.grid, background.potential, background.model)
